#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tanisep/annotation.hpp"
#include "tanisep/audio.hpp"
#include "tanisep/mask_network.hpp"
#include "tanisep/stft.hpp"

namespace tanisep {

struct TrainConfig {
    double gamma = 0.08;
    double learning_rate = 0.1;
    double momentum = 0.9;
    int epochs = 30;
    std::uint64_t seed = 11;
    int sequence_len = 100;
    // Global gradient norm is clipped to this value; 0 disables clipping.
    double clip_norm = 1.0;
    int fft_size = 1024;
    int hop = 256;

    void validate() const;
};

struct TrainingPair {
    AudioBuffer mixture;
    AudioBuffer source_m;
    AudioBuffer source_g;
};

struct TrainResult {
    MaskNetwork net;
    std::vector<double> loss_history;  // mean chunk loss per epoch
};

// Called after every epoch with the 1-based epoch number, the current network
// and that epoch's loss; returning false stops training.
using EpochCallback = std::function<bool(int, const MaskNetwork&, double)>;

// SGD with momentum and truncated BPTT. Chunk order is shuffled per epoch
// from cfg.seed; each chunk starts from a zero recurrent state. Loss targets
// are divided by the spread of the mixture magnitudes of their utterance.
TrainResult train(MaskNetwork net, std::span<const TrainingPair> pairs, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

struct SeparationOutput {
    AudioBuffer mridangam;
    AudioBuffer ghatam;
};

// Maps mixture magnitudes (frames x bins) to a mask pair.
using MaskFunction = std::function<MaskPair(const Eigen::MatrixXd&)>;

// STFT of the signal with fft_size zeros on both sides, so every original
// sample lies in the perfectly reconstructed interior.
Spectrogram padded_stft(const AudioBuffer& audio, int fft_size, int hop);

// Masks the mixture magnitude, resynthesises with the mixture phase and trims
// back to the input length.
SeparationOutput apply_masks(const AudioBuffer& mixture, const MaskFunction& masks, int fft_size = 1024,
                             int hop = 256);
SeparationOutput separate(const MaskNetwork& net, const AudioBuffer& mixture, int fft_size = 1024, int hop = 256);

struct AssembleConfig {
    double crossfade_sec = 0.010;
    // Extra audio given to the separator on each side of an overlap interval.
    double context_sec = 0.25;
    int fft_size = 1024;
    int hop = 256;
};

// Solo intervals are copied into the active channel and zero-filled in the
// other; OVERLAP intervals go through the separator. Joins get a linear
// crossfade centred on the boundary, shortened for short intervals.
SeparationOutput assemble_channels(const AudioBuffer& mixture, const Annotation& labeled, const MaskFunction& masks,
                                   const AssembleConfig& cfg = {});
SeparationOutput assemble_channels(const AudioBuffer& mixture, const Annotation& labeled, const MaskNetwork& net,
                                   const AssembleConfig& cfg = {});

// Sample ranges [begin, end) left untouched by crossfades, per solo interval.
struct SoloRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string label;
};
std::vector<SoloRange> solo_ranges(const AudioBuffer& mixture, const Annotation& labeled, const AssembleConfig& cfg = {});

}  // namespace tanisep
