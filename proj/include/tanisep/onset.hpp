#pragma once

#include <vector>

#include "tanisep/audio.hpp"

namespace tanisep {

// Strictly increasing onset (stroke) times in seconds.
struct OnsetList {
    std::vector<double> times;

    std::size_t size() const { return times.size(); }
    bool empty() const { return times.empty(); }
};

struct OnsetConfig {
    int fft_size = 1024;
    int hop = 256;
    double threshold_k = 1.5;   // median + k * MAD
    double window_sec = 2.0;    // sliding window for the adaptive threshold
    double min_gap_sec = 0.05;  // minimum inter-onset interval
    int peak_radius = 3;        // local-maximum neighbourhood in flux frames
    double relative_floor = 1e-3;  // fraction of the global flux maximum
};

// Half-wave rectified spectral flux, one value per STFT frame (first frame 0).
std::vector<double> spectral_flux(const AudioBuffer& audio, int fft_size, int hop);

OnsetList detect_onsets(const AudioBuffer& audio, const OnsetConfig& cfg = {});

inline OnsetList detect_onsets(const AudioBuffer& audio, int flux_hop, double threshold_k) {
    OnsetConfig cfg;
    cfg.hop = flux_hop;
    cfg.threshold_k = threshold_k;
    return detect_onsets(audio, cfg);
}

}  // namespace tanisep
