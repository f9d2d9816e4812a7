#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tanisep/annotation.hpp"
#include "tanisep/audio.hpp"
#include "tanisep/cluster_id.hpp"
#include "tanisep/features.hpp"
#include "tanisep/ib.hpp"
#include "tanisep/mask_network.hpp"
#include "tanisep/metrics.hpp"
#include "tanisep/onset.hpp"
#include "tanisep/separation.hpp"
#include "tanisep/synth.hpp"

namespace tanisep {

enum class SegmentationMode { fixed, strokes };

std::string to_string(SegmentationMode mode);
SegmentationMode segmentation_mode_from_string(const std::string& s);

struct RunConfig {
    SynthSpec synth;  // synth.seed drives the evaluated recording

    SegmentationMode mode = SegmentationMode::strokes;
    double seg_len = 2.0;
    int min_strokes = 15;
    OnsetConfig onset;
    MfccConfig mfcc;

    // Background model whose components are the relevance variables.
    int ubm_components = 32;
    int ubm_iters = 100;
    std::uint64_t ubm_seed = 3;
    IBConfig ib;
    RealignConfig realign;

    int id_components = 3;
    std::uint64_t id_train_seed = 101;
    IdentifyConfig identify;

    NetworkShape net;
    std::uint64_t net_seed = 5;
    std::uint64_t net_train_seed = 202;
    // Cap on the overlapped audio used for training, in seconds (0: no cap).
    double net_train_max_sec = 8.0;
    TrainConfig train;
    AssembleConfig assemble;

    double collar = 0.15;
    double ci_max_der = 0.10;

    void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
// Keys absent from j keep their value from base; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path);

// In-memory stages.

struct Diarization {
    FeatureMatrix features;
    OnsetList onsets;
    std::vector<Segment> segments;
    ClusterState state;
    Annotation hypothesis;
};

// Segments holding no feature frame are folded into a neighbour.
std::vector<Segment> drop_empty_segments(const FeatureMatrix& features, std::vector<Segment> segments);

Diarization diarize(const AudioBuffer& mixture, const RunConfig& cfg);

IdentificationModels train_identification_models(const RunConfig& cfg);

// Overlapped sections of a synthetic recording as (mixture, mridangam, ghatam) triples.
std::vector<TrainingPair> overlap_pairs(const SynthOutput& synth, double max_sec = 0.0);
TrainResult train_separation_network(const RunConfig& cfg);

struct ScoreReport {
    struct Pair {
        double mridangam = 0.0;
        double ghatam = 0.0;
    };
    DerBreakdown der;
    double purity = 0.0;
    double accuracy = 0.0;
    bool has_separation = false;
    bool has_oracle = false;
    Pair overlap_proposed;
    Pair overlap_oracle;
    Pair solo_proposed;
    Pair solo_traditional;
    // Fraction of samples in labeled solo ranges (outside crossfades) whose
    // active-channel output equals the mixture bit for bit.
    double solo_exact_fraction = 0.0;
    std::size_t solo_samples = 0;
};

// GSDR of both channels over the reference intervals carrying `label`.
// For solo labels only the active channel is scored; the other entry is 0.
ScoreReport::Pair labeled_gsdr(const SeparationOutput& estimate, const AudioBuffer& source_m,
                               const AudioBuffer& source_g, const Annotation& reference, const std::string& label);

void print_report(std::ostream& out, const ScoreReport& report, double collar);
void write_scores_csv(std::ostream& out, const ScoreReport& report);

// File-level stages working inside a directory with fixed artifact names.

namespace files {
inline constexpr const char* config = "config.json";
inline constexpr const char* mixture = "mixture.wav";
inline constexpr const char* source_m = "source_mridangam.wav";
inline constexpr const char* source_g = "source_ghatam.wav";
inline constexpr const char* truth = "truth.rttm";
inline constexpr const char* synth_spec = "synth.json";
inline constexpr const char* segments = "segments.rttm";
inline constexpr const char* hypothesis = "hypothesis.rttm";
inline constexpr const char* merge_log = "merge_log.csv";
inline constexpr const char* id_models = "id_models.json";
inline constexpr const char* labeled = "labeled.rttm";
inline constexpr const char* identification = "identification.json";
inline constexpr const char* net = "net.json";
inline constexpr const char* train_loss = "train_loss.csv";
inline constexpr const char* proposed_m = "proposed_mridangam.wav";
inline constexpr const char* proposed_g = "proposed_ghatam.wav";
inline constexpr const char* traditional_m = "traditional_mridangam.wav";
inline constexpr const char* traditional_g = "traditional_ghatam.wav";
inline constexpr const char* scores = "scores.csv";
}  // namespace files

// Raised when a stage cannot run, e.g. because an upstream artifact is missing.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message)
        : Error(stage + ": " + message), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct StageOptions {
    std::optional<std::filesystem::path> input;   // mixture for diarize
    std::optional<std::filesystem::path> models;  // pretrained identification models
    std::optional<std::filesystem::path> net;     // pretrained separation network
};

void run_synth(const std::filesystem::path& dir, const RunConfig& cfg);
void run_diarize(const std::filesystem::path& dir, const RunConfig& cfg, const StageOptions& opts = {});
void run_identify(const std::filesystem::path& dir, const RunConfig& cfg, const StageOptions& opts = {});
void run_separate(const std::filesystem::path& dir, const RunConfig& cfg, const StageOptions& opts = {});
ScoreReport run_score(const std::filesystem::path& dir, const RunConfig& cfg);

}  // namespace tanisep
