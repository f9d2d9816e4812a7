#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "tanisep/annotation.hpp"
#include "tanisep/audio.hpp"
#include "tanisep/onset.hpp"

namespace tanisep {

enum class SectionKind { voice_a_solo, voice_b_solo, overlap };

struct Section {
    SectionKind kind = SectionKind::voice_a_solo;
    double duration = 1.0;
};

// ~48% voice A, ~34% voice B, ~18% overlap over 150 s, alternating phrases
// and ending with an overlapped section.
std::vector<Section> default_plan();

// Voice A is the pitched, mridangam-like resonator; voice B the
// ghatam-like noise burst.
struct SynthSpec {
    std::uint64_t seed = 1;
    std::vector<Section> plan = default_plan();
    double stroke_rate_a = 6.0;  // strokes per second
    double stroke_rate_b = 5.0;
    int sample_rate = 44100;

    double mode1_hz = 180.0;
    double mode2_hz = 410.0;
    double mode1_decay = 0.15;  // seconds
    double mode2_decay = 0.08;
    double burst_centre_hz = 2500.0;
    double burst_q = 0.9;
    double burst_decay = 0.03;
    double level_a = 0.45;
    double level_b = 0.4;
    double timing_jitter = 0.15;  // fraction of the stroke period

    void validate() const;
    double duration() const;
};


struct SynthOutput {
    AudioBuffer track_a;
    AudioBuffer track_b;
    AudioBuffer mixture;
    Annotation truth;
    OnsetList onsets_a;
    OnsetList onsets_b;
};

SynthOutput generate(const SynthSpec& spec);

std::string to_string(SectionKind kind);
SectionKind section_kind_from_string(const std::string& s);
// Truth label for a section (MRIDANGAM, GHATAM or OVERLAP).
std::string truth_label(SectionKind kind);

nlohmann::json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j, SynthSpec base = {});

}  // namespace tanisep
