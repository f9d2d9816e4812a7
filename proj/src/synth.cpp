#include "tanisep/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tanisep/rng.hpp"

namespace tanisep {

namespace {

constexpr double kFadeSec = 0.005;

bool voice_active(SectionKind kind, int voice) {
    if (kind == SectionKind::overlap) return true;
    return voice == 0 ? kind == SectionKind::voice_a_solo : kind == SectionKind::voice_b_solo;
}

// RBJ band-pass (constant 0 dB peak gain).
struct Biquad {
    double b0, b1, b2, a1, a2;
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;

    Biquad(double centre, double q, double rate) {
        const double w0 = 2.0 * std::numbers::pi * centre / rate;
        const double alpha = std::sin(w0) / (2.0 * q);
        const double a0 = 1.0 + alpha;
        b0 = alpha / a0;
        b1 = 0.0;
        b2 = -alpha / a0;
        a1 = -2.0 * std::cos(w0) / a0;
        a2 = (1.0 - alpha) / a0;
    }

    double operator()(double x) {
        const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = x;
        y2 = y1;
        y1 = y;
        return y;
    }
};

void render_resonant_stroke(std::vector<double>& out, std::size_t start, std::size_t limit, const SynthSpec& spec,
                            Rng& rng) {
    const double rate = spec.sample_rate;
    const double amp = spec.level_a * rng.uniform(0.6, 1.0);
    const double f1 = spec.mode1_hz * rng.uniform(0.99, 1.01);
    const double f2 = spec.mode2_hz * rng.uniform(0.98, 1.02);
    const double mix2 = rng.uniform(0.35, 0.6);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const auto length = static_cast<std::size_t>(8.0 * spec.mode1_decay * rate);
    const double attack = 0.002 * rate;
    for (std::size_t i = 0; i < length && start + i < limit; ++i) {
        const double t = static_cast<double>(i) / rate;
        const double env = std::min(1.0, static_cast<double>(i) / attack);
        const double v = std::exp(-t / spec.mode1_decay) * std::sin(2.0 * std::numbers::pi * f1 * t + phase) +
                         mix2 * std::exp(-t / spec.mode2_decay) * std::sin(2.0 * std::numbers::pi * f2 * t);
        out[start + i] += amp * env * v;
    }
}

void render_burst_stroke(std::vector<double>& out, std::size_t start, std::size_t limit, const SynthSpec& spec,
                         Rng& rng) {
    const double rate = spec.sample_rate;
    const double amp = spec.level_b * rng.uniform(0.6, 1.0);
    Biquad filter(spec.burst_centre_hz * rng.uniform(0.95, 1.05), spec.burst_q, rate);
    const auto length = static_cast<std::size_t>(8.0 * spec.burst_decay * rate);
    // Band-pass output of unit white noise is quieter; compensate roughly.
    const double gain = 2.5;
    for (std::size_t i = 0; i < length && start + i < limit; ++i) {
        const double t = static_cast<double>(i) / rate;
        out[start + i] += amp * gain * std::exp(-t / spec.burst_decay) * filter(rng.normal());
    }
}

}  // namespace

void SynthSpec::validate() const {
    if (plan.empty()) throw Error("synth: plan must not be empty");
    for (const auto& s : plan) {
        if (!(s.duration > 0.0)) throw Error("synth: section durations must be positive");
    }
    if (sample_rate <= 0) throw Error("synth: sample rate must be positive");
    if (!(stroke_rate_a > 0.0) || !(stroke_rate_b > 0.0)) throw Error("synth: stroke rates must be positive");
}

double SynthSpec::duration() const {
    double total = 0.0;
    for (const auto& s : plan) total += s.duration;
    return total;
}

std::vector<Section> default_plan() {
    using K = SectionKind;
    return {{K::voice_a_solo, 20.0}, {K::voice_b_solo, 14.0}, {K::voice_a_solo, 16.0}, {K::overlap, 8.0},
            {K::voice_b_solo, 12.0}, {K::voice_a_solo, 14.0}, {K::voice_b_solo, 10.0}, {K::voice_a_solo, 22.0},
            {K::voice_b_solo, 15.0}, {K::overlap, 19.0}};
}

SynthOutput generate(const SynthSpec& spec) {
    spec.validate();
    const double rate = spec.sample_rate;

    // Section boundaries in samples; cumulative so the truth tiles exactly.
    std::vector<std::size_t> edges = {0};
    double t = 0.0;
    for (const auto& s : spec.plan) {
        t += s.duration;
        edges.push_back(static_cast<std::size_t>(std::llround(t * rate)));
    }
    const std::size_t total = edges.back();

    SynthOutput out;
    std::vector<double> tracks[2] = {std::vector<double>(total, 0.0), std::vector<double>(total, 0.0)};
    std::vector<double> onsets[2];

    Rng rng(spec.seed);
    for (int voice = 0; voice < 2; ++voice) {
        const double period = 1.0 / (voice == 0 ? spec.stroke_rate_a : spec.stroke_rate_b);
        std::size_t i = 0;
        while (i < spec.plan.size()) {
            if (!voice_active(spec.plan[i].kind, voice)) {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < spec.plan.size() && voice_active(spec.plan[j].kind, voice)) ++j;
            const std::size_t run_start = edges[i];
            const std::size_t run_end = edges[j];
            const double start_sec = static_cast<double>(run_start) / rate;
            const double end_sec = static_cast<double>(run_end) / rate;

            std::vector<double>& track = tracks[voice];
            double grid = start_sec + rng.uniform(0.02, period);
            while (true) {
                const double jitter = spec.timing_jitter * period * rng.uniform(-1.0, 1.0);
                const double when = std::max(start_sec + 0.005, grid + jitter);
                if (when > end_sec - 0.05) break;
                const auto at = static_cast<std::size_t>(std::llround(when * rate));
                if (voice == 0) {
                    render_resonant_stroke(track, at, run_end, spec, rng);
                } else {
                    render_burst_stroke(track, at, run_end, spec, rng);
                }
                onsets[voice].push_back(static_cast<double>(at) / rate);
                grid += period;
            }

            // Fade to exact silence at the end of the run.
            const auto fade = static_cast<std::size_t>(kFadeSec * rate);
            for (std::size_t k = 0; k < fade && k < run_end - run_start; ++k) {
                const double g = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(k) / fade);
                track[run_end - 1 - k] *= g;
            }
            i = j;
        }
    }

    std::vector<double> mix(total);
    for (std::size_t k = 0; k < total; ++k) mix[k] = tracks[0][k] + tracks[1][k];

    out.track_a = AudioBuffer(std::move(tracks[0]), spec.sample_rate);
    out.track_b = AudioBuffer(std::move(tracks[1]), spec.sample_rate);
    out.mixture = AudioBuffer(std::move(mix), spec.sample_rate);
    out.onsets_a.times = std::move(onsets[0]);
    out.onsets_b.times = std::move(onsets[1]);

    Annotation truth;
    for (std::size_t i = 0; i < spec.plan.size(); ++i) {
        truth.push_back(Segment{static_cast<double>(edges[i]) / rate, static_cast<double>(edges[i + 1]) / rate,
                                truth_label(spec.plan[i].kind)});
    }
    out.truth = truth.merged();
    return out;
}

std::string to_string(SectionKind kind) {
    switch (kind) {
        case SectionKind::voice_a_solo: return "VOICE_A_SOLO";
        case SectionKind::voice_b_solo: return "VOICE_B_SOLO";
        case SectionKind::overlap: return "OVERLAP";
    }
    return "?";
}

SectionKind section_kind_from_string(const std::string& s) {
    if (s == "VOICE_A_SOLO" || s == "A") return SectionKind::voice_a_solo;
    if (s == "VOICE_B_SOLO" || s == "B") return SectionKind::voice_b_solo;
    if (s == "OVERLAP") return SectionKind::overlap;
    throw Error("synth: unknown section label '" + s + "'");
}

std::string truth_label(SectionKind kind) {
    switch (kind) {
        case SectionKind::voice_a_solo: return labels::mridangam;
        case SectionKind::voice_b_solo: return labels::ghatam;
        case SectionKind::overlap: return labels::overlap;
    }
    return {};
}

nlohmann::json to_json(const SynthSpec& spec) {
    nlohmann::json plan = nlohmann::json::array();
    for (const auto& s : spec.plan) plan.push_back({{"label", to_string(s.kind)}, {"duration", s.duration}});
    return {{"seed", spec.seed},
            {"plan", plan},
            {"stroke_rate_a", spec.stroke_rate_a},
            {"stroke_rate_b", spec.stroke_rate_b},
            {"sample_rate", spec.sample_rate},
            {"mode1_hz", spec.mode1_hz},
            {"mode2_hz", spec.mode2_hz},
            {"mode1_decay", spec.mode1_decay},
            {"mode2_decay", spec.mode2_decay},
            {"burst_centre_hz", spec.burst_centre_hz},
            {"burst_q", spec.burst_q},
            {"burst_decay", spec.burst_decay},
            {"level_a", spec.level_a},
            {"level_b", spec.level_b},
            {"timing_jitter", spec.timing_jitter}};
}

SynthSpec synth_spec_from_json(const nlohmann::json& j, SynthSpec base) {
    SynthSpec s = std::move(base);
    s.seed = j.value("seed", s.seed);
    if (j.contains("plan")) {
        s.plan.clear();
        for (const auto& e : j.at("plan")) {
            s.plan.push_back({section_kind_from_string(e.at("label").get<std::string>()), e.at("duration").get<double>()});
        }
    }
    s.stroke_rate_a = j.value("stroke_rate_a", s.stroke_rate_a);
    s.stroke_rate_b = j.value("stroke_rate_b", s.stroke_rate_b);
    s.sample_rate = j.value("sample_rate", s.sample_rate);
    s.mode1_hz = j.value("mode1_hz", s.mode1_hz);
    s.mode2_hz = j.value("mode2_hz", s.mode2_hz);
    s.mode1_decay = j.value("mode1_decay", s.mode1_decay);
    s.mode2_decay = j.value("mode2_decay", s.mode2_decay);
    s.burst_centre_hz = j.value("burst_centre_hz", s.burst_centre_hz);
    s.burst_q = j.value("burst_q", s.burst_q);
    s.burst_decay = j.value("burst_decay", s.burst_decay);
    s.level_a = j.value("level_a", s.level_a);
    s.level_b = j.value("level_b", s.level_b);
    s.timing_jitter = j.value("timing_jitter", s.timing_jitter);
    s.validate();
    return s;
}

}  // namespace tanisep
