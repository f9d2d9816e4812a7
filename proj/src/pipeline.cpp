#include "tanisep/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "tanisep/gmm.hpp"
#include "tanisep/segmentation.hpp"

namespace tanisep {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(SegmentationMode mode) { return mode == SegmentationMode::fixed ? "fixed" : "strokes"; }

SegmentationMode segmentation_mode_from_string(const std::string& s) {
    if (s == "fixed") return SegmentationMode::fixed;
    if (s == "strokes") return SegmentationMode::strokes;
    throw Error("unknown segmentation mode '" + s + "' (expected fixed or strokes)");
}

namespace {

std::string stop_rule_name(StopRule r) {
    return r == StopRule::cap_and_threshold ? "cap_and_threshold" : "threshold_or_cap";
}

StopRule stop_rule_from_string(const std::string& s) {
    if (s == "cap_and_threshold") return StopRule::cap_and_threshold;
    if (s == "threshold_or_cap") return StopRule::threshold_or_cap;
    throw Error("unknown stop rule '" + s + "'");
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw Error("config: '" + where + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw Error("config: unknown key '" + key + "' in '" + where + "'");
        }
    }
}

template <class T>
void read(const json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
    synth.validate();
    if (!(seg_len > 0.0)) throw Error("config: seg_len must be positive");
    if (min_strokes < 1) throw Error("config: min_strokes must be at least 1");
    if (mfcc.n_coeffs < 1 || mfcc.n_coeffs > mfcc.n_mels) throw Error("config: invalid MFCC dimensions");
    if (ubm_components < 1 || ubm_iters < 1) throw Error("config: invalid background model settings");
    if (!(ib.beta > 0.0)) throw Error("config: beta must be positive");
    if (ib.nmi_threshold < 0.0 || ib.nmi_threshold > 1.0) throw Error("config: nmi_threshold must be in [0, 1]");
    if (ib.max_clusters < 1) throw Error("config: max_clusters must be at least 1");
    if (!(realign.min_dur >= 0.0) || realign.components < 1 || realign.passes < 1) {
        throw Error("config: invalid realignment settings");
    }
    if (!(realign.switch_prob > 0.0 && realign.switch_prob < 1.0)) {
        throw Error("config: switch_prob must be in (0, 1)");
    }
    if (id_components < 1) throw Error("config: id_components must be at least 1");
    if (net.input_dim != train.fft_size / 2 + 1) throw Error("config: network input size must be fft_size/2 + 1");
    if (net.hidden.empty() || std::any_of(net.hidden.begin(), net.hidden.end(), [](int h) { return h < 1; })) {
        throw Error("config: hidden layer sizes must be positive");
    }
    if (net_train_max_sec < 0.0) throw Error("config: net_train_max_sec must be non-negative");
    train.validate();
    if (assemble.fft_size != train.fft_size || assemble.hop != train.hop) {
        throw Error("config: separation and training STFT settings differ");
    }
    if (collar < 0.0) throw Error("config: collar must be non-negative");
}

json to_json(const RunConfig& c) {
    return {
        {"synth", to_json(c.synth)},
        {"segmentation",
         {{"mode", to_string(c.mode)},
          {"seg_len", c.seg_len},
          {"min_strokes", c.min_strokes},
          {"onset",
           {{"fft_size", c.onset.fft_size},
            {"hop", c.onset.hop},
            {"threshold_k", c.onset.threshold_k},
            {"window_sec", c.onset.window_sec},
            {"min_gap_sec", c.onset.min_gap_sec},
            {"peak_radius", c.onset.peak_radius},
            {"relative_floor", c.onset.relative_floor}}}}},
        {"mfcc",
         {{"n_coeffs", c.mfcc.n_coeffs},
          {"n_mels", c.mfcc.n_mels},
          {"window_sec", c.mfcc.window_sec},
          {"hop_sec", c.mfcc.hop_sec},
          {"pre_emphasis", c.mfcc.pre_emphasis},
          {"log_floor", c.mfcc.log_floor},
          {"f_min", c.mfcc.f_min},
          {"f_max", c.mfcc.f_max}}},
        {"ib",
         {{"beta", c.ib.beta},
          {"nmi_threshold", c.ib.nmi_threshold},
          {"max_clusters", c.ib.max_clusters},
          {"stop_rule", stop_rule_name(c.ib.stop_rule)},
          {"ubm_components", c.ubm_components},
          {"ubm_iters", c.ubm_iters},
          {"ubm_seed", c.ubm_seed}}},
        {"realign",
         {{"min_dur", c.realign.min_dur},
          {"components", c.realign.components},
          {"passes", c.realign.passes},
          {"switch_prob", c.realign.switch_prob},
          {"em_iters", c.realign.em_iters},
          {"seed", c.realign.seed}}},
        {"identification",
         {{"components", c.id_components},
          {"train_seed", c.id_train_seed},
          {"solo_only", c.identify.solo_only},
          {"llr_threshold", c.identify.llr_threshold}}},
        {"separation",
         {{"hidden", c.net.hidden},
          {"net_seed", c.net_seed},
          {"train_seed", c.net_train_seed},
          {"max_train_sec", c.net_train_max_sec},
          {"gamma", c.train.gamma},
          {"learning_rate", c.train.learning_rate},
          {"momentum", c.train.momentum},
          {"epochs", c.train.epochs},
          {"shuffle_seed", c.train.seed},
          {"sequence_len", c.train.sequence_len},
          {"clip_norm", c.train.clip_norm},
          {"fft_size", c.train.fft_size},
          {"hop", c.train.hop},
          {"crossfade_sec", c.assemble.crossfade_sec},
          {"context_sec", c.assemble.context_sec}}},
        {"scoring", {{"collar", c.collar}, {"ci_max_der", c.ci_max_der}}},
    };
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
    check_keys(j, {"synth", "segmentation", "mfcc", "ib", "realign", "identification", "separation", "scoring"},
               "config");
    if (j.contains("synth")) c.synth = synth_spec_from_json(j.at("synth"), c.synth);
    if (j.contains("segmentation")) {
        const json& s = j.at("segmentation");
        check_keys(s, {"mode", "seg_len", "min_strokes", "onset"}, "segmentation");
        if (s.contains("mode")) c.mode = segmentation_mode_from_string(s.at("mode").get<std::string>());
        read(s, "seg_len", c.seg_len);
        read(s, "min_strokes", c.min_strokes);
        if (s.contains("onset")) {
            const json& o = s.at("onset");
            check_keys(o,
                       {"fft_size", "hop", "threshold_k", "window_sec", "min_gap_sec", "peak_radius",
                        "relative_floor"},
                       "onset");
            read(o, "fft_size", c.onset.fft_size);
            read(o, "hop", c.onset.hop);
            read(o, "threshold_k", c.onset.threshold_k);
            read(o, "window_sec", c.onset.window_sec);
            read(o, "min_gap_sec", c.onset.min_gap_sec);
            read(o, "peak_radius", c.onset.peak_radius);
            read(o, "relative_floor", c.onset.relative_floor);
        }
    }
    if (j.contains("mfcc")) {
        const json& m = j.at("mfcc");
        check_keys(m, {"n_coeffs", "n_mels", "window_sec", "hop_sec", "pre_emphasis", "log_floor", "f_min", "f_max"},
                   "mfcc");
        read(m, "n_coeffs", c.mfcc.n_coeffs);
        read(m, "n_mels", c.mfcc.n_mels);
        read(m, "window_sec", c.mfcc.window_sec);
        read(m, "hop_sec", c.mfcc.hop_sec);
        read(m, "pre_emphasis", c.mfcc.pre_emphasis);
        read(m, "log_floor", c.mfcc.log_floor);
        read(m, "f_min", c.mfcc.f_min);
        read(m, "f_max", c.mfcc.f_max);
    }
    if (j.contains("ib")) {
        const json& b = j.at("ib");
        check_keys(b,
                   {"beta", "nmi_threshold", "max_clusters", "stop_rule", "ubm_components", "ubm_iters", "ubm_seed"},
                   "ib");
        read(b, "beta", c.ib.beta);
        read(b, "nmi_threshold", c.ib.nmi_threshold);
        read(b, "max_clusters", c.ib.max_clusters);
        if (b.contains("stop_rule")) c.ib.stop_rule = stop_rule_from_string(b.at("stop_rule").get<std::string>());
        read(b, "ubm_components", c.ubm_components);
        read(b, "ubm_iters", c.ubm_iters);
        read(b, "ubm_seed", c.ubm_seed);
    }
    if (j.contains("realign")) {
        const json& r = j.at("realign");
        check_keys(r, {"min_dur", "components", "passes", "switch_prob", "em_iters", "seed"}, "realign");
        read(r, "min_dur", c.realign.min_dur);
        read(r, "components", c.realign.components);
        read(r, "passes", c.realign.passes);
        read(r, "switch_prob", c.realign.switch_prob);
        read(r, "em_iters", c.realign.em_iters);
        read(r, "seed", c.realign.seed);
    }
    if (j.contains("identification")) {
        const json& i = j.at("identification");
        check_keys(i, {"components", "train_seed", "solo_only", "llr_threshold"}, "identification");
        read(i, "components", c.id_components);
        read(i, "train_seed", c.id_train_seed);
        read(i, "solo_only", c.identify.solo_only);
        read(i, "llr_threshold", c.identify.llr_threshold);
    }
    if (j.contains("separation")) {
        const json& s = j.at("separation");
        check_keys(s,
                   {"hidden", "net_seed", "train_seed", "max_train_sec", "gamma", "learning_rate", "momentum",
                    "epochs", "shuffle_seed", "sequence_len", "clip_norm", "fft_size", "hop", "crossfade_sec",
                    "context_sec"},
                   "separation");
        read(s, "hidden", c.net.hidden);
        read(s, "net_seed", c.net_seed);
        read(s, "train_seed", c.net_train_seed);
        read(s, "max_train_sec", c.net_train_max_sec);
        read(s, "gamma", c.train.gamma);
        read(s, "learning_rate", c.train.learning_rate);
        read(s, "momentum", c.train.momentum);
        read(s, "epochs", c.train.epochs);
        read(s, "shuffle_seed", c.train.seed);
        read(s, "sequence_len", c.train.sequence_len);
        read(s, "clip_norm", c.train.clip_norm);
        read(s, "fft_size", c.train.fft_size);
        read(s, "hop", c.train.hop);
        read(s, "crossfade_sec", c.assemble.crossfade_sec);
        read(s, "context_sec", c.assemble.context_sec);
        c.assemble.fft_size = c.train.fft_size;
        c.assemble.hop = c.train.hop;
        c.net.input_dim = c.train.fft_size / 2 + 1;
    }
    if (j.contains("scoring")) {
        const json& s = j.at("scoring");
        check_keys(s, {"collar", "ci_max_der"}, "scoring");
        read(s, "collar", c.collar);
        read(s, "ci_max_der", c.ci_max_der);
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error("config " + path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

std::vector<Segment> drop_empty_segments(const FeatureMatrix& features, std::vector<Segment> segments) {
    const auto frames = frames_per_segment(features, segments);
    std::vector<Segment> out;
    bool pending_start = false;
    double start = 0.0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (frames[i].empty()) {
            if (!out.empty()) {
                out.back().end = segments[i].end;
            } else if (!pending_start) {
                pending_start = true;
                start = segments[i].start;
            }
            continue;
        }
        Segment s = segments[i];
        if (pending_start) {
            s.start = start;
            pending_start = false;
        }
        out.push_back(std::move(s));
    }
    if (out.empty()) throw Error("diarize: no segment holds a feature frame");
    return out;
}

Diarization diarize(const AudioBuffer& mixture, const RunConfig& cfg) {
    mixture.validate();
    if (mixture.empty()) throw Error("diarize: empty input");
    Diarization d;
    d.features = mfcc(mixture, cfg.mfcc);
    if (d.features.empty()) throw Error("diarize: input too short for feature extraction");
    const double total = mixture.duration();
    std::vector<Segment> segments;
    if (cfg.mode == SegmentationMode::fixed) {
        segments = segment_fixed(total, cfg.seg_len);
    } else {
        if (mixture.size() > static_cast<std::size_t>(cfg.onset.fft_size)) d.onsets = detect_onsets(mixture, cfg.onset);
        segments = segment_by_strokes(d.onsets, total, cfg.min_strokes);
    }
    d.segments = drop_empty_segments(d.features, std::move(segments));

    EmOptions em;
    em.k = static_cast<int>(std::min<Eigen::Index>(cfg.ubm_components, d.features.rows()));
    em.max_iters = cfg.ubm_iters;
    em.seed = cfg.ubm_seed;
    const GaussianMixture ubm = fit_em(d.features, em);
    const PosteriorTable table = build_posterior_table(ubm, d.features, d.segments);
    d.state = agglomerate(table, cfg.ib);
    d.hypothesis = realign(d.features, d.segments, d.state, cfg.realign);
    return d;
}

IdentificationModels train_identification_models(const RunConfig& cfg) {
    SynthSpec spec = cfg.synth;
    spec.seed = cfg.id_train_seed;
    const SynthOutput synth = generate(spec);
    const FeatureMatrix features = mfcc(synth.mixture, cfg.mfcc);
    std::vector<Eigen::Index> overlap_rows, ghatam_rows;
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
        const auto label = synth.truth.label_at(features.frame_times[static_cast<std::size_t>(r)]);
        if (!label) continue;
        if (*label == labels::overlap) overlap_rows.push_back(r);
        if (*label == labels::ghatam) ghatam_rows.push_back(r);
    }
    auto fit = [&](const std::vector<Eigen::Index>& rows, const char* what, std::uint64_t seed) {
        if (rows.empty()) throw Error(std::string("identification training recording has no ") + what + " frames");
        EmOptions em;
        em.k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.id_components), rows.size()));
        em.seed = seed;
        return fit_em(features.select_rows(rows), em);
    };
    return {fit(overlap_rows, "overlap", cfg.id_train_seed + 1), fit(ghatam_rows, "ghatam", cfg.id_train_seed + 2)};
}

std::vector<TrainingPair> overlap_pairs(const SynthOutput& synth, double max_sec) {
    std::vector<TrainingPair> pairs;
    const int rate = synth.mixture.sample_rate;
    double used = 0.0;
    for (const Segment& s : synth.truth.segments()) {
        if (s.label != labels::overlap) continue;
        double end = s.end;
        if (max_sec > 0.0) {
            if (used >= max_sec) break;
            end = std::min(end, s.start + (max_sec - used));
        }
        const auto b = static_cast<std::size_t>(std::llround(s.start * rate));
        const auto e = std::min(synth.mixture.size(), static_cast<std::size_t>(std::llround(end * rate)));
        if (e <= b) continue;
        auto slice = [&](const AudioBuffer& a) {
            return AudioBuffer(std::vector<double>(a.samples.begin() + static_cast<std::ptrdiff_t>(b),
                                                   a.samples.begin() + static_cast<std::ptrdiff_t>(e)),
                               rate);
        };
        pairs.push_back({slice(synth.mixture), slice(synth.track_a), slice(synth.track_b)});
        used += end - s.start;
    }
    return pairs;
}

TrainResult train_separation_network(const RunConfig& cfg) {
    SynthSpec spec = cfg.synth;
    spec.seed = cfg.net_train_seed;
    const SynthOutput synth = generate(spec);
    const std::vector<TrainingPair> pairs = overlap_pairs(synth, cfg.net_train_max_sec);
    if (pairs.empty()) throw Error("separation training recording has no overlapped section");
    return train(MaskNetwork(cfg.net, cfg.net_seed), pairs, cfg.train);
}

ScoreReport::Pair labeled_gsdr(const SeparationOutput& estimate, const AudioBuffer& source_m,
                               const AudioBuffer& source_g, const Annotation& reference, const std::string& label) {
    const std::size_t n = estimate.mridangam.size();
    if (estimate.ghatam.size() != n || source_m.size() != n || source_g.size() != n) {
        throw Error("score: separated channels and sources differ in length");
    }
    const double rate = estimate.mridangam.sample_rate;
    std::vector<SdrSegment> seg_m, seg_g;
    for (const Segment& s : reference.segments()) {
        if (s.label != label) continue;
        const auto b = std::min(n, static_cast<std::size_t>(std::llround(s.start * rate)));
        const auto e = std::min(n, static_cast<std::size_t>(std::llround(s.end * rate)));
        if (e <= b) continue;
        auto span_of = [&](const AudioBuffer& a) { return std::span<const double>(a.samples).subspan(b, e - b); };
        const double dur = static_cast<double>(e - b) / rate;
        if (label != labels::ghatam) seg_m.push_back({span_of(estimate.mridangam), span_of(source_m), dur});
        if (label != labels::mridangam) seg_g.push_back({span_of(estimate.ghatam), span_of(source_g), dur});
    }
    ScoreReport::Pair p;
    if (!seg_m.empty()) p.mridangam = global_sdr(seg_m);
    if (!seg_g.empty()) p.ghatam = global_sdr(seg_g);
    return p;
}

namespace {

std::string fmt(double v, int precision = 2) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v;
    return s.str();
}

}  // namespace

void print_report(std::ostream& out, const ScoreReport& r, double collar) {
    out << "== Diarization (collar " << fmt(collar, 2) << " s) ==\n";
    out << "  missed        " << fmt(r.der.missed, 3) << " s\n";
    out << "  false alarm   " << fmt(r.der.false_alarm, 3) << " s\n";
    out << "  confusion     " << fmt(r.der.confusion, 3) << " s\n";
    out << "  scored        " << fmt(r.der.total_scored, 3) << " s\n";
    out << "  DER           " << fmt(100.0 * r.der.der, 2) << " %\n";
    out << "== Clustering and identification ==\n";
    out << "  purity        " << fmt(r.purity, 4) << "\n";
    out << "  accuracy      " << fmt(r.accuracy, 2) << " %\n";
    if (!r.has_separation) {
        out << "== Separation ==\n  (no separated channels)\n";
        return;
    }
    out << "== Overlapped regions: GSDR (dB) ==\n";
    out << "  system        mridangam   ghatam\n";
    out << "  proposed      " << std::setw(9) << fmt(r.overlap_proposed.mridangam) << std::setw(9)
        << fmt(r.overlap_proposed.ghatam) << "\n";
    if (r.has_oracle) {
        out << "  oracle        " << std::setw(9) << fmt(r.overlap_oracle.mridangam) << std::setw(9)
            << fmt(r.overlap_oracle.ghatam) << "\n";
    }
    out << "== Solo regions: GSDR of the active channel (dB) ==\n";
    out << "  system        mridangam   ghatam\n";
    out << "  proposed      " << std::setw(9) << fmt(r.solo_proposed.mridangam) << std::setw(9)
        << fmt(r.solo_proposed.ghatam) << "\n";
    out << "  traditional   " << std::setw(9) << fmt(r.solo_traditional.mridangam) << std::setw(9)
        << fmt(r.solo_traditional.ghatam) << "\n";
    out << "  gap           " << std::setw(9) << fmt(r.solo_proposed.mridangam - r.solo_traditional.mridangam)
        << std::setw(9) << fmt(r.solo_proposed.ghatam - r.solo_traditional.ghatam) << "\n";
    out << "  exact copies  " << fmt(100.0 * r.solo_exact_fraction, 2) << " % of " << r.solo_samples
        << " solo samples\n";
}

void write_scores_csv(std::ostream& out, const ScoreReport& r) {
    out << "metric,value\n";
    out << std::setprecision(10);
    out << "der," << r.der.der << "\n";
    out << "der_missed," << r.der.missed << "\n";
    out << "der_false_alarm," << r.der.false_alarm << "\n";
    out << "der_confusion," << r.der.confusion << "\n";
    out << "der_scored," << r.der.total_scored << "\n";
    out << "purity," << r.purity << "\n";
    out << "accuracy," << r.accuracy << "\n";
    if (r.has_separation) {
        out << "gsdr_overlap_proposed_mridangam," << r.overlap_proposed.mridangam << "\n";
        out << "gsdr_overlap_proposed_ghatam," << r.overlap_proposed.ghatam << "\n";
        if (r.has_oracle) {
            out << "gsdr_overlap_oracle_mridangam," << r.overlap_oracle.mridangam << "\n";
            out << "gsdr_overlap_oracle_ghatam," << r.overlap_oracle.ghatam << "\n";
        }
        out << "gsdr_solo_proposed_mridangam," << r.solo_proposed.mridangam << "\n";
        out << "gsdr_solo_proposed_ghatam," << r.solo_proposed.ghatam << "\n";
        out << "gsdr_solo_traditional_mridangam," << r.solo_traditional.mridangam << "\n";
        out << "gsdr_solo_traditional_ghatam," << r.solo_traditional.ghatam << "\n";
        out << "gsdr_solo_gap_mridangam," << r.solo_proposed.mridangam - r.solo_traditional.mridangam << "\n";
        out << "gsdr_solo_gap_ghatam," << r.solo_proposed.ghatam - r.solo_traditional.ghatam << "\n";
        out << "solo_exact_fraction," << r.solo_exact_fraction << "\n";
        out << "solo_samples," << r.solo_samples << "\n";
    }
}

namespace {

void require(const fs::path& path, const std::string& stage) {
    if (!fs::exists(path)) throw StageError(stage, "missing upstream artifact " + path.string());
}

void ensure_dir(const fs::path& dir, const std::string& stage) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw StageError(stage, "cannot create work directory " + dir.string());
}

template <class F>
auto wrap(const std::string& stage, F&& f) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

AudioBuffer load_mixture(const fs::path& dir, const std::string& stage) {
    require(dir / files::mixture, stage);
    return read_wav(dir / files::mixture);
}

SeparationOutput read_pair(const fs::path& m, const fs::path& g) { return {read_wav(m), read_wav(g)}; }

}  // namespace

void run_synth(const fs::path& dir, const RunConfig& cfg) {
    ensure_dir(dir, "synth");
    wrap("synth", [&] {
        const SynthOutput out = generate(cfg.synth);
        write_wav(dir / files::mixture, out.mixture);
        write_wav(dir / files::source_m, out.track_a);
        write_wav(dir / files::source_g, out.track_b);
        write_rttm(dir / files::truth, out.truth, "mixture");
        write_text(dir / files::synth_spec, to_json(cfg.synth).dump(2) + "\n");
    });
}

void run_diarize(const fs::path& dir, const RunConfig& cfg, const StageOptions& opts) {
    ensure_dir(dir, "diarize");
    const fs::path input = opts.input ? *opts.input : dir / files::mixture;
    require(input, "diarize");
    wrap("diarize", [&] {
        const Diarization d = diarize(read_wav(input), cfg);
        Annotation segs;
        for (std::size_t i = 0; i < d.segments.size(); ++i) {
            Segment s = d.segments[i];
            s.label = "S" + std::to_string(d.state.compact_assignment()[i]);
            segs.push_back(s);
        }
        write_rttm(dir / files::segments, segs, "mixture");
        write_rttm(dir / files::hypothesis, d.hypothesis, "mixture");
        std::ostringstream log;
        write_merge_log_csv(log, d.state);
        write_text(dir / files::merge_log, log.str());
    });
}

void run_identify(const fs::path& dir, const RunConfig& cfg, const StageOptions& opts) {
    ensure_dir(dir, "identify");
    const AudioBuffer mixture = wrap("identify", [&] { return load_mixture(dir, "identify"); });
    require(dir / files::hypothesis, "identify");
    wrap("identify", [&] {
        IdentificationModels models;
        if (opts.models) {
            require(*opts.models, "identify");
            models = load_identification_models(*opts.models);
        } else {
            models = train_identification_models(cfg);
        }
        save_identification_models(dir / files::id_models, models);
        const Annotation hyp = read_rttm(dir / files::hypothesis);
        const FeatureMatrix features = mfcc(mixture, cfg.mfcc);
        const auto scores = score_clusters(hyp, features, models);
        const LabeledClustering mapping = identify_from_scores(scores, cfg.identify);
        write_rttm(dir / files::labeled, apply_labels(hyp, mapping), "mixture");
        json j;
        j["mapping"] = mapping;
        for (const auto& [label, sc] : scores) {
            j["scores"][label] = {{"overlap", sc.overlap}, {"ghatam", sc.ghatam}, {"frames", sc.frames}};
        }
        write_text(dir / files::identification, j.dump(2) + "\n");
    });
}

void run_separate(const fs::path& dir, const RunConfig& cfg, const StageOptions& opts) {
    ensure_dir(dir, "separate");
    const AudioBuffer mixture = wrap("separate", [&] { return load_mixture(dir, "separate"); });
    require(dir / files::labeled, "separate");
    wrap("separate", [&] {
        MaskNetwork net;
        if (opts.net) {
            require(*opts.net, "separate");
            net = load_network(*opts.net);
        } else {
            TrainResult trained = train_separation_network(cfg);
            std::ostringstream csv;
            csv << "epoch,loss\n" << std::setprecision(10);
            for (std::size_t e = 0; e < trained.loss_history.size(); ++e) {
                csv << e + 1 << "," << trained.loss_history[e] << "\n";
            }
            write_text(dir / files::train_loss, csv.str());
            net = std::move(trained.net);
        }
        if (net.input_dim() != cfg.assemble.fft_size / 2 + 1) {
            throw Error("network input size does not match the configured fft size");
        }
        save_network(dir / files::net, net);
        const Annotation labeled = read_rttm(dir / files::labeled);
        const SeparationOutput proposed = assemble_channels(mixture, labeled, net, cfg.assemble);
        write_wav(dir / files::proposed_m, proposed.mridangam);
        write_wav(dir / files::proposed_g, proposed.ghatam);
        const SeparationOutput traditional = separate(net, mixture, cfg.assemble.fft_size, cfg.assemble.hop);
        write_wav(dir / files::traditional_m, traditional.mridangam);
        write_wav(dir / files::traditional_g, traditional.ghatam);
    });
}

ScoreReport run_score(const fs::path& dir, const RunConfig& cfg) {
    for (const char* f : {files::truth, files::hypothesis, files::labeled}) require(dir / f, "score");
    return wrap("score", [&] {
        ScoreReport r;
        const Annotation truth = read_rttm(dir / files::truth);
        const Annotation hyp = read_rttm(dir / files::hypothesis);
        const Annotation labeled = read_rttm(dir / files::labeled);
        r.der = der(truth, hyp, cfg.collar);
        r.purity = purity(truth, hyp);
        r.accuracy = accuracy(truth, labeled);

        const bool separated = fs::exists(dir / files::proposed_m) && fs::exists(dir / files::proposed_g) &&
                               fs::exists(dir / files::traditional_m) && fs::exists(dir / files::traditional_g);
        if (!separated) return r;
        for (const char* f : {files::mixture, files::source_m, files::source_g}) require(dir / f, "score");
        r.has_separation = true;
        const AudioBuffer mixture = read_wav(dir / files::mixture);
        const AudioBuffer src_m = read_wav(dir / files::source_m);
        const AudioBuffer src_g = read_wav(dir / files::source_g);
        const SeparationOutput proposed = read_pair(dir / files::proposed_m, dir / files::proposed_g);
        const SeparationOutput traditional = read_pair(dir / files::traditional_m, dir / files::traditional_g);

        r.overlap_proposed = labeled_gsdr(proposed, src_m, src_g, truth, labels::overlap);
        const auto solo = [&](const SeparationOutput& est) {
            return ScoreReport::Pair{labeled_gsdr(est, src_m, src_g, truth, labels::mridangam).mridangam,
                                     labeled_gsdr(est, src_m, src_g, truth, labels::ghatam).ghatam};
        };
        r.solo_proposed = solo(proposed);
        r.solo_traditional = solo(traditional);

        std::size_t exact = 0;
        for (const SoloRange& s : solo_ranges(mixture, labeled, cfg.assemble)) {
            const auto& ch = s.label == labels::mridangam ? proposed.mridangam.samples : proposed.ghatam.samples;
            for (std::size_t k = s.begin; k < s.end; ++k) exact += ch[k] == mixture.samples[k] ? 1 : 0;
            r.solo_samples += s.end - s.begin;
        }
        r.solo_exact_fraction = r.solo_samples ? static_cast<double>(exact) / static_cast<double>(r.solo_samples) : 1.0;

        if (fs::exists(dir / files::net)) {
            const MaskNetwork net = load_network(dir / files::net);
            const SeparationOutput oracle = assemble_channels(mixture, truth, net, cfg.assemble);
            r.overlap_oracle = labeled_gsdr(oracle, src_m, src_g, truth, labels::overlap);
            r.has_oracle = true;
        }
        return r;
    });
}

}  // namespace tanisep
