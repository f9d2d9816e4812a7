// Command-line front end: synth, diarize, identify, separate, score, run-all.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tanisep/pipeline.hpp"

namespace fs = std::filesystem;
using namespace tanisep;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCiFailure = 1;
constexpr int kExitUsage = 2;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<double> beta, nmi_threshold, seg_len, collar, gamma;
    std::optional<int> max_clusters, min_strokes, epochs;
};

struct Options {
    fs::path work_dir = "work";
    std::optional<fs::path> config;
    std::optional<fs::path> input, models, net;
    std::optional<fs::path> emit_csv;
    bool ci = false;
    Overrides o;
};

RunConfig resolve_config(const Options& opt) {
    RunConfig cfg = opt.config ? load_run_config(*opt.config) : RunConfig{};
    const Overrides& o = opt.o;
    if (o.seed) cfg.synth.seed = *o.seed;
    if (o.mode) cfg.mode = segmentation_mode_from_string(*o.mode);
    if (o.beta) cfg.ib.beta = *o.beta;
    if (o.nmi_threshold) cfg.ib.nmi_threshold = *o.nmi_threshold;
    if (o.max_clusters) cfg.ib.max_clusters = *o.max_clusters;
    if (o.seg_len) cfg.seg_len = *o.seg_len;
    if (o.min_strokes) cfg.min_strokes = *o.min_strokes;
    if (o.collar) cfg.collar = *o.collar;
    if (o.gamma) cfg.train.gamma = *o.gamma;
    if (o.epochs) cfg.train.epochs = *o.epochs;
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* cmd, Options& opt) {
    cmd->add_option("-w,--work-dir", opt.work_dir, "Directory holding all artifacts")->capture_default_str();
    cmd->add_option("-c,--config", opt.config, "JSON run configuration");
}

void add_diarize_flags(CLI::App* cmd, Options& opt) {
    cmd->add_option("--mode", opt.o.mode, "Segmentation: fixed or strokes")->check(CLI::IsMember({"fixed", "strokes"}));
    cmd->add_option("--beta", opt.o.beta, "Information bottleneck trade-off");
    cmd->add_option("--nmi-threshold", opt.o.nmi_threshold, "Stop merging below this normalised information");
    cmd->add_option("--max-clusters", opt.o.max_clusters, "Cluster count to reach");
    cmd->add_option("--seg-len", opt.o.seg_len, "Fixed segment length in seconds");
    cmd->add_option("--min-strokes", opt.o.min_strokes, "Strokes per initial segment");
}

void add_score_flags(CLI::App* cmd, Options& opt) {
    cmd->add_option("--collar", opt.o.collar, "Forgiveness collar in seconds");
    cmd->add_option("--emit-csv", opt.emit_csv, "Also write the scores as CSV to this path");
    cmd->add_flag("--ci", opt.ci, "Exit with status 1 when the scores miss the configured thresholds");
}

int report(const fs::path& dir, const RunConfig& cfg, const Options& opt) {
    const ScoreReport r = run_score(dir, cfg);
    print_report(std::cout, r, cfg.collar);
    std::ostringstream csv;
    write_scores_csv(csv, r);
    {
        std::ofstream out(dir / files::scores, std::ios::binary | std::ios::trunc);
        if (!out) throw StageError("score", "cannot write " + (dir / files::scores).string());
        out << csv.str();
    }
    if (opt.emit_csv) {
        std::ofstream out(*opt.emit_csv, std::ios::binary | std::ios::trunc);
        if (!out) throw StageError("score", "cannot write " + opt.emit_csv->string());
        out << csv.str();
    }
    if (opt.ci) {
        bool ok = r.der.der < cfg.ci_max_der;
        if (r.has_separation) ok = ok && r.solo_exact_fraction == 1.0;
        if (!ok) {
            std::cerr << "ci: scores outside thresholds\n";
            return kExitCiFailure;
        }
    }
    return kExitOk;
}

StageOptions stage_options(const Options& opt) { return {opt.input, opt.models, opt.net}; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diarization-driven separation of two percussion voices"};
    app.require_subcommand(1);
    Options opt;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic two-voice recording with ground truth");
    add_common(synth, opt);
    synth->add_option("--seed", opt.o.seed, "Seed of the generated recording");

    auto* diar = app.add_subcommand("diarize", "Cluster the mixture into solo and overlapped regions");
    add_common(diar, opt);
    diar->add_option("-i,--input", opt.input, "Mixture WAV (default: <work-dir>/mixture.wav)");
    add_diarize_flags(diar, opt);

    auto* ident = app.add_subcommand("identify", "Label clusters as MRIDANGAM, GHATAM or OVERLAP");
    add_common(ident, opt);
    ident->add_option("--models", opt.models, "Pretrained identification models (trained on synthetic data otherwise)");

    auto* sep = app.add_subcommand("separate", "Separate overlapped regions and assemble both channels");
    add_common(sep, opt);
    sep->add_option("--net", opt.net, "Pretrained separation network (trained on synthetic data otherwise)");
    sep->add_option("--epochs", opt.o.epochs, "Training epochs");
    sep->add_option("--gamma", opt.o.gamma, "Weight of the discriminative loss term");

    auto* score = app.add_subcommand("score", "Print DER, purity/accuracy and GSDR tables");
    add_common(score, opt);
    add_score_flags(score, opt);

    auto* all = app.add_subcommand("run-all", "Run every stage in sequence");
    add_common(all, opt);
    all->add_option("--seed", opt.o.seed, "Seed of the generated recording");
    add_diarize_flags(all, opt);
    all->add_option("--models", opt.models, "Pretrained identification models");
    all->add_option("--net", opt.net, "Pretrained separation network");
    all->add_option("--epochs", opt.o.epochs, "Training epochs");
    all->add_option("--gamma", opt.o.gamma, "Weight of the discriminative loss term");
    add_score_flags(all, opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        const RunConfig cfg = resolve_config(opt);
        const fs::path& dir = opt.work_dir;
        if (synth->parsed()) {
            run_synth(dir, cfg);
        } else if (diar->parsed()) {
            run_diarize(dir, cfg, stage_options(opt));
        } else if (ident->parsed()) {
            run_identify(dir, cfg, stage_options(opt));
        } else if (sep->parsed()) {
            run_separate(dir, cfg, stage_options(opt));
        } else if (score->parsed()) {
            return report(dir, cfg, opt);
        } else if (all->parsed()) {
            run_synth(dir, cfg);
            {
                std::ofstream out(dir / files::config, std::ios::binary | std::ios::trunc);
                if (!out) throw StageError("run-all", "cannot write " + (dir / files::config).string());
                out << to_json(cfg).dump(2) << "\n";
            }
            run_diarize(dir, cfg, stage_options(opt));
            run_identify(dir, cfg, stage_options(opt));
            run_separate(dir, cfg, stage_options(opt));
            return report(dir, cfg, opt);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitOk;
}
