#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"
#include "tanisep/metrics.hpp"
#include "tanisep/pipeline.hpp"
#include "tanisep/separation.hpp"

using namespace tanisep;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(lo, hi);
    }
    return m;
}

MaskNetwork small_net(int input_dim, std::uint64_t seed, std::vector<int> hidden = {8, 8}) {
    NetworkShape shape;
    shape.input_dim = input_dim;
    shape.hidden = std::move(hidden);
    return MaskNetwork(shape, seed);
}

MaskFunction constant_masks(double m) {
    return [m](const Eigen::MatrixXd& mag) {
        return MaskPair{Eigen::MatrixXd::Constant(mag.rows(), mag.cols(), m),
                        Eigen::MatrixXd::Constant(mag.rows(), mag.cols(), 1.0 - m)};
    };
}

double rms(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    return test::max_abs_diff(a, b, 0, a.size());
}

std::vector<double> sum_of(const SeparationOutput& s) {
    std::vector<double> out(s.mridangam.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s.mridangam.samples[i] + s.ghatam.samples[i];
    return out;
}

SynthOutput overlap_only(std::uint64_t seed, double seconds) {
    SynthSpec spec;
    spec.seed = seed;
    spec.plan = {{SectionKind::overlap, seconds}};
    return generate(spec);
}

}  // namespace

TEST_CASE("network shape and parameter count") {
    const MaskNetwork net = small_net(5, 1, {8, 4});
    CHECK(net.layers() == 2);
    CHECK(net.params().size() == 10);
    // 8*5+8*8+8 + 4*8+4*4+4 + 2*(5*4+5)
    CHECK(net.parameter_count() == 112 + 52 + 50);
    const MaskNetwork full(NetworkShape{}, 1);
    CHECK(full.input_dim() == 513);
    CHECK(full.params()[0].rows() == 500);
}

TEST_CASE("masks partition unity and stay in range") {
    Rng rng(2);
    const MaskNetwork net = small_net(9, 3);
    const MaskPair m = forward(net, random_matrix(rng, 40, 9, 0.0, 3.0));
    CHECK(m.mask_m.rows() == 40);
    CHECK(m.mask_m.cols() == 9);
    CHECK(((m.mask_m + m.mask_g).array() - 1.0).abs().maxCoeff() < 1e-6);
    CHECK(m.mask_m.minCoeff() >= 0.0);
    CHECK(m.mask_m.maxCoeff() <= 1.0);
    CHECK_THROWS_AS(forward(net, random_matrix(rng, 40, 8, 0.0, 1.0)), Error);
}

TEST_CASE("zeroed output heads give half masks") {
    Rng rng(4);
    MaskNetwork net = small_net(6, 5);
    for (int h = 0; h < 2; ++h) {
        net.head_weights(h).setZero();
        net.head_bias(h).setZero();
    }
    const MaskPair m = forward(net, random_matrix(rng, 10, 6, 0.0, 1.0));
    CHECK((m.mask_m.array() - 0.5).abs().maxCoeff() < 1e-12);
    CHECK((m.mask_g.array() - 0.5).abs().maxCoeff() < 1e-12);
}

TEST_CASE("recurrent state carries information forward in time only") {
    Rng rng(6);
    const MaskNetwork net = small_net(6, 7);
    const Eigen::MatrixXd x = random_matrix(rng, 20, 6, -1.0, 1.0);
    const MaskPair base = forward_cached(net, x).masks;

    MaskNetwork ablated = net;
    for (int l = 0; l < ablated.layers(); ++l) ablated.recurrent_weights(l).setZero();
    const MaskPair frame_independent = forward_cached(ablated, x).masks;
    CHECK((base.mask_m.row(0) - frame_independent.mask_m.row(0)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((base.mask_m - frame_independent.mask_m).cwiseAbs().maxCoeff() > 1e-6);

    Eigen::MatrixXd changed = x;
    changed.row(10).setConstant(2.0);
    const MaskPair after = forward_cached(net, changed).masks;
    CHECK((after.mask_m.topRows(10) - base.mask_m.topRows(10)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((after.mask_m.bottomRows(10) - base.mask_m.bottomRows(10)).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("input normalisation") {
    Rng rng(8);
    const Eigen::MatrixXd n = normalize_input(random_matrix(rng, 30, 4, 0.0, 5.0));
    CHECK(n.rows() == 30);
    CHECK(n.cols() == 4);
    CHECK(std::abs(n.mean()) < 1e-12);
    CHECK(std::sqrt(n.array().square().mean()) == doctest::Approx(1.0));
}

TEST_CASE("discriminative loss examples") {
    Rng rng(9);
    const Eigen::MatrixXd ym = random_matrix(rng, 7, 5, 0.0, 1.0), yg = random_matrix(rng, 7, 5, 0.0, 1.0);
    const double d2 = (ym - yg).squaredNorm() / 35.0;
    CHECK(discriminative_loss(ym, yg, ym, yg, 0.08) == doctest::Approx(-2.0 * 0.08 * d2));
    CHECK(discriminative_loss(yg, ym, ym, yg, 0.0) == doctest::Approx(2.0 * d2));
    CHECK(discriminative_loss(yg, ym, ym, yg, 0.08) == doctest::Approx(2.0 * d2));
    CHECK_THROWS_AS(discriminative_loss(ym, yg, ym, yg.topRows(3), 0.08), Error);
}

TEST_CASE("loss gradient with respect to the masks") {
    Rng rng(10);
    const Eigen::MatrixXd mix = random_matrix(rng, 6, 4, 0.5, 2.0);
    const Eigen::MatrixXd ym = random_matrix(rng, 6, 4, 0.0, 1.0), yg = random_matrix(rng, 6, 4, 0.0, 1.0);
    MaskPair m{random_matrix(rng, 6, 4, 0.0, 1.0), Eigen::MatrixXd()};
    m.mask_g = 1.0 - m.mask_m.array();
    const LossGrad g = mask_loss_grad(m, mix, ym, yg, 0.08);
    CHECK(g.loss == doctest::Approx(discriminative_loss(m.mask_m.cwiseProduct(mix), m.mask_g.cwiseProduct(mix), ym,
                                                        yg, 0.08)));
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < m.mask_m.size(); ++i) {
        for (int which = 0; which < 2; ++which) {
            MaskPair up = m, down = m;
            (which == 0 ? up.mask_m : up.mask_g)(i) += h;
            (which == 0 ? down.mask_m : down.mask_g)(i) -= h;
            const double numeric = (mask_loss_grad(up, mix, ym, yg, 0.08).loss -
                                    mask_loss_grad(down, mix, ym, yg, 0.08).loss) / (2.0 * h);
            const double analytic = (which == 0 ? g.d_mask_m : g.d_mask_g)(i);
            CHECK(std::abs(numeric - analytic) < 1e-8);
        }
    }

    // From swapped estimates, a small step against the gradient moves toward the truth.
    const Eigen::MatrixXd src_m = random_matrix(rng, 6, 4, 0.1, 1.0), src_g = random_matrix(rng, 6, 4, 0.1, 1.0);
    const Eigen::MatrixXd total = src_m + src_g;
    MaskPair swapped{src_g.cwiseQuotient(total), src_m.cwiseQuotient(total)};
    const LossGrad sg = mask_loss_grad(swapped, total, src_m, src_g, 0.08);
    MaskPair stepped{swapped.mask_m - 0.1 * sg.d_mask_m, swapped.mask_g - 0.1 * sg.d_mask_g};
    CHECK(mask_loss_grad(stepped, total, src_m, src_g, 0.08).loss < sg.loss);
}

TEST_CASE("backpropagation matches central finite differences on a 2x8 network") {
    Rng rng(12);
    const int bins = 5, frames = 9;
    MaskNetwork net = small_net(bins, 13);
    const Eigen::MatrixXd x = random_matrix(rng, frames, bins, -1.5, 1.5);
    const Eigen::MatrixXd mix = random_matrix(rng, frames, bins, 0.5, 2.0);
    const Eigen::MatrixXd ym = random_matrix(rng, frames, bins, 0.0, 1.0);
    const Eigen::MatrixXd yg = random_matrix(rng, frames, bins, 0.0, 1.0);
    auto loss_of = [&](const MaskNetwork& n) { return mask_loss_grad(forward_cached(n, x).masks, mix, ym, yg, 0.08); };

    const ForwardCache cache = forward_cached(net, x);
    const LossGrad lg = mask_loss_grad(cache.masks, mix, ym, yg, 0.08);
    const std::vector<Eigen::MatrixXd> grads = backward(net, cache, lg.d_mask_m, lg.d_mask_g);
    REQUIRE(grads.size() == net.params().size());
    const auto names = net.param_names();
    const double h = 1e-3;
    for (std::size_t p = 0; p < grads.size(); ++p) {
        Eigen::MatrixXd numeric(grads[p].rows(), grads[p].cols());
        for (Eigen::Index i = 0; i < numeric.size(); ++i) {
            const double saved = net.params()[p](i);
            net.params()[p](i) = saved + h;
            const double up = loss_of(net).loss;
            net.params()[p](i) = saved - h;
            const double down = loss_of(net).loss;
            net.params()[p](i) = saved;
            numeric(i) = (up - down) / (2.0 * h);
        }
        const double scale = std::max({grads[p].norm(), numeric.norm(), 1e-12});
        const double rel = (grads[p] - numeric).norm() / scale;
        INFO(names[p] << " relative error " << rel);
        CHECK(rel < 1e-4);
    }
}

TEST_CASE("training is deterministic and reduces the loss") {
    const SynthOutput s = overlap_only(3, 1.0);
    const std::vector<TrainingPair> pairs = {{s.mixture, s.track_a, s.track_b}};
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.sequence_len = 20;
    const TrainResult a = train(small_net(513, 1, {16}), pairs, cfg);
    const TrainResult b = train(small_net(513, 1, {16}), pairs, cfg);
    REQUIRE(a.loss_history.size() == 6);
    CHECK(a.loss_history == b.loss_history);
    CHECK(a.net.params() == b.net.params());
    CHECK(a.loss_history.back() < a.loss_history.front());

    int calls = 0;
    const TrainResult stopped = train(small_net(513, 1, {16}), pairs, cfg, [&](int epoch, const MaskNetwork&, double) {
        ++calls;
        return epoch < 2;
    });
    CHECK(calls == 2);
    CHECK(stopped.loss_history.size() == 2);
}

TEST_CASE("training input validation") {
    const SynthOutput s = overlap_only(3, 0.5);
    TrainConfig cfg;
    const std::vector<TrainingPair> empty;
    CHECK_THROWS_AS(train(small_net(513, 1, {4}), empty, cfg), Error);
    const AudioBuffer short_src(std::vector<double>(s.track_a.samples.begin(), s.track_a.samples.end() - 10), 44100);
    const std::vector<TrainingPair> misaligned = {{s.mixture, short_src, s.track_b}};
    CHECK_THROWS_AS(train(small_net(513, 1, {4}), misaligned, cfg), Error);
    const std::vector<TrainingPair> pairs = {{s.mixture, s.track_a, s.track_b}};
    CHECK_THROWS_AS(train(small_net(100, 1, {4}), pairs, cfg), Error);
    cfg.gamma = -0.1;
    CHECK_THROWS_AS(train(small_net(513, 1, {4}), pairs, cfg), Error);
}

TEST_CASE("forced masks pass the mixture through") {
    const AudioBuffer mix = test::random_audio(20000, 14);
    const SeparationOutput pass = apply_masks(mix, constant_masks(1.0));
    REQUIRE(pass.mridangam.size() == mix.size());
    CHECK(pass.mridangam.sample_rate == mix.sample_rate);
    CHECK(rms(pass.mridangam.samples, mix.samples) < 1e-5);
    CHECK(max_diff(pass.mridangam.samples, mix.samples) < 1e-5);
    CHECK(*std::max_element(pass.ghatam.samples.begin(), pass.ghatam.samples.end()) < 1e-12);

    const SeparationOutput half = apply_masks(mix, constant_masks(0.5));
    CHECK(max_diff(sum_of(half), mix.samples) < 1e-5);
    CHECK(max_diff(half.mridangam.samples, half.ghatam.samples) < 1e-12);
}

TEST_CASE("separate output is additive for a network") {
    const AudioBuffer mix = test::random_audio(15000, 15);
    const SeparationOutput out = separate(small_net(513, 2, {8}), mix);
    CHECK(out.mridangam.size() == mix.size());
    CHECK(rms(sum_of(out), mix.samples) < 1e-4);
}

TEST_CASE("assembly of solo-only and overlap-only annotations") {
    const AudioBuffer mix = test::random_audio(44100, 16);
    const Annotation solo({{0.0, 1.0, labels::mridangam}});
    const SeparationOutput a = assemble_channels(mix, solo, constant_masks(0.3));
    CHECK(a.mridangam.samples == mix.samples);
    CHECK(std::all_of(a.ghatam.samples.begin(), a.ghatam.samples.end(), [](double v) { return v == 0.0; }));

    const Annotation ghatam({{0.0, 1.0, labels::ghatam}});
    const SeparationOutput g = assemble_channels(mix, ghatam, constant_masks(0.3));
    CHECK(g.ghatam.samples == mix.samples);

    const MaskNetwork net = small_net(513, 3, {8});
    const SeparationOutput whole = assemble_channels(mix, Annotation({{0.0, 1.0, labels::overlap}}), net);
    const SeparationOutput direct = separate(net, mix);
    CHECK(max_diff(whole.mridangam.samples, direct.mridangam.samples) < 1e-12);
    CHECK(max_diff(whole.ghatam.samples, direct.ghatam.samples) < 1e-12);
}

TEST_CASE("assembly keeps solo regions exact outside crossfades") {
    const SynthOutput s = [] {
        SynthSpec spec;
        spec.seed = 17;
        spec.plan = {{SectionKind::voice_a_solo, 1.0}, {SectionKind::overlap, 1.0}, {SectionKind::voice_b_solo, 1.0},
                     {SectionKind::voice_a_solo, 0.5}};
        return generate(spec);
    }();
    const SeparationOutput out = assemble_channels(s.mixture, s.truth, small_net(513, 4, {8}));
    const std::vector<SoloRange> ranges = solo_ranges(s.mixture, s.truth);
    REQUIRE(ranges.size() == 3);
    const auto xf = static_cast<std::size_t>(std::llround(0.005 * 44100));
    CHECK(ranges[0].begin == 0);
    CHECK(ranges[0].end == 44100 - xf);
    CHECK(ranges[1].begin == 2 * 44100 + xf);
    CHECK(ranges[1].end == 3 * 44100 - xf);
    CHECK(ranges[2].end == s.mixture.size());
    for (const SoloRange& r : ranges) {
        const auto& active = r.label == labels::mridangam ? out.mridangam : out.ghatam;
        const auto& silent = r.label == labels::mridangam ? out.ghatam : out.mridangam;
        for (std::size_t i = r.begin; i < r.end; ++i) {
            REQUIRE(active.samples[i] == s.mixture.samples[i]);
            REQUIRE(silent.samples[i] == 0.0);
        }
    }
    // Mask partition survives the crossfades.
    CHECK(rms(sum_of(out), s.mixture.samples) < 1e-4);
    CHECK(max_diff(sum_of(out), s.mixture.samples) < 1e-4);
}

TEST_CASE("assembly errors") {
    const AudioBuffer mix = test::random_audio(44100, 18);
    const MaskFunction half = constant_masks(0.5);
    CHECK_THROWS_AS(assemble_channels(mix, Annotation({{0.0, 0.4, labels::mridangam}, {0.5, 1.0, labels::ghatam}}),
                                      half),
                    Error);
    CHECK_THROWS_AS(assemble_channels(mix, Annotation({{0.0, 0.5, labels::mridangam}}), half), Error);
    CHECK_THROWS_AS(assemble_channels(mix, Annotation({{0.0, 1.0, "C0"}}), half), Error);
    CHECK_THROWS_AS(assemble_channels(mix, Annotation({{0.0, 1.0, std::nullopt}}), half), Error);
}

TEST_CASE("network json roundtrip") {
    const MaskNetwork net = small_net(7, 19);
    const auto path = std::filesystem::temp_directory_path() / "tanisep_test_net.json";
    save_network(path, net);
    const MaskNetwork back = load_network(path);
    CHECK(back.shape().hidden == net.shape().hidden);
    CHECK(back.params() == net.params());
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_network(path), Error);
    nlohmann::json j = to_json(net);
    j["params"][0]["rows"] = 3;
    CHECK_THROWS_AS(mask_network_from_json(j), Error);
}

TEST_CASE("a trained network beats the half-mask baseline") {
    const SynthOutput s = overlap_only(21, 2.0);
    const std::vector<TrainingPair> pairs = {{s.mixture, s.track_a, s.track_b}};
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.learning_rate = 0.3;
    const TrainResult r = train(small_net(513, 5, {128}), pairs, cfg);
    const SeparationOutput est = separate(r.net, s.mixture);
    const SeparationOutput base = apply_masks(s.mixture, constant_masks(0.5));
    const double m = sdr(est.mridangam, s.track_a), g = sdr(est.ghatam, s.track_b);
    const double bm = sdr(base.mridangam, s.track_a), bg = sdr(base.ghatam, s.track_b);
    INFO("trained " << m << " / " << g << " baseline " << bm << " / " << bg);
    CHECK(m > bm);
    CHECK(g > bg);
}
