#include "doctest.h"
#include "tanisep/features.hpp"
#include "tanisep/synth.hpp"

using namespace tanisep;

TEST_CASE("small plan") {
    SynthSpec spec;
    spec.seed = 4;
    spec.plan = {{SectionKind::voice_a_solo, 4.0}, {SectionKind::voice_b_solo, 4.0}, {SectionKind::overlap, 2.0}};
    const SynthOutput out = generate(spec);
    CHECK(out.mixture.size() == 10 * 44100);
    CHECK(out.mixture.duration() == doctest::Approx(10.0));
    REQUIRE(out.truth.size() == 3);
    CHECK(out.truth.segments()[0].label == "MRIDANGAM");
    CHECK(out.truth.segments()[1].label == "GHATAM");
    CHECK(out.truth.segments()[2].label == "OVERLAP");
    for (std::size_t i = 0; i < 4 * 44100; ++i) REQUIRE(out.track_b.samples[i] == 0.0);
    for (std::size_t i = 4 * 44100; i < 8 * 44100; ++i) REQUIRE(out.track_a.samples[i] == 0.0);
    for (std::size_t i = 0; i < out.mixture.size(); ++i) {
        REQUIRE(out.mixture.samples[i] == out.track_a.samples[i] + out.track_b.samples[i]);
    }
    for (double t : out.onsets_a.times) CHECK((t < 4.0 || t >= 8.0));
    for (double t : out.onsets_b.times) CHECK(t >= 4.0);
    CHECK(out.onsets_a.size() > 20);
    CHECK(out.onsets_b.size() > 20);
}

TEST_CASE("same seed gives identical output, other seeds differ") {
    SynthSpec spec;
    spec.plan = {{SectionKind::overlap, 3.0}};
    const SynthOutput a = generate(spec), b = generate(spec);
    CHECK(a.mixture.samples == b.mixture.samples);
    spec.seed = 2;
    CHECK(generate(spec).mixture.samples != a.mixture.samples);
}

TEST_CASE("default plan proportions") {
    SynthSpec spec;
    CHECK(spec.duration() == doctest::Approx(150.0));
    double a = 0, b = 0, o = 0;
    for (const auto& s : spec.plan) {
        (s.kind == SectionKind::voice_a_solo ? a : s.kind == SectionKind::voice_b_solo ? b : o) += s.duration;
    }
    CHECK(a / 150.0 == doctest::Approx(0.48));
    CHECK(b / 150.0 == doctest::Approx(0.34));
    CHECK(o / 150.0 == doctest::Approx(0.18));
    CHECK(spec.plan.back().kind == SectionKind::overlap);
}

TEST_CASE("voices are separable in MFCC space") {
    SynthSpec spec;
    spec.seed = 9;
    spec.plan = {{SectionKind::voice_a_solo, 10.0}, {SectionKind::voice_b_solo, 10.0}};
    const SynthOutput out = generate(spec);
    const FeatureMatrix f = mfcc(out.mixture);
    std::vector<Eigen::Index> ra, rb;
    for (Eigen::Index r = 0; r < f.rows(); ++r) (f.frame_times[static_cast<std::size_t>(r)] < 10.0 ? ra : rb).push_back(r);
    const Eigen::MatrixXd xa = f.select_rows(ra).values, xb = f.select_rows(rb).values;
    const Eigen::RowVectorXd ma = xa.colwise().mean(), mb = xb.colwise().mean();
    auto spread = [](const Eigen::MatrixXd& x, const Eigen::RowVectorXd& m) {
        return std::sqrt((x.rowwise() - m).rowwise().squaredNorm().mean());
    };
    const double within = std::max(spread(xa, ma), spread(xb, mb));
    CHECK((ma - mb).norm() >= 5.0 * within);
}

TEST_CASE("spec validation and json") {
    SynthSpec spec;
    spec.plan.clear();
    CHECK_THROWS_AS(generate(spec), Error);
    spec.plan = {{SectionKind::overlap, -1.0}};
    CHECK_THROWS_AS(spec.validate(), Error);

    SynthSpec s;
    s.seed = 77;
    s.plan = {{SectionKind::voice_b_solo, 2.5}};
    const SynthSpec back = synth_spec_from_json(to_json(s));
    CHECK(back.seed == 77);
    REQUIRE(back.plan.size() == 1);
    CHECK(back.plan[0].kind == SectionKind::voice_b_solo);
    CHECK(back.plan[0].duration == 2.5);
    CHECK_THROWS_AS(section_kind_from_string("DRUM"), Error);
}
