#include <algorithm>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "tanisep/features.hpp"
#include "tanisep/onset.hpp"
#include "tanisep/stft.hpp"

using namespace tanisep;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("tanisep_test_" + name);
}

// Decaying noise bursts at the given times.
AudioBuffer bursts(const std::vector<double>& times, double seconds, std::uint64_t seed) {
    const int rate = 44100;
    Rng rng(seed);
    std::vector<double> x(static_cast<std::size_t>(seconds * rate), 0.0);
    for (double t : times) {
        const auto start = static_cast<std::size_t>(t * rate);
        for (std::size_t i = 0; i < static_cast<std::size_t>(0.05 * rate) && start + i < x.size(); ++i) {
            x[start + i] += 0.5 * std::exp(-static_cast<double>(i) / (0.01 * rate)) * rng.uniform(-1.0, 1.0);
        }
    }
    return AudioBuffer(std::move(x), rate);
}

}  // namespace

TEST_CASE("fft matches the direct transform") {
    const auto x = test::random_signal(64, 3);
    std::vector<std::complex<double>> data(x.begin(), x.end());
    fft(data);
    const auto ref = test::naive_dft(x);
    for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(data[k] - ref[k]) < 1e-10);
    fft(data, true);
    for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(data[k].real() - x[k]) < 1e-12);
}

TEST_CASE("stft frame count and argument checks") {
    CHECK(stft_frame_count(4096, 1024, 256) == 13);
    CHECK(stft_frame_count(4100, 1024, 256) == 14);  // zero-padded final frame
    CHECK(stft_frame_count(100, 1024, 256) == 1);
    const AudioBuffer a = test::random_audio(4096, 1);
    CHECK(stft(a).frames() == 13);
    CHECK(stft(a).bins() == 513);
    CHECK_THROWS_AS(stft(AudioBuffer({}, 44100)), Error);
    CHECK_THROWS_AS(stft(a, 1024, 2048), Error);
    CHECK_THROWS_AS(stft(a, 1000, 250), Error);
    Spectrogram s = stft(a, 1024, 768);
    CHECK_THROWS_AS(istft(s), Error);
}

TEST_CASE("stft frames agree with a direct DFT of the windowed frames") {
    const AudioBuffer a = test::random_audio(2048 + 300, 9);
    const int n = 256, hop = 64;
    const Spectrogram s = stft(a, n, hop);
    const auto w = hann_window(static_cast<std::size_t>(n));
    for (Eigen::Index t : {Eigen::Index{0}, Eigen::Index{5}, s.frames() - 1}) {
        std::vector<double> frame(static_cast<std::size_t>(n), 0.0);
        for (int i = 0; i < n; ++i) {
            const std::size_t idx = static_cast<std::size_t>(t * hop + i);
            if (idx < a.size()) frame[static_cast<std::size_t>(i)] = a.samples[idx] * w[static_cast<std::size_t>(i)];
        }
        const auto ref = test::naive_dft(frame);
        for (int k = 0; k <= n / 2; ++k) {
            const auto r = ref[static_cast<std::size_t>(k)];
            CHECK(std::abs(s.magnitudes(t, k) - std::abs(r)) < 1e-10);
            if (std::abs(r) > 1e-6) {
                CHECK(std::abs(std::polar(1.0, s.phases(t, k)) - r / std::abs(r)) < 1e-8);
            }
        }
    }
}

TEST_CASE("periodic hann window") {
    const auto w = hann_window(8);
    CHECK(w[0] == doctest::Approx(0.0));
    CHECK(w[4] == doctest::Approx(1.0));
    CHECK(w[2] == doctest::Approx(0.5));
}

TEST_CASE("all-zero audio gives zero magnitudes and zero reconstruction") {
    const AudioBuffer z(std::vector<double>(5000, 0.0), 44100);
    const Spectrogram s = stft(z);
    CHECK(s.magnitudes.cwiseAbs().maxCoeff() == 0.0);
    const AudioBuffer back = istft(s);
    CHECK(back.size() == z.size());
    CHECK(*std::max_element(back.samples.begin(), back.samples.end()) == 0.0);
}

TEST_CASE("bin-centred tone peaks at its bin") {
    const double f = 32.0 * 44100.0 / 1024.0;
    const Spectrogram s = stft(test::tone(f, 0.5));
    for (Eigen::Index t = 0; t < s.frames() - 1; ++t) {
        Eigen::Index arg = 0;
        s.magnitudes.row(t).maxCoeff(&arg);
        CHECK(arg == 32);
    }
}

TEST_CASE("roundtrip reconstructs the interior") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const AudioBuffer a = test::random_audio(4096, seed);
        const AudioBuffer back = istft(stft(a, 1024, 256));
        REQUIRE(back.size() == a.size());
        const auto [lo, hi] = stft_interior(a.size(), 1024, 256);
        CHECK(lo == 1024);
        CHECK(hi == 4096 - 1024);
        CHECK(test::max_abs_diff(a.samples, back.samples, lo, hi) < 1e-6);
    }
}

TEST_CASE("istft is linear in the magnitudes") {
    const AudioBuffer a = test::random_audio(6000, 4);
    Spectrogram s = stft(a);
    const AudioBuffer one = istft(s);
    s.magnitudes *= 2.0;
    const AudioBuffer two = istft(s);
    for (std::size_t i = 0; i < one.size(); ++i) CHECK(two.samples[i] == doctest::Approx(2.0 * one.samples[i]));
}

TEST_CASE("Parseval per frame") {
    const AudioBuffer a = test::random_audio(8192, 5);
    const int n = 1024, hop = 256;
    const Spectrogram s = stft(a, n, hop);
    const auto w = hann_window(static_cast<std::size_t>(n));
    for (Eigen::Index t = 0; t < s.frames(); ++t) {
        double time_energy = 0.0;
        for (int i = 0; i < n; ++i) {
            const std::size_t idx = static_cast<std::size_t>(t * hop + i);
            const double v = idx < a.size() ? a.samples[idx] * w[static_cast<std::size_t>(i)] : 0.0;
            time_energy += v * v;
        }
        double spec_energy = s.magnitudes(t, 0) * s.magnitudes(t, 0) + s.magnitudes(t, n / 2) * s.magnitudes(t, n / 2);
        for (int k = 1; k < n / 2; ++k) spec_energy += 2.0 * s.magnitudes(t, k) * s.magnitudes(t, k);
        spec_energy /= n;
        CHECK(std::abs(spec_energy - time_energy) / time_energy < 1e-6);
    }
}

// Independent MFCC: direct DFT, mel filters built from the HTK formula, DCT by definition.
std::vector<double> naive_mfcc_frame(const std::vector<double>& x, std::size_t offset, int rate) {
    const std::size_t win = static_cast<std::size_t>(std::lround(0.025 * rate));
    std::size_t nfft = 1;
    while (nfft < win) nfft *= 2;
    std::vector<double> frame(nfft, 0.0);
    for (std::size_t i = 0; i < win; ++i) {
        const std::size_t j = offset + i;
        const double e = j < x.size() ? x[j] - (j > 0 ? 0.97 * x[j - 1] : 0.0) : 0.0;
        const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / win);
        frame[i] = e * hann;
    }
    const auto spec = test::naive_dft(frame);
    auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
    auto imel = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
    const int n_mels = 40;
    std::vector<double> logmel(n_mels);
    for (int m = 0; m < n_mels; ++m) {
        const double top = mel(rate / 2.0);
        const double l = imel(top * m / (n_mels + 1)), c = imel(top * (m + 1) / (n_mels + 1)),
                     r = imel(top * (m + 2) / (n_mels + 1));
        double acc = 0.0;
        for (std::size_t k = 0; k <= nfft / 2; ++k) {
            const double f = static_cast<double>(k) * rate / static_cast<double>(nfft);
            double wgt = 0.0;
            if (f > l && f <= c) wgt = (f - l) / (c - l);
            if (f > c && f < r) wgt = (r - f) / (r - c);
            acc += wgt * std::norm(spec[k]);
        }
        logmel[static_cast<std::size_t>(m)] = std::log(std::max(acc, 1e-10));
    }
    std::vector<double> out;
    for (int k = 1; k <= 19; ++k) {
        double acc = 0.0;
        for (int m = 0; m < n_mels; ++m) {
            acc += logmel[static_cast<std::size_t>(m)] * std::cos(std::numbers::pi * k * (2 * m + 1) / (2.0 * n_mels));
        }
        out.push_back(acc * std::sqrt(2.0 / n_mels));
    }
    return out;
}

TEST_CASE("mfcc matches an independent implementation") {
    const int rate = 16000;
    const AudioBuffer a(test::random_signal(4000, 6), rate);
    const FeatureMatrix f = mfcc(a);
    CHECK(f.cols() == 19);
    const std::size_t hop = 160;
    CHECK(f.rows() == static_cast<Eigen::Index>((4000 - 400) / hop + 1));
    for (Eigen::Index t : {Eigen::Index{0}, Eigen::Index{7}, f.rows() - 1}) {
        const auto ref = naive_mfcc_frame(a.samples, static_cast<std::size_t>(t) * hop, rate);
        for (int k = 0; k < 19; ++k) CHECK(f.values(t, k) == doctest::Approx(ref[static_cast<std::size_t>(k)]).epsilon(1e-8));
        CHECK(f.frame_times[static_cast<std::size_t>(t)] == doctest::Approx((t * 160.0 + 200.0) / rate));
    }
}

TEST_CASE("mfcc properties") {
    SUBCASE("silence gives identical frames") {
        const FeatureMatrix f = mfcc(AudioBuffer(std::vector<double>(44100, 0.0), 44100));
        for (Eigen::Index t = 1; t < f.rows(); ++t) CHECK((f.values.row(t) - f.values.row(0)).norm() == 0.0);
    }
    SUBCASE("amplitude scaling only moves c0") {
        const AudioBuffer a = test::random_audio(22050, 8);
        AudioBuffer b = a;
        for (double& v : b.samples) v *= 3.7;
        CHECK((mfcc(a).values - mfcc(b).values).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("noise and tone are further apart than two noise runs") {
        auto mean_of = [](const AudioBuffer& x) { return Eigen::VectorXd(mfcc(x).values.colwise().mean()); };
        const auto n1 = mean_of(test::random_audio(44100, 11));
        const auto n2 = mean_of(test::random_audio(44100, 12));
        const auto t = mean_of(test::tone(200.0, 1.0));
        CHECK((n1 - t).norm() > (n1 - n2).norm());
    }
    SUBCASE("argument checks") {
        MfccConfig cfg;
        cfg.n_coeffs = 41;
        CHECK_THROWS_AS(mfcc(test::random_audio(1000, 1), cfg), Error);
        CHECK_THROWS_AS(mfcc(AudioBuffer(test::random_signal(1000, 1), 4000)), Error);
    }
}

TEST_CASE("onset detection") {
    SUBCASE("silence") {
        CHECK(detect_onsets(AudioBuffer(std::vector<double>(44100, 0.0), 44100)).empty());
    }
    SUBCASE("ten bursts 200 ms apart") {
        std::vector<double> truth;
        for (int i = 0; i < 10; ++i) truth.push_back(0.3 + 0.2 * i);
        const OnsetList o = detect_onsets(bursts(truth, 2.6, 5), 256, 1.5);
        REQUIRE(o.size() == truth.size());
        for (std::size_t i = 0; i < truth.size(); ++i) CHECK(std::abs(o.times[i] - truth[i]) <= 0.02);
    }
    SUBCASE("single impulse") {
        const OnsetList o = detect_onsets(bursts({0.5}, 1.0, 6));
        REQUIRE(o.size() == 1);
        CHECK(o.times[0] >= 0.48);
        CHECK(o.times[0] <= 0.52);
    }
    SUBCASE("strictly increasing and bounded by the frame count") {
        const AudioBuffer a = test::random_audio(44100, 13);
        const OnsetList o = detect_onsets(a);
        for (std::size_t i = 1; i < o.size(); ++i) CHECK(o.times[i] > o.times[i - 1]);
        CHECK(o.size() <= spectral_flux(a, 1024, 256).size());
        for (double t : o.times) CHECK(t <= a.duration());
    }
    SUBCASE("too short") { CHECK_THROWS_AS(detect_onsets(test::random_audio(1000, 1)), Error); }
}

TEST_CASE("wav roundtrip") {
    const AudioBuffer a = test::random_audio(1000, 21, 22050);
    const auto p = temp_path("float.wav");
    write_wav(p, a);
    const AudioBuffer f = read_wav(p);
    CHECK(f.sample_rate == 22050);
    REQUIRE(f.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(f.samples[i] == static_cast<double>(static_cast<float>(a.samples[i])));

    const auto q = temp_path("pcm.wav");
    write_wav(q, a, WavFormat::pcm16);
    const AudioBuffer g = read_wav(q);
    REQUIRE(g.size() == a.size());
    CHECK(test::max_abs_diff(g.samples, a.samples, 0, a.size()) <= 1.0 / 32768.0);

    // Patch the channel count to two: the reader must refuse it.
    {
        std::fstream fs(q, std::ios::in | std::ios::out | std::ios::binary);
        fs.seekp(22);
        const char two[2] = {2, 0};
        fs.write(two, 2);
    }
    CHECK_THROWS_AS(read_wav(q), Error);
    CHECK_THROWS_AS(read_wav(temp_path("does_not_exist.wav")), Error);
    std::filesystem::remove(p);
    std::filesystem::remove(q);
}

TEST_CASE("audio buffer validation") {
    CHECK_THROWS_AS(AudioBuffer({0.0}, 0), Error);
    CHECK_THROWS_AS(AudioBuffer({std::nan("")}, 44100), Error);
}
