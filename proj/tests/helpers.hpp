#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "tanisep/audio.hpp"
#include "tanisep/rng.hpp"

namespace test {

inline std::vector<double> random_signal(std::size_t n, std::uint64_t seed, double scale = 0.5) {
    tanisep::Rng rng(seed);
    std::vector<double> x(n);
    for (double& v : x) v = scale * rng.uniform(-1.0, 1.0);
    return x;
}

inline tanisep::AudioBuffer random_audio(std::size_t n, std::uint64_t seed, int rate = 44100) {
    return tanisep::AudioBuffer(random_signal(n, seed), rate);
}

inline tanisep::AudioBuffer tone(double freq, double seconds, int rate = 44100, double amp = 0.5) {
    std::vector<double> x(static_cast<std::size_t>(seconds * rate));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * freq * i / rate);
    return tanisep::AudioBuffer(std::move(x), rate);
}

// Textbook O(N^2) DFT.
inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double a = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
            acc += x[t] * std::complex<double>(std::cos(a), std::sin(a));
        }
        out[k] = acc;
    }
    return out;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b, std::size_t lo,
                           std::size_t hi) {
    double m = 0.0;
    for (std::size_t i = lo; i < hi; ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace test
