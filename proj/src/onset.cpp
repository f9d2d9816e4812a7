#include "tanisep/onset.hpp"

#include <algorithm>
#include <cmath>

#include "tanisep/stft.hpp"

namespace tanisep {

namespace {

// Log compression keeps quiet strokes visible next to loud ones.
constexpr double kCompression = 100.0;

double median_of(std::vector<double>& v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

}  // namespace

std::vector<double> spectral_flux(const AudioBuffer& audio, int fft_size, int hop) {
    const Spectrogram spec = stft(audio, fft_size, hop);
    const Eigen::MatrixXd compressed = (spec.magnitudes.array() * kCompression).log1p().matrix();
    std::vector<double> flux(static_cast<std::size_t>(spec.frames()), 0.0);
    for (Eigen::Index t = 1; t < spec.frames(); ++t) {
        flux[static_cast<std::size_t>(t)] =
            (compressed.row(t) - compressed.row(t - 1)).array().max(0.0).sum();
    }
    return flux;
}

OnsetList detect_onsets(const AudioBuffer& audio, const OnsetConfig& cfg) {
    if (audio.size() <= static_cast<std::size_t>(cfg.fft_size)) {
        throw Error("detect_onsets: audio must be longer than one analysis frame");
    }
    const std::vector<double> flux = spectral_flux(audio, cfg.fft_size, cfg.hop);
    const std::size_t n = flux.size();
    const double frame_sec = static_cast<double>(cfg.hop) / audio.sample_rate;
    const auto half_window = static_cast<std::size_t>(std::max(1.0, std::round(0.5 * cfg.window_sec / frame_sec)));
    const auto radius = static_cast<std::size_t>(std::max(cfg.peak_radius, 1));
    const double floor = cfg.relative_floor * *std::max_element(flux.begin(), flux.end());

    OnsetList out;
    if (floor <= 0.0) return out;

    std::vector<double> scratch;
    double last_value = 0.0;
    for (std::size_t t = 1; t + 1 < n; ++t) {
        const double v = flux[t];
        if (v <= floor) continue;

        const std::size_t lo = t > radius ? t - radius : 0;
        const std::size_t hi = std::min(n - 1, t + radius);
        bool is_peak = true;
        for (std::size_t j = lo; j <= hi && is_peak; ++j) {
            if (j < t ? flux[j] >= v : flux[j] > v) is_peak = false;
        }
        if (!is_peak) continue;

        const std::size_t wlo = t > half_window ? t - half_window : 0;
        const std::size_t whi = std::min(n, t + half_window + 1);
        scratch.assign(flux.begin() + static_cast<std::ptrdiff_t>(wlo),
                       flux.begin() + static_cast<std::ptrdiff_t>(whi));
        const double med = median_of(scratch);
        for (double& x : scratch) x = std::abs(x - med);
        const double mad = median_of(scratch);
        if (v <= med + cfg.threshold_k * mad) continue;

        // Centre of the frame whose window first shows the stroke energy rising.
        const double time = (static_cast<double>(t * static_cast<std::size_t>(cfg.hop)) + 0.5 * cfg.fft_size) /
                            audio.sample_rate;
        if (!out.times.empty() && time - out.times.back() < cfg.min_gap_sec) {
            if (v > last_value) {
                out.times.back() = time;
                last_value = v;
            }
            continue;
        }
        out.times.push_back(time);
        last_value = v;
    }
    return out;
}

}  // namespace tanisep
