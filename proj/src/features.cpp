#include "tanisep/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "tanisep/stft.hpp"

namespace tanisep {

FeatureMatrix FeatureMatrix::select_rows(const std::vector<Eigen::Index>& rows) const {
    FeatureMatrix out;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), cols());
    out.frame_times.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.values.row(static_cast<Eigen::Index>(i)) = values.row(rows[i]);
        out.frame_times.push_back(frame_times[static_cast<std::size_t>(rows[i])]);
    }
    return out;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

Eigen::MatrixXd mel_filterbank(int n_mels, int fft_size, int sample_rate, double f_min, double f_max) {
    if (n_mels <= 0) throw Error("mel_filterbank: n_mels must be positive");
    if (f_max <= 0.0) f_max = sample_rate / 2.0;
    const int bins = fft_size / 2 + 1;
    const double mel_lo = hz_to_mel(f_min);
    const double mel_hi = hz_to_mel(f_max);

    std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (n_mels + 1));
    }

    Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_mels, bins);
    for (int m = 0; m < n_mels; ++m) {
        const double left = edges[static_cast<std::size_t>(m)];
        const double centre = edges[static_cast<std::size_t>(m) + 1];
        const double right = edges[static_cast<std::size_t>(m) + 2];
        for (int k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / fft_size;
            if (f > left && f <= centre) {
                fb(m, k) = (f - left) / (centre - left);
            } else if (f > centre && f < right) {
                fb(m, k) = (right - f) / (right - centre);
            }
        }
    }
    return fb;
}

FeatureMatrix mfcc(const AudioBuffer& audio, const MfccConfig& cfg) {
    if (cfg.n_coeffs <= 0) throw Error("mfcc: n_coeffs must be positive");
    if (cfg.n_coeffs > cfg.n_mels) throw Error("mfcc: n_coeffs must not exceed n_mels");
    if (audio.sample_rate < 8000) throw Error("mfcc: sample rate must be at least 8 kHz");
    if (audio.empty()) throw Error("mfcc: empty audio");

    const auto win = static_cast<std::size_t>(std::lround(cfg.window_sec * audio.sample_rate));
    const auto hop = static_cast<std::size_t>(std::lround(cfg.hop_sec * audio.sample_rate));
    if (win == 0 || hop == 0) throw Error("mfcc: window and hop must be at least one sample");
    const std::size_t nfft = next_power_of_two(win);
    const std::size_t bins = nfft / 2 + 1;
    const std::size_t frames = audio.size() < win ? 1 : (audio.size() - win) / hop + 1;

    std::vector<double> emphasised(audio.size());
    emphasised[0] = audio.samples[0];
    for (std::size_t i = 1; i < audio.size(); ++i) {
        emphasised[i] = audio.samples[i] - cfg.pre_emphasis * audio.samples[i - 1];
    }

    const std::vector<double> window = hann_window(win);
    const Eigen::MatrixXd fb = mel_filterbank(cfg.n_mels, static_cast<int>(nfft), audio.sample_rate,
                                              cfg.f_min, cfg.f_max);

    // Orthonormal DCT-II rows 1..n_coeffs.
    Eigen::MatrixXd dct(cfg.n_coeffs, cfg.n_mels);
    const double scale = std::sqrt(2.0 / cfg.n_mels);
    for (int k = 1; k <= cfg.n_coeffs; ++k) {
        for (int m = 0; m < cfg.n_mels; ++m) {
            dct(k - 1, m) = scale * std::cos(std::numbers::pi * k * (m + 0.5) / cfg.n_mels);
        }
    }

    FeatureMatrix out;
    out.values.resize(static_cast<Eigen::Index>(frames), cfg.n_coeffs);
    out.frame_times.resize(frames);

    const FftPlan plan(nfft);
    std::vector<std::complex<double>> buf(nfft);
    Eigen::VectorXd power(static_cast<Eigen::Index>(bins));
    for (std::size_t t = 0; t < frames; ++t) {
        const std::size_t offset = t * hop;
        std::fill(buf.begin(), buf.end(), std::complex<double>{});
        for (std::size_t i = 0; i < win && offset + i < emphasised.size(); ++i) {
            buf[i] = {emphasised[offset + i] * window[i], 0.0};
        }
        plan.run(buf);
        for (std::size_t k = 0; k < bins; ++k) power(static_cast<Eigen::Index>(k)) = std::norm(buf[k]);
        Eigen::VectorXd logmel = fb * power;
        for (Eigen::Index m = 0; m < logmel.size(); ++m) {
            logmel(m) = std::log(std::max(logmel(m), cfg.log_floor));
        }
        out.values.row(static_cast<Eigen::Index>(t)) = (dct * logmel).transpose();
        out.frame_times[t] = (static_cast<double>(offset) + 0.5 * static_cast<double>(win)) / audio.sample_rate;
    }
    return out;
}

}  // namespace tanisep
