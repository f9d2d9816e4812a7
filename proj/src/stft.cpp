#include "tanisep/stft.hpp"

#include <cmath>
#include <mutex>
#include <numbers>

#include <fftw3.h>

namespace tanisep {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
constexpr std::size_t kBlockFrames = 32;  // even, so frame pairs never straddle blocks

void check_params(int fft_size, int hop) {
    if (fft_size <= 0 || !is_power_of_two(static_cast<std::size_t>(fft_size))) {
        throw Error("stft: fft_size must be a power of two");
    }
    if (hop <= 0 || hop > fft_size) throw Error("stft: hop must be in (0, fft_size]");
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

struct FftPlan::Plans {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;

    ~Plans() {
        const std::lock_guard<std::mutex> lock(planner_mutex());
        if (forward) fftw_destroy_plan(forward);
        if (backward) fftw_destroy_plan(backward);
    }

    // The FFTW planner is not thread-safe; execution is.
    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }
};

FftPlan::FftPlan(std::size_t n) : n_(n) {
    if (!is_power_of_two(n)) throw Error("fft: size must be a power of two");
    auto plans = std::make_shared<Plans>();
    std::vector<std::complex<double>> scratch(n);
    auto* data = reinterpret_cast<fftw_complex*>(scratch.data());
    const int size = static_cast<int>(n);
    // FFTW_ESTIMATE keeps planning deterministic; FFTW_UNALIGNED allows
    // executing on arbitrary std::vector storage.
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    {
        const std::lock_guard<std::mutex> lock(Plans::planner_mutex());
        plans->forward = fftw_plan_dft_1d(size, data, data, FFTW_FORWARD, flags);
        plans->backward = fftw_plan_dft_1d(size, data, data, FFTW_BACKWARD, flags);
    }
    if (!plans->forward || !plans->backward) throw Error("fft: planning failed");
    plans_ = std::move(plans);
}

void FftPlan::run(std::vector<std::complex<double>>& x, bool inverse) const {
    if (x.size() != n_) throw Error("fft: buffer size does not match plan");
    auto* data = reinterpret_cast<fftw_complex*>(x.data());
    fftw_execute_dft(inverse ? plans_->backward : plans_->forward, data, data);
    if (inverse) {
        const double scale = 1.0 / static_cast<double>(n_);
        for (auto& v : x) v *= scale;
    }
}

void fft(std::vector<std::complex<double>>& data, bool inverse) {
    FftPlan(data.size()).run(data, inverse);
}

std::vector<double> hann_window(std::size_t length) {
    std::vector<double> w(length);
    for (std::size_t i = 0; i < length; ++i) {
        const double s = std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(length));
        w[i] = s * s;
    }
    return w;
}

std::size_t stft_frame_count(std::size_t length, int fft_size, int hop) {
    const auto n = static_cast<std::size_t>(fft_size);
    const auto h = static_cast<std::size_t>(hop);
    if (length <= n) return 1;
    return (length - n + h - 1) / h + 1;
}

std::pair<std::size_t, std::size_t> stft_interior(std::size_t length, int fft_size, int /*hop*/) {
    const auto n = static_cast<std::size_t>(fft_size);
    if (length <= 2 * n) return {0, 0};
    return {n, length - n};
}

Spectrogram stft(const AudioBuffer& audio, int fft_size, int hop) {
    if (audio.empty()) throw Error("stft: empty audio");
    check_params(fft_size, hop);

    const auto n = static_cast<std::size_t>(fft_size);
    const std::size_t bins = n / 2 + 1;
    const std::size_t frames = stft_frame_count(audio.size(), fft_size, hop);
    const std::vector<double> window = hann_window(n);
    const FftPlan plan(n);

    Spectrogram spec;
    spec.fft_size = fft_size;
    spec.hop = hop;
    spec.sample_rate = audio.sample_rate;
    spec.signal_length = audio.size();
    spec.magnitudes.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins));
    spec.phases.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins));

    auto sample = [&](std::size_t t, std::size_t i) {
        const std::size_t idx = t * static_cast<std::size_t>(hop) + i;
        return idx < audio.size() ? audio.samples[idx] * window[i] : 0.0;
    };
    // Frames are produced row by row; a small row-major block is copied into
    // the column-major result to avoid strided writes.
    RowMajorMatrix mag(kBlockFrames, static_cast<Eigen::Index>(bins)), phase(mag.rows(), mag.cols());
    auto store = [&](std::size_t row, std::size_t k, std::complex<double> v) {
        mag(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(k)) = std::sqrt(std::norm(v));
        phase(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(k)) = std::arg(v);
    };
    // Frames t and t+1 travel together as the real and imaginary parts of one
    // complex transform and are split using Hermitian symmetry.
    std::vector<std::complex<double>> buf(n);
    for (std::size_t first = 0; first < frames; first += kBlockFrames) {
        const std::size_t count = std::min<std::size_t>(kBlockFrames, frames - first);
        for (std::size_t t = first; t < first + count; t += 2) {
            const bool pair = t + 1 < first + count;
            for (std::size_t i = 0; i < n; ++i) buf[i] = {sample(t, i), pair ? sample(t + 1, i) : 0.0};
            plan.run(buf, false);
            for (std::size_t k = 0; k < bins; ++k) {
                const std::complex<double> z = buf[k];
                const std::complex<double> zc = std::conj(buf[(n - k) % n]);
                store(t - first, k, 0.5 * (z + zc));
                if (pair) store(t - first + 1, k, std::complex<double>(0.0, -0.5) * (z - zc));
            }
        }
        const auto rows = static_cast<Eigen::Index>(count);
        spec.magnitudes.middleRows(static_cast<Eigen::Index>(first), rows) = mag.topRows(rows);
        spec.phases.middleRows(static_cast<Eigen::Index>(first), rows) = phase.topRows(rows);
    }
    return spec;
}

AudioBuffer istft(const Spectrogram& spec) {
    check_params(spec.fft_size, spec.hop);
    if (spec.hop > spec.fft_size / 2) {
        throw Error("istft: hop must not exceed fft_size / 2 for Hann overlap-add");
    }
    const auto n = static_cast<std::size_t>(spec.fft_size);
    const std::size_t bins = n / 2 + 1;
    if (static_cast<std::size_t>(spec.bins()) != bins || spec.phases.rows() != spec.magnitudes.rows() ||
        spec.phases.cols() != spec.magnitudes.cols()) {
        throw Error("istft: malformed spectrogram");
    }

    const auto frames = static_cast<std::size_t>(spec.frames());
    const auto hop = static_cast<std::size_t>(spec.hop);
    const std::size_t span = frames == 0 ? 0 : (frames - 1) * hop + n;
    const std::size_t length = spec.signal_length > 0 ? spec.signal_length : span;

    const std::vector<double> window = hann_window(n);
    const FftPlan plan(n);
    std::vector<double> acc(std::max(span, length), 0.0);
    std::vector<double> norm(acc.size(), 0.0);
    std::vector<std::complex<double>> buf(n);

    RowMajorMatrix mag(kBlockFrames, static_cast<Eigen::Index>(bins)), phase(mag.rows(), mag.cols());
    std::size_t block_first = 0;
    auto spectrum = [&](std::size_t t, std::size_t k) {
        const auto row = static_cast<Eigen::Index>(t - block_first);
        const auto col = static_cast<Eigen::Index>(k);
        return std::polar(mag(row, col), phase(row, col));
    };
    // Two frames per inverse transform: frame t in the real part, t+1 in the
    // imaginary part. DC and Nyquist bins of a real signal are real.
    for (std::size_t t = 0; t < frames; t += 2) {
        if (t % kBlockFrames == 0) {
            block_first = t;
            const auto rows = static_cast<Eigen::Index>(std::min<std::size_t>(kBlockFrames, frames - t));
            mag.topRows(rows) = spec.magnitudes.middleRows(static_cast<Eigen::Index>(t), rows);
            phase.topRows(rows) = spec.phases.middleRows(static_cast<Eigen::Index>(t), rows);
        }
        const bool pair = t + 1 < frames;
        for (std::size_t k = 0; k < bins; ++k) {
            std::complex<double> a = spectrum(t, k);
            std::complex<double> b = pair ? spectrum(t + 1, k) : std::complex<double>();
            if (k == 0 || k == n / 2) {
                a = {a.real(), 0.0};
                b = {b.real(), 0.0};
            }
            const std::complex<double> ib(-b.imag(), b.real());
            buf[k] = a + ib;
            if (k != 0 && k != n / 2) buf[n - k] = std::conj(a) + std::complex<double>(b.imag(), b.real());
        }
        plan.run(buf, true);

        for (std::size_t f = 0; f < (pair ? 2u : 1u); ++f) {
            const std::size_t offset = (t + f) * hop;
            for (std::size_t i = 0; i < n; ++i) {
                const double v = f == 0 ? buf[i].real() : buf[i].imag();
                acc[offset + i] += v * window[i];
                norm[offset + i] += window[i] * window[i];
            }
        }
    }

    AudioBuffer out;
    out.sample_rate = spec.sample_rate;
    out.samples.resize(length);
    for (std::size_t i = 0; i < length; ++i) {
        out.samples[i] = norm[i] > 1e-10 ? acc[i] / norm[i] : 0.0;
    }
    return out;
}

}  // namespace tanisep
