#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tanisep/audio.hpp"

namespace tanisep {

// Complex FFT of a fixed power-of-two size, backed by FFTW. The inverse is
// scaled by 1/n. Plans are immutable once built and may be shared.
class FftPlan {
public:
    explicit FftPlan(std::size_t n);
    std::size_t size() const { return n_; }
    void run(std::vector<std::complex<double>>& x, bool inverse = false) const;

private:
    struct Plans;
    std::size_t n_;
    std::shared_ptr<const Plans> plans_;
};

void fft(std::vector<std::complex<double>>& data, bool inverse = false);

bool is_power_of_two(std::size_t n);

// Periodic Hann window.
std::vector<double> hann_window(std::size_t length);

// Frames x bins. bins == fft_size / 2 + 1.
struct Spectrogram {
    Eigen::MatrixXd magnitudes;
    Eigen::MatrixXd phases;
    int fft_size = 1024;
    int hop = 256;
    int sample_rate = 44100;
    // Number of samples of the analysed signal; istft trims to this length.
    std::size_t signal_length = 0;

    Eigen::Index frames() const { return magnitudes.rows(); }
    Eigen::Index bins() const { return magnitudes.cols(); }
};

// Frame count used by stft: frames start at multiples of hop, with enough
// frames to cover every sample. The final frame is zero-padded when the
// signal does not end on a frame boundary; a signal shorter than fft_size
// yields one zero-padded frame.
std::size_t stft_frame_count(std::size_t length, int fft_size, int hop);

// Hann-windowed STFT without centering. Reconstruction guarantees hold on the
// interior, i.e. samples covered by the full window overlap.
Spectrogram stft(const AudioBuffer& audio, int fft_size = 1024, int hop = 256);

// Weighted overlap-add inverse (divides by the summed squared window).
// Requires hop <= fft_size / 2.
AudioBuffer istft(const Spectrogram& spec);

// First and one-past-last sample index that receive the full window overlap.
std::pair<std::size_t, std::size_t> stft_interior(std::size_t length, int fft_size, int hop);

}  // namespace tanisep
