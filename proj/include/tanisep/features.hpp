#pragma once

#include <vector>

#include <Eigen/Dense>

#include "tanisep/audio.hpp"

namespace tanisep {

// Per-frame feature vectors. frame_times holds the centre time of each frame.
struct FeatureMatrix {
    Eigen::MatrixXd values;  // rows: frames, cols: feature dimension
    std::vector<double> frame_times;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
    bool empty() const { return values.rows() == 0; }

    FeatureMatrix select_rows(const std::vector<Eigen::Index>& rows) const;
};

struct MfccConfig {
    int n_coeffs = 19;
    int n_mels = 40;
    double window_sec = 0.025;
    double hop_sec = 0.010;
    double pre_emphasis = 0.97;
    double log_floor = 1e-10;
    double f_min = 0.0;
    double f_max = 0.0;  // 0 means Nyquist
};

// Triangular mel filterbank, n_mels x (fft_size / 2 + 1), HTK mel scale.
Eigen::MatrixXd mel_filterbank(int n_mels, int fft_size, int sample_rate,
                               double f_min, double f_max);

// MFCCs 1..n_coeffs (c0 dropped) from a pre-emphasised, Hann-windowed,
// log mel power spectrum with an orthonormal DCT-II.
FeatureMatrix mfcc(const AudioBuffer& audio, const MfccConfig& cfg = {});

}  // namespace tanisep
