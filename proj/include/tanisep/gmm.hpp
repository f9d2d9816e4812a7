#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "tanisep/features.hpp"

namespace tanisep {

inline constexpr double kVarianceFloor = 1e-6;

// Diagonal-covariance Gaussian mixture.
class GaussianMixture {
public:
    GaussianMixture() = default;
    GaussianMixture(Eigen::VectorXd weights, Eigen::MatrixXd means, Eigen::MatrixXd variances);

    Eigen::Index components() const { return weights_.size(); }
    Eigen::Index dim() const { return means_.cols(); }
    bool fitted() const { return weights_.size() > 0; }

    const Eigen::VectorXd& weights() const { return weights_; }
    const Eigen::MatrixXd& means() const { return means_; }
    const Eigen::MatrixXd& variances() const { return variances_; }

    // log(w_k) + log N(x | mu_k, diag(var_k)) for every component.
    Eigen::VectorXd component_log_densities(const Eigen::Ref<const Eigen::VectorXd>& frame) const;

    double log_density(const Eigen::Ref<const Eigen::VectorXd>& frame) const;

    // Posterior over components, evaluated in the log domain.
    Eigen::VectorXd posteriors(const Eigen::Ref<const Eigen::VectorXd>& frame) const;

    // Draws n frames; used by tests and the synthetic fixtures.
    Eigen::MatrixXd sample(Eigen::Index n, std::uint64_t seed) const;

    void validate() const;

private:
    void refresh_constants();

    Eigen::VectorXd weights_;
    Eigen::MatrixXd means_;      // K x D
    Eigen::MatrixXd variances_;  // K x D
    Eigen::VectorXd log_norm_;   // log w_k - 0.5 * (D log 2pi + sum log var)
    Eigen::MatrixXd inv_var_;
};

struct EmOptions {
    int k = 3;
    int max_iters = 100;
    double tolerance = 1e-6;  // on the change of mean per-frame log-likelihood
    std::uint64_t seed = 0;
    double variance_floor = kVarianceFloor;
};

struct EmFit {
    GaussianMixture model;
    // Total data log-likelihood before each M-step (index 0 is the initial model).
    std::vector<double> log_likelihood;
    int iterations = 0;
};

// k-means++ initialisation followed by EM.
EmFit fit_em_traced(const FeatureMatrix& data, const EmOptions& opts);

inline GaussianMixture fit_em(const FeatureMatrix& data, const EmOptions& opts) {
    return fit_em_traced(data, opts).model;
}

// Mean per-frame log density in nats.
double avg_log_likelihood(const GaussianMixture& gmm, const FeatureMatrix& data);

// Per-frame log densities.
Eigen::VectorXd frame_log_likelihoods(const GaussianMixture& gmm, const Eigen::MatrixXd& data);

nlohmann::json to_json(const GaussianMixture& gmm);
GaussianMixture gmm_from_json(const nlohmann::json& j);
void save_gmm(const std::filesystem::path& path, const GaussianMixture& gmm);
GaussianMixture load_gmm(const std::filesystem::path& path);

}  // namespace tanisep
