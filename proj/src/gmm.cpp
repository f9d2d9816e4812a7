#include "tanisep/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "tanisep/audio.hpp"
#include "tanisep/rng.hpp"

namespace tanisep {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const double m = v.maxCoeff();
    if (m == kNegInf) return kNegInf;
    return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

GaussianMixture::GaussianMixture(Eigen::VectorXd weights, Eigen::MatrixXd means, Eigen::MatrixXd variances)
    : weights_(std::move(weights)), means_(std::move(means)), variances_(std::move(variances)) {
    validate();
    refresh_constants();
}

void GaussianMixture::validate() const {
    const Eigen::Index k = weights_.size();
    if (k == 0) throw Error("gmm: no components");
    if (means_.rows() != k || variances_.rows() != k || variances_.cols() != means_.cols()) {
        throw Error("gmm: inconsistent parameter shapes");
    }
    if ((weights_.array() < 0.0).any() || std::abs(weights_.sum() - 1.0) > 1e-9) {
        throw Error("gmm: weights must form a simplex");
    }
    if (!means_.allFinite() || !variances_.allFinite() || (variances_.array() <= 0.0).any()) {
        throw Error("gmm: means must be finite and variances positive");
    }
}

void GaussianMixture::refresh_constants() {
    inv_var_ = variances_.cwiseInverse();
    const auto d = static_cast<double>(dim());
    log_norm_.resize(components());
    for (Eigen::Index k = 0; k < components(); ++k) {
        const double lw = weights_(k) > 0.0 ? std::log(weights_(k)) : kNegInf;
        log_norm_(k) = lw - 0.5 * (d * kLog2Pi + variances_.row(k).array().log().sum());
    }
}

Eigen::VectorXd GaussianMixture::component_log_densities(const Eigen::Ref<const Eigen::VectorXd>& frame) const {
    if (!fitted()) throw Error("gmm: model is not fitted");
    if (frame.size() != dim()) throw Error("gmm: frame dimension does not match model");
    Eigen::VectorXd out(components());
    for (Eigen::Index k = 0; k < components(); ++k) {
        const double maha = ((frame.transpose() - means_.row(k)).array().square() * inv_var_.row(k).array()).sum();
        out(k) = log_norm_(k) - 0.5 * maha;
    }
    return out;
}

double GaussianMixture::log_density(const Eigen::Ref<const Eigen::VectorXd>& frame) const {
    return log_sum_exp(component_log_densities(frame));
}

Eigen::VectorXd GaussianMixture::posteriors(const Eigen::Ref<const Eigen::VectorXd>& frame) const {
    Eigen::VectorXd lp = component_log_densities(frame);
    const double norm = log_sum_exp(lp);
    Eigen::VectorXd p = (lp.array() - norm).exp().matrix();
    return p / p.sum();
}

Eigen::MatrixXd GaussianMixture::sample(Eigen::Index n, std::uint64_t seed) const {
    if (!fitted()) throw Error("gmm: model is not fitted");
    Rng rng(seed);
    Eigen::MatrixXd out(n, dim());
    for (Eigen::Index i = 0; i < n; ++i) {
        double u = rng.uniform();
        Eigen::Index k = 0;
        while (k + 1 < components() && u >= weights_(k)) {
            u -= weights_(k);
            ++k;
        }
        for (Eigen::Index d = 0; d < dim(); ++d) {
            out(i, d) = rng.normal(means_(k, d), std::sqrt(variances_(k, d)));
        }
    }
    return out;
}

namespace {

// N x K matrix of log(w_k) + log N(x_n | k), computed with two GEMMs.
Eigen::MatrixXd joint_log_densities(const Eigen::MatrixXd& x, const Eigen::VectorXd& weights,
                                    const Eigen::MatrixXd& means, const Eigen::MatrixXd& vars) {
    const Eigen::MatrixXd inv = vars.cwiseInverse();
    const auto d = static_cast<double>(means.cols());
    Eigen::VectorXd constant(weights.size());
    for (Eigen::Index k = 0; k < weights.size(); ++k) {
        const double lw = weights(k) > 0.0 ? std::log(weights(k)) : kNegInf;
        constant(k) = lw - 0.5 * (d * kLog2Pi + vars.row(k).array().log().sum() +
                                  (means.row(k).array().square() * inv.row(k).array()).sum());
    }
    Eigen::MatrixXd out = -0.5 * (x.array().square().matrix() * inv.transpose());
    out.noalias() += x * (means.array() * inv.array()).matrix().transpose();
    out.rowwise() += constant.transpose();
    return out;
}

}  // namespace

Eigen::VectorXd frame_log_likelihoods(const GaussianMixture& gmm, const Eigen::MatrixXd& data) {
    if (!gmm.fitted()) throw Error("gmm: model is not fitted");
    if (data.cols() != gmm.dim()) throw Error("gmm: data dimension does not match model");
    const Eigen::MatrixXd joint = joint_log_densities(data, gmm.weights(), gmm.means(), gmm.variances());
    Eigen::VectorXd out(data.rows());
    for (Eigen::Index n = 0; n < data.rows(); ++n) out(n) = log_sum_exp(joint.row(n).transpose());
    return out;
}

double avg_log_likelihood(const GaussianMixture& gmm, const FeatureMatrix& data) {
    if (data.empty()) throw Error("avg_log_likelihood: empty data");
    return frame_log_likelihoods(gmm, data.values).mean();
}

EmFit fit_em_traced(const FeatureMatrix& data, const EmOptions& opts) {
    const Eigen::MatrixXd& x = data.values;
    const Eigen::Index n = x.rows();
    const Eigen::Index dim = x.cols();
    const Eigen::Index k = opts.k;
    if (k < 1) throw Error("fit_em: k must be at least 1");
    if (n < k) throw Error("fit_em: need at least k rows");
    if (dim < 1) throw Error("fit_em: zero-dimensional data");

    // k-means++ seeding.
    Rng rng(opts.seed);
    Eigen::MatrixXd centres(k, dim);
    centres.row(0) = x.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
    Eigen::VectorXd nearest = (x.rowwise() - centres.row(0)).rowwise().squaredNorm();
    for (Eigen::Index c = 1; c < k; ++c) {
        const double total = nearest.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            double u = rng.uniform() * total;
            for (pick = 0; pick + 1 < n; ++pick) {
                if (u < nearest(pick)) break;
                u -= nearest(pick);
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
        }
        centres.row(c) = x.row(pick);
        nearest = nearest.cwiseMin((x.rowwise() - centres.row(c)).rowwise().squaredNorm());
    }

    // Hard assignment to the nearest centre gives the initial responsibilities.
    Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index best = 0;
        (centres.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
        resp(i, best) = 1.0;
    }

    Eigen::VectorXd weights = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
    Eigen::MatrixXd means = centres;
    Eigen::MatrixXd vars = Eigen::MatrixXd::Ones(k, dim);

    auto m_step = [&]() {
        const Eigen::VectorXd mass = resp.colwise().sum().transpose();
        for (Eigen::Index c = 0; c < k; ++c) {
            if (mass(c) <= 1e-12) continue;  // empty component keeps its parameters
            const Eigen::RowVectorXd mean = (resp.col(c).transpose() * x) / mass(c);
            const Eigen::RowVectorXd var =
                (resp.col(c).transpose() * (x.rowwise() - mean).array().square().matrix()) / mass(c);
            means.row(c) = mean;
            vars.row(c) = var.cwiseMax(opts.variance_floor);
        }
        weights = mass / mass.sum();
    };

    EmFit fit;
    m_step();
    double prev = kNegInf;
    for (int iter = 0;; ++iter) {
        const Eigen::MatrixXd joint = joint_log_densities(x, weights, means, vars);
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double norm = log_sum_exp(joint.row(i).transpose());
            total += norm;
            resp.row(i) = (joint.row(i).array() - norm).exp();
        }
        fit.log_likelihood.push_back(total);
        const double avg = total / static_cast<double>(n);
        if (iter >= opts.max_iters || std::abs(avg - prev) < opts.tolerance) break;
        prev = avg;
        m_step();
        fit.iterations = iter + 1;
    }
    fit.model = GaussianMixture(weights, means, vars);
    return fit;
}

nlohmann::json to_json(const GaussianMixture& gmm) {
    nlohmann::json j;
    j["format"] = "tanisep-gmm";
    j["version"] = 1;
    j["weights"] = std::vector<double>(gmm.weights().data(), gmm.weights().data() + gmm.weights().size());
    auto rows = [](const Eigen::MatrixXd& m) {
        std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r)].push_back(m(r, c));
        }
        return out;
    };
    j["means"] = rows(gmm.means());
    j["variances"] = rows(gmm.variances());
    return j;
}

GaussianMixture gmm_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "tanisep-gmm") throw Error("gmm: not a tanisep-gmm document");
    if (j.value("version", 0) != 1) throw Error("gmm: unsupported version");
    const auto w = j.at("weights").get<std::vector<double>>();
    const auto m = j.at("means").get<std::vector<std::vector<double>>>();
    const auto v = j.at("variances").get<std::vector<std::vector<double>>>();
    const auto k = static_cast<Eigen::Index>(w.size());
    if (m.size() != w.size() || v.size() != w.size() || m.empty()) throw Error("gmm: inconsistent shapes");
    const auto d = static_cast<Eigen::Index>(m.front().size());
    Eigen::VectorXd weights(k);
    Eigen::MatrixXd means(k, d), vars(k, d);
    for (Eigen::Index r = 0; r < k; ++r) {
        const auto ru = static_cast<std::size_t>(r);
        weights(r) = w[ru];
        if (static_cast<Eigen::Index>(m[ru].size()) != d || static_cast<Eigen::Index>(v[ru].size()) != d) {
            throw Error("gmm: ragged parameter rows");
        }
        for (Eigen::Index c = 0; c < d; ++c) {
            means(r, c) = m[ru][static_cast<std::size_t>(c)];
            vars(r, c) = v[ru][static_cast<std::size_t>(c)];
        }
    }
    return GaussianMixture(weights, means, vars);
}

void save_gmm(const std::filesystem::path& path, const GaussianMixture& gmm) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("gmm: cannot write " + path.string());
    out << to_json(gmm).dump(1) << '\n';
}

GaussianMixture load_gmm(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("gmm: cannot open " + path.string());
    return gmm_from_json(nlohmann::json::parse(in));
}

}  // namespace tanisep
