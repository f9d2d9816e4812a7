#pragma once
// Brute-force reference implementations used to cross-check the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tanisep/annotation.hpp"
#include "tanisep/ib.hpp"
#include "tanisep/rng.hpp"

namespace oracle {

using tanisep::Annotation;
using tanisep::Segment;

// Random annotation over [0, total_ms] ms with whole-millisecond boundaries.
// Some segments may be unlabeled (no voice).
inline Annotation random_annotation(tanisep::Rng& rng, int total_ms, const std::vector<std::string>& labels,
                                    double unlabeled_prob = 0.1) {
    Annotation a;
    int t = 0;
    while (t < total_ms) {
        const int len = std::min(total_ms - t, 50 + static_cast<int>(rng.index(1500)));
        Segment s{t / 1000.0, (t + len) / 1000.0, std::nullopt};
        if (rng.uniform() >= unlabeled_prob) s.label = labels[rng.index(labels.size())];
        a.push_back(s);
        t += len;
    }
    return a;
}

struct GridCell {
    std::optional<std::string> ref, hyp;
    bool scored = true;
};

// One cell per millisecond, labelled at the cell centre.
inline std::vector<GridCell> grid(const Annotation& ref, const Annotation& hyp, double collar) {
    const int total = static_cast<int>(std::lround(ref.end() * 1000.0));
    const Annotation merged = ref.merged();
    std::vector<double> changes;
    for (std::size_t i = 1; i < merged.size(); ++i) changes.push_back(merged.segments()[i].start);
    for (std::size_t i = 0; i + 1 < merged.size(); ++i) changes.push_back(merged.segments()[i].end);
    std::vector<GridCell> cells(static_cast<std::size_t>(total));
    for (int k = 0; k < total; ++k) {
        const double mid = (k + 0.5) / 1000.0;
        GridCell& c = cells[static_cast<std::size_t>(k)];
        c.ref = ref.label_at(mid);
        c.hyp = hyp.label_at(mid);
        for (double b : changes) {
            if (std::abs(mid - b) < collar) c.scored = false;
        }
    }
    return cells;
}

struct GridDer {
    double missed = 0, false_alarm = 0, confusion = 0, scored = 0, der = 0;
};

// DER minimised over every injective mapping of hypothesis labels to reference labels.
inline GridDer grid_der(const Annotation& ref, const Annotation& hyp, double collar) {
    const auto cells = grid(ref, hyp, collar);
    const auto ref_labels = ref.label_set();
    const auto hyp_labels = hyp.label_set();
    GridDer base;
    for (const auto& c : cells) {
        if (!c.scored) continue;
        if (c.ref) base.scored += 1e-3;
        if (c.ref && !c.hyp) base.missed += 1e-3;
        if (!c.ref && c.hyp) base.false_alarm += 1e-3;
    }
    // Slots: each hypothesis label maps to a reference label or to nothing (-1).
    std::vector<int> target(hyp_labels.size(), -1);
    double best_conf = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::vector<bool>&)> search = [&](std::size_t h, std::vector<bool>& used) {
        if (h == hyp_labels.size()) {
            std::map<std::string, std::string> m;
            for (std::size_t i = 0; i < hyp_labels.size(); ++i) {
                if (target[i] >= 0) m[hyp_labels[i]] = ref_labels[static_cast<std::size_t>(target[i])];
            }
            double conf = 0.0;
            for (const auto& c : cells) {
                if (!c.scored || !c.ref || !c.hyp) continue;
                const auto it = m.find(*c.hyp);
                if (it == m.end() || it->second != *c.ref) conf += 1e-3;
            }
            best_conf = std::min(best_conf, conf);
            return;
        }
        target[h] = -1;
        search(h + 1, used);
        for (std::size_t r = 0; r < ref_labels.size(); ++r) {
            if (used[r]) continue;
            used[r] = true;
            target[h] = static_cast<int>(r);
            search(h + 1, used);
            used[r] = false;
        }
        target[h] = -1;
    };
    std::vector<bool> used(ref_labels.size(), false);
    search(0, used);
    base.confusion = best_conf;
    base.der = base.scored > 0 ? (base.missed + base.false_alarm + base.confusion) / base.scored : 0.0;
    return base;
}

inline double grid_purity(const Annotation& ref, const Annotation& hyp) {
    std::map<std::string, std::map<std::string, int>> counts;
    for (const auto& c : grid(ref, hyp, 0.0)) {
        if (c.ref && c.hyp) ++counts[*c.hyp][*c.ref];
    }
    int dominant = 0, total = 0;
    for (const auto& [h, row] : counts) {
        int best = 0;
        for (const auto& [r, n] : row) {
            best = std::max(best, n);
            total += n;
        }
        dominant += best;
    }
    return static_cast<double>(dominant) / total;
}

inline double grid_accuracy(const Annotation& ref, const Annotation& hyp) {
    int correct = 0, total = 0;
    for (const auto& c : grid(ref, hyp, 0.0)) {
        if (!c.ref) continue;
        ++total;
        if (c.hyp == c.ref) ++correct;
    }
    return 100.0 * correct / total;
}

// SDR through an explicit least-squares fit of the estimate by the source.
inline double lsq_sdr(const std::vector<double>& estimate, const std::vector<double>& source) {
    const auto n = static_cast<Eigen::Index>(source.size());
    const Eigen::Map<const Eigen::VectorXd> e(estimate.data(), n), s(source.data(), n);
    const Eigen::MatrixXd a = s;
    const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(e);
    const Eigen::VectorXd target = a * coef;
    const double r = (e - target).squaredNorm();
    return std::clamp(10.0 * std::log10(target.squaredNorm() / r), -100.0, 100.0);
}

// I(Y;C) - I(C;X)/beta from the full joint tables of a hard partition.
inline double ib_objective(const tanisep::PosteriorTable& table, const std::vector<int>& assignment, double beta) {
    const Eigen::Index n = table.segments(), k = table.components();
    std::map<int, int> index;
    for (int c : assignment) index.emplace(c, static_cast<int>(index.size()));
    const auto m = static_cast<Eigen::Index>(index.size());
    Eigen::MatrixXd cy = Eigen::MatrixXd::Zero(m, k), cx = Eigen::MatrixXd::Zero(m, n);
    for (Eigen::Index x = 0; x < n; ++x) {
        const Eigen::Index c = index[assignment[static_cast<std::size_t>(x)]];
        cy.row(c) += table.p_x(x) * table.p_y_given_x.row(x);
        cx(c, x) = table.p_x(x);
    }
    auto mi = [](const Eigen::MatrixXd& j) {
        const Eigen::VectorXd r = j.rowwise().sum();
        const Eigen::RowVectorXd c = j.colwise().sum();
        double s = 0.0;
        for (Eigen::Index a = 0; a < j.rows(); ++a) {
            for (Eigen::Index b = 0; b < j.cols(); ++b) {
                if (j(a, b) > 0.0) s += j(a, b) * std::log(j(a, b) / (r(a) * c(b)));
            }
        }
        return s;
    };
    return mi(cy) - mi(cx) / beta;
}

inline double relevance_from_scratch(const tanisep::PosteriorTable& table, const std::vector<int>& assignment) {
    return ib_objective(table, assignment, std::numeric_limits<double>::infinity());
}

inline tanisep::PosteriorTable random_table(tanisep::Rng& rng, int segments, int components) {
    tanisep::PosteriorTable t;
    t.p_y_given_x.resize(segments, components);
    t.p_x.resize(segments);
    for (int i = 0; i < segments; ++i) {
        double sum = 0.0;
        for (int j = 0; j < components; ++j) {
            // Occasional exact zeros exercise the 0 log 0 convention.
            const double v = rng.uniform() < 0.15 ? 0.0 : std::pow(rng.uniform(0.01, 1.0), 3.0);
            t.p_y_given_x(i, j) = v;
            sum += v;
        }
        if (sum == 0.0) {
            t.p_y_given_x(i, 0) = 1.0;
            sum = 1.0;
        }
        t.p_y_given_x.row(i) /= sum;
        t.p_x(i) = rng.uniform(0.2, 1.0);
    }
    t.p_x /= t.p_x.sum();
    return t;
}

}  // namespace oracle
