#include "tanisep/ib.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "tanisep/audio.hpp"

namespace tanisep {

namespace {

// Sum of p log(p / q) over entries with p > 0.
double kl(const Eigen::Ref<const Eigen::VectorXd>& p, const Eigen::Ref<const Eigen::VectorXd>& q) {
    double out = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) > 0.0) out += p(i) * std::log(p(i) / q(i));
    }
    return out;
}

double entropy2(double a, double b) {
    double h = 0.0;
    if (a > 0.0) h -= a * std::log(a);
    if (b > 0.0) h -= b * std::log(b);
    return h;
}

}  // namespace

void PosteriorTable::validate() const {
    if (p_x.size() != p_y_given_x.rows()) throw Error("posterior table: p_x size mismatch");
    if (std::abs(p_x.sum() - 1.0) > 1e-9 || (p_x.array() < 0.0).any()) {
        throw Error("posterior table: p_x must be a simplex");
    }
    for (Eigen::Index i = 0; i < p_y_given_x.rows(); ++i) {
        if (std::abs(p_y_given_x.row(i).sum() - 1.0) > 1e-9 || (p_y_given_x.row(i).array() < 0.0).any()) {
            throw Error("posterior table: row " + std::to_string(i) + " is not a simplex");
        }
    }
}

std::vector<std::vector<Eigen::Index>> frames_per_segment(const FeatureMatrix& features,
                                                          const std::vector<Segment>& segments) {
    std::vector<std::vector<Eigen::Index>> out(segments.size());
    std::size_t s = 0;
    for (Eigen::Index f = 0; f < features.rows(); ++f) {
        const double t = features.frame_times[static_cast<std::size_t>(f)];
        while (s < segments.size() && t >= segments[s].end) ++s;
        if (s == segments.size()) break;
        if (segments[s].contains(t)) out[s].push_back(f);
    }
    return out;
}

PosteriorTable build_posterior_table(const GaussianMixture& gmm, const FeatureMatrix& features,
                                     const std::vector<Segment>& segments) {
    if (segments.empty()) throw Error("build_posterior_table: no segments");
    const auto frames = frames_per_segment(features, segments);
    PosteriorTable table;
    table.p_y_given_x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(segments.size()), gmm.components());
    table.p_x.resize(static_cast<Eigen::Index>(segments.size()));
    double total = 0.0;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        if (frames[s].empty()) {
            throw Error("build_posterior_table: segment " + std::to_string(s) + " contains no frames");
        }
        const auto row = static_cast<Eigen::Index>(s);
        for (Eigen::Index f : frames[s]) {
            table.p_y_given_x.row(row) += gmm.posteriors(features.values.row(f).transpose()).transpose();
        }
        table.p_y_given_x.row(row) /= static_cast<double>(frames[s].size());
        table.p_x(row) = static_cast<double>(frames[s].size());
        total += table.p_x(row);
    }
    table.p_x /= total;
    return table;
}

double mutual_information(const Eigen::MatrixXd& joint) {
    if ((joint.array() < 0.0).any()) throw Error("mutual_information: negative entry");
    if (std::abs(joint.sum() - 1.0) > 1e-9) throw Error("mutual_information: joint must sum to 1");
    const Eigen::VectorXd rows = joint.rowwise().sum();
    const Eigen::RowVectorXd cols = joint.colwise().sum();
    double mi = 0.0;
    for (Eigen::Index i = 0; i < joint.rows(); ++i) {
        for (Eigen::Index j = 0; j < joint.cols(); ++j) {
            const double p = joint(i, j);
            if (p > 0.0) mi += p * std::log(p / (rows(i) * cols(j)));
        }
    }
    return std::max(mi, 0.0);
}

double js_divergence(const Eigen::Ref<const Eigen::VectorXd>& p, const Eigen::Ref<const Eigen::VectorXd>& q,
                     double pi1, double pi2) {
    const Eigen::VectorXd m = pi1 * p + pi2 * q;
    return pi1 * kl(p, m) + pi2 * kl(q, m);
}

ClusterState ClusterState::singletons(const PosteriorTable& table) {
    const auto n = static_cast<std::size_t>(table.segments());
    ClusterState st;
    st.assignment.resize(n);
    st.live.assign(n, true);
    st.p_c = table.p_x;
    st.p_y_given_c = table.p_y_given_x;
    st.members.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        st.assignment[i] = static_cast<int>(i);
        st.members[i] = {static_cast<int>(i)};
    }
    return st;
}

int ClusterState::cluster_count() const {
    return static_cast<int>(std::count(live.begin(), live.end(), true));
}

std::vector<int> ClusterState::live_ids() const {
    std::vector<int> ids;
    for (std::size_t i = 0; i < live.size(); ++i) {
        if (live[i]) ids.push_back(static_cast<int>(i));
    }
    return ids;
}

std::vector<int> ClusterState::compact_assignment() const {
    std::vector<int> index(live.size(), -1);
    int next = 0;
    for (std::size_t i = 0; i < live.size(); ++i) {
        if (live[i]) index[i] = next++;
    }
    std::vector<int> out(assignment.size());
    for (std::size_t i = 0; i < assignment.size(); ++i) out[i] = index[static_cast<std::size_t>(assignment[i])];
    return out;
}

void ClusterState::merge(int a, int b) {
    if (a > b) std::swap(a, b);
    const auto ua = static_cast<std::size_t>(a);
    const auto ub = static_cast<std::size_t>(b);
    const double pa = p_c(a), pb = p_c(b);
    const double pab = pa + pb;
    if (pab > 0.0) {
        p_y_given_c.row(a) = (pa * p_y_given_c.row(a) + pb * p_y_given_c.row(b)) / pab;
    }
    p_c(a) = pab;
    p_c(b) = 0.0;
    p_y_given_c.row(b).setZero();
    for (int m : members[ub]) assignment[static_cast<std::size_t>(m)] = a;
    members[ua].insert(members[ua].end(), members[ub].begin(), members[ub].end());
    std::sort(members[ua].begin(), members[ua].end());
    members[ub].clear();
    live[ub] = false;
}

double merge_cost(const ClusterState& state, int a, int b, double beta) {
    const auto n = static_cast<int>(state.live.size());
    if (a == b) throw Error("merge_cost: clusters must differ");
    if (a < 0 || b < 0 || a >= n || b >= n || !state.live[static_cast<std::size_t>(a)] ||
        !state.live[static_cast<std::size_t>(b)]) {
        throw Error("merge_cost: cluster id is not live");
    }
    if (!(beta > 0.0)) throw Error("merge_cost: beta must be positive");
    const double pa = state.p_c(a), pb = state.p_c(b);
    const double pab = pa + pb;
    if (pab <= 0.0) return 0.0;
    const double pi1 = pa / pab, pi2 = pb / pab;
    const double js_y = js_divergence(state.p_y_given_c.row(a).transpose(), state.p_y_given_c.row(b).transpose(),
                                      pi1, pi2);
    // p(x|a) and p(x|b) have disjoint supports, so their JS divergence is H(pi).
    const double js_x = entropy2(pi1, pi2);
    return pab * (js_y - js_x / beta);
}

namespace {

double cluster_contribution(const ClusterState& st, const Eigen::VectorXd& p_y, int c) {
    const double pc = st.p_c(c);
    if (pc <= 0.0) return 0.0;
    return pc * kl(st.p_y_given_c.row(c).transpose(), p_y);
}

Eigen::VectorXd marginal_y(const ClusterState& st) {
    return (st.p_y_given_c.transpose() * st.p_c);
}

double nmi_from(double relevance, double total) {
    if (total <= 0.0) return 1.0;
    return std::clamp(relevance / total, 0.0, 1.0);
}

}  // namespace

double relevance_information(const ClusterState& state) {
    const Eigen::VectorXd p_y = marginal_y(state);
    double total = 0.0;
    for (int c : state.live_ids()) total += cluster_contribution(state, p_y, c);
    return std::max(total, 0.0);
}

double normalized_mutual_information(const ClusterState& state, const PosteriorTable& table) {
    const ClusterState base = ClusterState::singletons(table);
    return nmi_from(relevance_information(state), relevance_information(base));
}

ClusterState agglomerate(const PosteriorTable& table, const IBConfig& cfg) {
    if (table.segments() < 1) throw Error("agglomerate: empty posterior table");
    if (!(cfg.beta > 0.0)) throw Error("agglomerate: beta must be positive");
    if (cfg.max_clusters < 1) throw Error("agglomerate: max_clusters must be at least 1");

    ClusterState st = ClusterState::singletons(table);
    const auto n = static_cast<int>(table.segments());
    const Eigen::VectorXd p_y = marginal_y(st);  // invariant under merging
    const double total_info = relevance_information(st);

    std::vector<double> contrib(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) contrib[static_cast<std::size_t>(c)] = cluster_contribution(st, p_y, c);

    constexpr double kInf = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(n, n, kInf);
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) cost(a, b) = merge_cost(st, a, b, cfg.beta);
    }

    int clusters = n;
    while (clusters > 1) {
        int best_a = -1, best_b = -1;
        double best = kInf;
        for (int a = 0; a < n; ++a) {
            if (!st.live[static_cast<std::size_t>(a)]) continue;
            for (int b = a + 1; b < n; ++b) {
                if (st.live[static_cast<std::size_t>(b)] && cost(a, b) < best) {
                    best = cost(a, b);
                    best_a = a;
                    best_b = b;
                }
            }
        }
        if (best_a < 0) break;

        // Relevance information if the pair were merged.
        const double pab = st.p_c(best_a) + st.p_c(best_b);
        double merged_contrib = 0.0;
        if (pab > 0.0) {
            const Eigen::VectorXd merged =
                (st.p_c(best_a) * st.p_y_given_c.row(best_a) + st.p_c(best_b) * st.p_y_given_c.row(best_b))
                    .transpose() / pab;
            merged_contrib = pab * kl(merged, p_y);
        }
        double current = 0.0;
        for (int c : st.live_ids()) current += contrib[static_cast<std::size_t>(c)];
        const double after = current - contrib[static_cast<std::size_t>(best_a)] -
                             contrib[static_cast<std::size_t>(best_b)] + merged_contrib;
        const double nmi_after = nmi_from(after, total_info);

        const bool over_cap = clusters > cfg.max_clusters;
        const bool keeps_info = nmi_after >= cfg.nmi_threshold - 1e-12;
        const bool proceed = cfg.stop_rule == StopRule::threshold_or_cap ? (over_cap || keeps_info)
                                                                         : (over_cap && keeps_info);
        if (!proceed) break;

        st.merge(best_a, best_b);
        --clusters;
        contrib[static_cast<std::size_t>(best_a)] = merged_contrib;
        contrib[static_cast<std::size_t>(best_b)] = 0.0;
        st.merge_log.push_back({best_a, best_b, best, nmi_after, clusters});

        for (int c = 0; c < n; ++c) {
            cost(std::min(c, best_b), std::max(c, best_b)) = kInf;
            if (c == best_a || !st.live[static_cast<std::size_t>(c)]) continue;
            cost(std::min(c, best_a), std::max(c, best_a)) = merge_cost(st, std::min(c, best_a),
                                                                      std::max(c, best_a), cfg.beta);
        }
    }
    return st;
}

void write_merge_log_csv(std::ostream& out, const ClusterState& state) {
    out << "step,a,b,cost,nmi\n";
    char buf[128];
    for (std::size_t i = 0; i < state.merge_log.size(); ++i) {
        const MergeStep& m = state.merge_log[i];
        std::snprintf(buf, sizeof buf, "%zu,%d,%d,%.12g,%.12g\n", i + 1, m.a, m.b, m.cost, m.nmi);
        out << buf;
    }
}

}  // namespace tanisep
