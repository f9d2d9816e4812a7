#include "tanisep/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>

namespace tanisep {

namespace {

constexpr double kTimelineTolerance = 1e-3 + 1e-9;

void check_timelines(const Annotation& reference, const Annotation& hypothesis, const char* what) {
    if (reference.empty() || hypothesis.empty()) throw Error(std::string(what) + ": empty annotation");
    if (std::abs(reference.start() - hypothesis.start()) > kTimelineTolerance ||
        std::abs(reference.end() - hypothesis.end()) > kTimelineTolerance) {
        throw Error(std::string(what) + ": reference and hypothesis cover different timelines");
    }
}

struct Piece {
    double duration;
    std::optional<std::string> ref;
    std::optional<std::string> hyp;
    bool scored;
};

// Elementary intervals on which both annotations (and the collar mask) are constant.
std::vector<Piece> pieces(const Annotation& reference, const Annotation& hypothesis, double collar) {
    const double lo = std::min(reference.start(), hypothesis.start());
    const double hi = std::max(reference.end(), hypothesis.end());

    std::vector<double> boundaries;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const Segment& s = reference.segments()[i];
        boundaries.push_back(s.start);
        boundaries.push_back(s.end);
    }
    std::sort(boundaries.begin(), boundaries.end());
    boundaries.erase(std::unique(boundaries.begin(), boundaries.end()), boundaries.end());
    // Timeline edges are not change points.
    std::erase_if(boundaries, [&](double b) { return b <= reference.start() || b >= reference.end(); });

    std::vector<std::pair<double, double>> zones;
    if (collar > 0.0) {
        for (double b : boundaries) zones.emplace_back(std::max(lo, b - collar), std::min(hi, b + collar));
    }

    std::vector<double> points = {lo, hi};
    for (const auto* ann : {&reference, &hypothesis}) {
        for (const auto& s : ann->segments()) {
            points.push_back(s.start);
            points.push_back(s.end);
        }
    }
    for (const auto& [a, b] : zones) {
        points.push_back(a);
        points.push_back(b);
    }
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());

    std::vector<Piece> out;
    out.reserve(points.size());
    std::size_t zone = 0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        const double a = points[i], b = points[i + 1];
        const double mid = 0.5 * (a + b);
        while (zone < zones.size() && zones[zone].second <= mid) ++zone;
        bool scored = true;
        for (std::size_t z = zone; z < zones.size() && zones[z].first < mid; ++z) {
            if (mid > zones[z].first && mid < zones[z].second) {
                scored = false;
                break;
            }
        }
        out.push_back({b - a, reference.label_at(mid), hypothesis.label_at(mid), scored});
    }
    return out;
}

}  // namespace

std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weights) {
    const std::size_t rows = weights.size();
    if (rows == 0) return {};
    const std::size_t cols = weights.front().size();
    const std::size_t n = std::max(rows, cols);
    double top = 0.0;
    for (const auto& r : weights) {
        for (double w : r) top = std::max(top, w);
    }
    // Square cost matrix, 1-based for the potentials formulation.
    auto cost = [&](std::size_t i, std::size_t j) {
        if (i - 1 < rows && j - 1 < cols) return top - weights[i - 1][j - 1];
        return top;
    };
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> out(rows, -1);
    for (std::size_t j = 1; j <= n; ++j) {
        if (p[j] >= 1 && p[j] <= rows && j <= cols) out[p[j] - 1] = static_cast<int>(j - 1);
    }
    return out;
}

DerBreakdown der(const Annotation& reference, const Annotation& hypothesis, double collar) {
    check_timelines(reference, hypothesis, "der");
    if (collar < 0.0) throw Error("der: collar must be non-negative");
    const Annotation ref = reference.merged();
    const std::vector<Piece> ps = pieces(ref, hypothesis, collar);

    const std::vector<std::string> ref_labels = ref.label_set();
    const std::vector<std::string> hyp_labels = hypothesis.label_set();
    auto index_of = [](const std::vector<std::string>& v, const std::string& s) {
        return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), s) - v.begin());
    };

    std::vector<std::vector<double>> overlap(hyp_labels.size(), std::vector<double>(ref_labels.size(), 0.0));
    for (const Piece& p : ps) {
        if (p.scored && p.ref && p.hyp) overlap[index_of(hyp_labels, *p.hyp)][index_of(ref_labels, *p.ref)] += p.duration;
    }
    const std::vector<int> assign = max_weight_assignment(overlap);

    DerBreakdown out;
    for (std::size_t h = 0; h < hyp_labels.size(); ++h) {
        if (assign[h] >= 0 && overlap[h][static_cast<std::size_t>(assign[h])] > 0.0) {
            out.mapping[hyp_labels[h]] = ref_labels[static_cast<std::size_t>(assign[h])];
        }
    }
    for (const Piece& p : ps) {
        if (!p.scored) continue;
        if (p.ref) out.total_scored += p.duration;
        if (p.ref && !p.hyp) {
            out.missed += p.duration;
        } else if (!p.ref && p.hyp) {
            out.false_alarm += p.duration;
        } else if (p.ref && p.hyp) {
            const auto it = out.mapping.find(*p.hyp);
            if (it == out.mapping.end() || it->second != *p.ref) out.confusion += p.duration;
        }
    }
    out.der = out.total_scored > 0.0 ? (out.missed + out.false_alarm + out.confusion) / out.total_scored : 0.0;
    return out;
}

double purity(const Annotation& reference, const Annotation& clustering) {
    check_timelines(reference, clustering, "purity");
    std::map<std::string, std::map<std::string, double>> table;
    for (const Piece& p : pieces(reference, clustering, 0.0)) {
        if (p.ref && p.hyp) table[*p.hyp][*p.ref] += p.duration;
    }
    double dominant = 0.0, total = 0.0;
    for (const auto& [cluster, row] : table) {
        double best = 0.0;
        for (const auto& [label, d] : row) {
            best = std::max(best, d);
            total += d;
        }
        dominant += best;
    }
    if (total <= 0.0) throw Error("purity: no overlapping labeled duration");
    return dominant / total;
}

double purity(const Annotation& reference, const ClusterState& state, const std::vector<Segment>& segments) {
    if (segments.size() != state.assignment.size()) throw Error("purity: segment count mismatch");
    Annotation clustering;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        clustering.push_back(Segment{segments[i].start, segments[i].end, "C" + std::to_string(state.assignment[i])});
    }
    return purity(reference, clustering);
}

double accuracy(const Annotation& reference, const Annotation& labeled_hypothesis) {
    check_timelines(reference, labeled_hypothesis, "accuracy");
    double correct = 0.0, total = 0.0;
    for (const Piece& p : pieces(reference, labeled_hypothesis, 0.0)) {
        if (!p.ref) continue;
        total += p.duration;
        if (p.hyp && *p.hyp == *p.ref) correct += p.duration;
    }
    if (total <= 0.0) throw Error("accuracy: reference has no labeled duration");
    return 100.0 * correct / total;
}

double sdr(std::span<const double> estimate, std::span<const double> source) {
    if (estimate.size() != source.size()) throw Error("sdr: estimate and source lengths differ");
    double ss = 0.0, es = 0.0, ee = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
        ss += source[i] * source[i];
        es += estimate[i] * source[i];
        ee += estimate[i] * estimate[i];
    }
    if (ss <= 0.0) throw Error("sdr: source is all zeros");
    const double alpha = es / ss;
    double target = 0.0, residual = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
        const double t = alpha * source[i];
        target += t * t;
        residual += (estimate[i] - t) * (estimate[i] - t);
    }
    if (ee <= 0.0 || target <= 0.0) return -kSdrCap;
    if (residual <= 0.0) return kSdrCap;
    return std::clamp(10.0 * std::log10(target / residual), -kSdrCap, kSdrCap);
}

double global_sdr(std::span<const SdrSegment> segments) {
    if (segments.empty()) throw Error("global_sdr: no segments");
    double weighted = 0.0, total = 0.0;
    for (const SdrSegment& s : segments) {
        if (s.duration < 0.0) throw Error("global_sdr: negative duration");
        weighted += s.duration * sdr(s.estimate, s.source);
        total += s.duration;
    }
    if (total <= 0.0) throw Error("global_sdr: zero total duration");
    return weighted / total;
}

}  // namespace tanisep
