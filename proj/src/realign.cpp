#include <algorithm>
#include <cmath>
#include <limits>

#include "tanisep/audio.hpp"
#include "tanisep/ib.hpp"

namespace tanisep {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

GaussianMixture fit_cluster_model(const FeatureMatrix& features, const std::vector<Eigen::Index>& frames,
                                  const RealignConfig& cfg, std::uint64_t seed) {
    const FeatureMatrix data = features.select_rows(frames);
    EmOptions opts;
    opts.k = static_cast<Eigen::Index>(frames.size()) >= 10 * cfg.components ? cfg.components : 1;
    opts.max_iters = cfg.em_iters;
    opts.seed = seed;
    return fit_em(data, opts);
}

// Viterbi over a minimum-duration topology: each cluster is a chain of
// `min_frames` states whose last state carries the self-loop.
std::vector<int> decode(const Eigen::MatrixXd& emissions, int min_frames, double switch_prob) {
    const Eigen::Index frames = emissions.rows();
    const int clusters = static_cast<int>(emissions.cols());
    const int d = std::max(1, min_frames);
    const int states = clusters * d;
    const double log_stay = std::log(1.0 - switch_prob);
    const double log_switch = clusters > 1 ? std::log(switch_prob / (clusters - 1)) : kNegInf;

    std::vector<double> score(static_cast<std::size_t>(states), kNegInf), next(score.size());
    std::vector<int> back(static_cast<std::size_t>(frames * states), -1);
    for (int c = 0; c < clusters; ++c) score[static_cast<std::size_t>(c * d)] = emissions(0, c);

    for (Eigen::Index t = 1; t < frames; ++t) {
        int* bp = back.data() + t * states;
        for (int c = 0; c < clusters; ++c) {
            const double e = emissions(t, c);
            // Entry state: switch in from the exit state of another cluster.
            double best = kNegInf;
            int arg = -1;
            for (int o = 0; o < clusters; ++o) {
                if (o == c) continue;
                const double v = score[static_cast<std::size_t>(o * d + d - 1)] + log_switch;
                if (v > best) {
                    best = v;
                    arg = o * d + d - 1;
                }
            }
            if (d == 1) {
                const double stay = score[static_cast<std::size_t>(c * d)] + log_stay;
                if (stay >= best) {
                    best = stay;
                    arg = c * d;
                }
                next[static_cast<std::size_t>(c * d)] = best + e;
                bp[c * d] = arg;
                continue;
            }
            next[static_cast<std::size_t>(c * d)] = best + e;
            bp[c * d] = arg;
            for (int k = 1; k < d - 1; ++k) {
                next[static_cast<std::size_t>(c * d + k)] = score[static_cast<std::size_t>(c * d + k - 1)] + e;
                bp[c * d + k] = c * d + k - 1;
            }
            const double advance = score[static_cast<std::size_t>(c * d + d - 2)];
            const double stay = score[static_cast<std::size_t>(c * d + d - 1)] + log_stay;
            if (stay >= advance) {
                next[static_cast<std::size_t>(c * d + d - 1)] = stay + e;
                bp[c * d + d - 1] = c * d + d - 1;
            } else {
                next[static_cast<std::size_t>(c * d + d - 1)] = advance + e;
                bp[c * d + d - 1] = c * d + d - 2;
            }
        }
        std::swap(score, next);
    }

    int state = static_cast<int>(std::max_element(score.begin(), score.end()) - score.begin());
    std::vector<int> path(static_cast<std::size_t>(frames));
    for (Eigen::Index t = frames - 1; t >= 0; --t) {
        path[static_cast<std::size_t>(t)] = state / d;
        if (t > 0) state = back[static_cast<std::size_t>(t * states + state)];
    }
    return path;
}

}  // namespace

Annotation realign(const FeatureMatrix& features, const std::vector<Segment>& segments, const ClusterState& state,
                   const RealignConfig& cfg) {
    const std::vector<int> ids = state.live_ids();
    if (ids.empty()) throw Error("realign: no clusters");
    if (features.empty() || segments.empty()) throw Error("realign: empty input");
    const double total = segments.back().end;
    const auto nclusters = static_cast<int>(ids.size());

    auto label_of = [](int c) { return "C" + std::to_string(c); };

    if (nclusters == 1) {
        Annotation out;
        out.push_back(Segment{segments.front().start, total, label_of(0)});
        return out;
    }

    // Initial frame labels from the segment clustering.
    const std::vector<int> compact = state.compact_assignment();
    const auto seg_frames = frames_per_segment(features, segments);
    std::vector<int> labels(static_cast<std::size_t>(features.rows()), -1);
    for (std::size_t s = 0; s < segments.size(); ++s) {
        for (Eigen::Index f : seg_frames[s]) labels[static_cast<std::size_t>(f)] = compact[s];
    }

    double hop = 0.01;
    if (features.rows() > 1) hop = features.frame_times[1] - features.frame_times[0];
    const int min_frames = std::max(1, static_cast<int>(std::lround(cfg.min_dur / hop)));

    std::vector<GaussianMixture> models(static_cast<std::size_t>(nclusters));
    for (int pass = 0; pass < std::max(1, cfg.passes); ++pass) {
        std::vector<std::vector<Eigen::Index>> frames(static_cast<std::size_t>(nclusters));
        for (Eigen::Index f = 0; f < features.rows(); ++f) {
            const int l = labels[static_cast<std::size_t>(f)];
            if (l >= 0) frames[static_cast<std::size_t>(l)].push_back(f);
        }
        for (int c = 0; c < nclusters; ++c) {
            // A cluster that lost all frames keeps its previous model (or none).
            if (frames[static_cast<std::size_t>(c)].empty()) continue;
            models[static_cast<std::size_t>(c)] =
                fit_cluster_model(features, frames[static_cast<std::size_t>(c)], cfg,
                                  cfg.seed + static_cast<std::uint64_t>(c));
        }

        Eigen::MatrixXd emissions(features.rows(), nclusters);
        for (int c = 0; c < nclusters; ++c) {
            const GaussianMixture& m = models[static_cast<std::size_t>(c)];
            if (m.fitted()) {
                emissions.col(c) = frame_log_likelihoods(m, features.values);
            } else {
                emissions.col(c).setConstant(kNegInf);
            }
        }
        labels = decode(emissions, min_frames, cfg.switch_prob);
    }

    Annotation out;
    double start = segments.front().start;
    for (Eigen::Index f = 1; f <= features.rows(); ++f) {
        const auto uf = static_cast<std::size_t>(f);
        if (f < features.rows() && labels[uf] == labels[uf - 1]) continue;
        const double end = f < features.rows() ? 0.5 * (features.frame_times[uf - 1] + features.frame_times[uf])
                                               : total;
        if (end > start) out.push_back(Segment{start, end, label_of(labels[uf - 1])});
        start = end;
    }
    return out.merged();
}

}  // namespace tanisep
