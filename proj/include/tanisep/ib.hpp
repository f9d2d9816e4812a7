#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "tanisep/annotation.hpp"
#include "tanisep/features.hpp"
#include "tanisep/gmm.hpp"

namespace tanisep {

// Relevance representation of the initial segments: row i is p(y | x_i),
// the distribution over GMM components; p_x weights segments by frame count.
struct PosteriorTable {
    Eigen::MatrixXd p_y_given_x;  // segments x components
    Eigen::VectorXd p_x;

    Eigen::Index segments() const { return p_y_given_x.rows(); }
    Eigen::Index components() const { return p_y_given_x.cols(); }
    void validate() const;
};

PosteriorTable build_posterior_table(const GaussianMixture& gmm, const FeatureMatrix& features,
                                     const std::vector<Segment>& segments);

// Mutual information (nats) of a joint distribution given as a non-negative
// matrix summing to one. 0 log 0 is taken as 0.
double mutual_information(const Eigen::MatrixXd& joint);

// Weighted Jensen-Shannon divergence pi1 KL(p||m) + pi2 KL(q||m).
double js_divergence(const Eigen::Ref<const Eigen::VectorXd>& p, const Eigen::Ref<const Eigen::VectorXd>& q,
                     double pi1, double pi2);

struct MergeStep {
    int a = 0;  // surviving cluster id
    int b = 0;  // absorbed cluster id
    double cost = 0.0;
    double nmi = 0.0;  // after the merge
    int clusters = 0;  // after the merge
};

// Hard partition of the segments. Cluster ids are the smallest member segment
// index; entries of p_c / p_y_given_c for dead ids are zero.
struct ClusterState {
    std::vector<int> assignment;
    std::vector<bool> live;
    Eigen::VectorXd p_c;
    Eigen::MatrixXd p_y_given_c;
    std::vector<std::vector<int>> members;
    std::vector<MergeStep> merge_log;

    static ClusterState singletons(const PosteriorTable& table);

    int cluster_count() const;
    std::vector<int> live_ids() const;
    // Assignment relabelled to 0..k-1 in order of cluster id.
    std::vector<int> compact_assignment() const;
    void merge(int a, int b);
};

enum class StopRule {
    // Merge while clusters > max_clusters, or while the next merge keeps NMI >= threshold.
    threshold_or_cap,
    // Merge while clusters > max_clusters and the next merge keeps NMI >= threshold.
    cap_and_threshold,
};

struct IBConfig {
    double beta = 10.0;
    double nmi_threshold = 0.4;
    int max_clusters = 3;
    StopRule stop_rule = StopRule::cap_and_threshold;
};

// Decrease of F = I(Y;C) - I(C;X)/beta caused by merging clusters a and b.
double merge_cost(const ClusterState& state, int a, int b, double beta);

// I(Y;C) of the current partition.
double relevance_information(const ClusterState& state);

// I(Y;C) / I(X;Y); 1 when the table carries no relevance information.
double normalized_mutual_information(const ClusterState& state, const PosteriorTable& table);

// Greedy bottom-up merging of the lowest-cost pair; ties go to the lowest (a, b).
ClusterState agglomerate(const PosteriorTable& table, const IBConfig& cfg = {});

void write_merge_log_csv(std::ostream& out, const ClusterState& state);

struct RealignConfig {
    double min_dur = 0.5;
    int components = 4;
    int passes = 2;
    double switch_prob = 1e-3;
    int em_iters = 20;
    std::uint64_t seed = 7;
};

// Refines cluster boundaries by Viterbi decoding over per-cluster GMMs with a
// minimum-duration topology. Labels are "C0", "C1", ... in cluster-id order.
Annotation realign(const FeatureMatrix& features, const std::vector<Segment>& segments,
                   const ClusterState& state, const RealignConfig& cfg = {});

// Frame index ranges per segment (frames are assigned by their centre time).
std::vector<std::vector<Eigen::Index>> frames_per_segment(const FeatureMatrix& features,
                                                          const std::vector<Segment>& segments);

}  // namespace tanisep
