#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "tanisep/annotation.hpp"
#include "tanisep/features.hpp"
#include "tanisep/gmm.hpp"

namespace tanisep {

struct IdentificationModels {
    GaussianMixture overlap_model;
    GaussianMixture ghatam_model;
};

struct IdentifyConfig {
    // Skip the overlap level; every cluster is a solo voice.
    bool solo_only = false;
    // Two-cluster fallback: log-likelihood ratio (ghatam - overlap) above which
    // the remaining cluster is GHATAM.
    double llr_threshold = 0.0;
};

// Cluster label -> {MRIDANGAM, GHATAM, OVERLAP}.
using LabeledClustering = std::map<std::string, std::string>;

struct ClusterScores {
    double overlap = 0.0;  // mean per-frame log-likelihood under the overlap model
    double ghatam = 0.0;
    std::size_t frames = 0;
};

// Frame-pooled cluster scores; frames are assigned to the hypothesis label
// covering their centre time.
std::map<std::string, ClusterScores> score_clusters(const Annotation& hypothesis, const FeatureMatrix& features,
                                                    const IdentificationModels& models);

// Two-level identification: the cluster most likely under the overlap model
// is OVERLAP; of the rest, the one most likely under the ghatam model is
// GHATAM; whatever remains is MRIDANGAM. No mridangam model is consulted.
LabeledClustering identify(const Annotation& hypothesis, const FeatureMatrix& features,
                           const IdentificationModels& models, const IdentifyConfig& cfg = {});

LabeledClustering identify_from_scores(const std::map<std::string, ClusterScores>& scores,
                                       const IdentifyConfig& cfg = {});

// Applies the labeling and joins adjacent segments with equal labels.
Annotation apply_labels(const Annotation& hypothesis, const LabeledClustering& labels);

void save_identification_models(const std::filesystem::path& path, const IdentificationModels& models);
IdentificationModels load_identification_models(const std::filesystem::path& path);

}  // namespace tanisep
