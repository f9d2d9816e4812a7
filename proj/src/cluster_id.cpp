#include "tanisep/cluster_id.hpp"

#include <fstream>
#include <limits>

#include "tanisep/audio.hpp"

namespace tanisep {

std::map<std::string, ClusterScores> score_clusters(const Annotation& hypothesis, const FeatureMatrix& features,
                                                    const IdentificationModels& models) {
    if (!models.overlap_model.fitted() || !models.ghatam_model.fitted()) {
        throw Error("identify: identification models are not fitted");
    }
    const Eigen::VectorXd ll_overlap = frame_log_likelihoods(models.overlap_model, features.values);
    const Eigen::VectorXd ll_ghatam = frame_log_likelihoods(models.ghatam_model, features.values);

    std::map<std::string, ClusterScores> sums;
    for (const std::string& label : hypothesis.label_set()) sums[label];
    for (Eigen::Index f = 0; f < features.rows(); ++f) {
        const auto label = hypothesis.label_at(features.frame_times[static_cast<std::size_t>(f)]);
        if (!label) continue;
        ClusterScores& s = sums[*label];
        s.overlap += ll_overlap(f);
        s.ghatam += ll_ghatam(f);
        ++s.frames;
    }
    for (auto& [label, s] : sums) {
        if (s.frames == 0) continue;
        s.overlap /= static_cast<double>(s.frames);
        s.ghatam /= static_cast<double>(s.frames);
    }
    return sums;
}

LabeledClustering identify_from_scores(const std::map<std::string, ClusterScores>& all_scores,
                                       const IdentifyConfig& cfg) {
    std::map<std::string, ClusterScores> scores;
    for (const auto& [label, s] : all_scores) {
        if (s.frames > 0) scores.emplace(label, s);
    }
    if (scores.empty()) throw Error("identify: no cluster has frames");
    if (scores.size() > 3) {
        throw Error("identify: expected at most 3 clusters, got " + std::to_string(scores.size()));
    }

    constexpr double kLowest = std::numeric_limits<double>::lowest();
    auto argmax = [&](auto field) {
        std::string best;
        double value = kLowest;
        for (const auto& [label, s] : scores) {
            if (s.*field > value) {
                value = s.*field;
                best = label;
            }
        }
        return best;
    };

    LabeledClustering out;
    const bool with_overlap = !cfg.solo_only && scores.size() >= 2;
    if (with_overlap) {
        const std::string ov = argmax(&ClusterScores::overlap);
        out[ov] = labels::overlap;
        scores.erase(ov);
    }
    if (scores.size() >= 2) {
        const std::string gh = argmax(&ClusterScores::ghatam);
        out[gh] = labels::ghatam;
        scores.erase(gh);
        for (const auto& [label, s] : scores) out[label] = labels::mridangam;
    } else {
        // A single remaining cluster is resolved by the ghatam-vs-overlap ratio.
        const auto& [label, s] = *scores.begin();
        out[label] = s.ghatam - s.overlap > cfg.llr_threshold ? labels::ghatam : labels::mridangam;
    }
    return out;
}

LabeledClustering identify(const Annotation& hypothesis, const FeatureMatrix& features,
                           const IdentificationModels& models, const IdentifyConfig& cfg) {
    return identify_from_scores(score_clusters(hypothesis, features, models), cfg);
}

Annotation apply_labels(const Annotation& hypothesis, const LabeledClustering& mapping) {
    std::vector<std::pair<std::string, std::string>> pairs(mapping.begin(), mapping.end());
    return hypothesis.relabeled(pairs).merged();
}

void save_identification_models(const std::filesystem::path& path, const IdentificationModels& models) {
    nlohmann::json j;
    j["format"] = "tanisep-identification-models";
    j["version"] = 1;
    j["overlap"] = to_json(models.overlap_model);
    j["ghatam"] = to_json(models.ghatam_model);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("identify: cannot write " + path.string());
    out << j.dump(1) << '\n';
}

IdentificationModels load_identification_models(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("identify: cannot open " + path.string());
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.value("format", "") != "tanisep-identification-models" || j.value("version", 0) != 1) {
        throw Error("identify: unsupported model file " + path.string());
    }
    return {gmm_from_json(j.at("overlap")), gmm_from_json(j.at("ghatam"))};
}

}  // namespace tanisep
