#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "tanisep/annotation.hpp"
#include "tanisep/audio.hpp"
#include "tanisep/ib.hpp"

namespace tanisep {

struct DerBreakdown {
    double missed = 0.0;
    double false_alarm = 0.0;
    double confusion = 0.0;
    double total_scored = 0.0;
    double der = 0.0;
    // Hypothesis label -> reference label chosen by the optimal assignment.
    std::map<std::string, std::string> mapping;
};

// Diarization error rate. Regions within +/- collar of every internal
// reference boundary are not scored. Hypothesis labels are mapped one-to-one
// onto reference labels so as to maximise matched duration; OVERLAP is an
// ordinary label.
DerBreakdown der(const Annotation& reference, const Annotation& hypothesis, double collar = 0.15);

// Duration-weighted cluster purity of the hypothesis labels against the reference.
double purity(const Annotation& reference, const Annotation& clustering);

// Purity of a segment clustering; segments[i] belongs to state.assignment[i].
double purity(const Annotation& reference, const ClusterState& state, const std::vector<Segment>& segments);

// Percentage of reference duration whose hypothesis label equals the reference label.
double accuracy(const Annotation& reference, const Annotation& labeled_hypothesis);

inline constexpr double kSdrCap = 100.0;

// Scale-invariant SDR: the estimate is projected onto the source; the
// residual is the distortion. Capped at +100 dB.
double sdr(std::span<const double> estimate, std::span<const double> source);

inline double sdr(const AudioBuffer& estimate, const AudioBuffer& source) {
    return sdr(std::span<const double>(estimate.samples), std::span<const double>(source.samples));
}

struct SdrSegment {
    std::span<const double> estimate;
    std::span<const double> source;
    double duration = 0.0;
};

// Length-weighted mean of per-segment SDR.
double global_sdr(std::span<const SdrSegment> segments);

struct SdrReport {
    struct Entry {
        double duration = 0.0;
        std::vector<double> sdr_db;  // one per source
    };
    std::vector<Entry> per_segment;
    std::vector<double> global_sdr;  // one per source
};

// Maximum-weight one-to-one assignment of rows to columns. Returns, for each
// row, the assigned column or -1.
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weights);

}  // namespace tanisep
