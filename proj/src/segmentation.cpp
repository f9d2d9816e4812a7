#include "tanisep/segmentation.hpp"

#include <cmath>

#include "tanisep/audio.hpp"

namespace tanisep {

std::vector<Segment> segment_fixed(double duration_total, double seg_len) {
    if (!(duration_total > 0.0)) throw Error("segment_fixed: duration must be positive");
    if (!(seg_len > 0.0)) throw Error("segment_fixed: segment length must be positive");

    // Boundaries are k * seg_len so long recordings do not accumulate drift.
    const auto count = static_cast<std::size_t>(std::max(1.0, std::ceil(duration_total / seg_len - 1e-9)));
    std::vector<Segment> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        Segment s;
        s.start = static_cast<double>(k) * seg_len;
        s.end = k + 1 == count ? duration_total : static_cast<double>(k + 1) * seg_len;
        out.push_back(s);
    }
    return out;
}

std::vector<Segment> segment_by_strokes(const OnsetList& onsets, double duration_total, int min_strokes) {
    if (!(duration_total > 0.0)) throw Error("segment_by_strokes: duration must be positive");
    if (min_strokes < 1) throw Error("segment_by_strokes: min_strokes must be at least 1");

    const auto& t = onsets.times;
    const auto m = static_cast<std::size_t>(min_strokes);
    std::vector<Segment> out;
    double start = 0.0;
    // Cut after every complete group of m onsets that is followed by another onset.
    for (std::size_t last = m - 1; last + 1 < t.size(); last += m) {
        const double cut = 0.5 * (t[last] + t[last + 1]);
        if (cut <= start || cut >= duration_total) continue;
        out.push_back(Segment{start, cut, std::nullopt});
        start = cut;
    }
    out.push_back(Segment{start, duration_total, std::nullopt});
    return out;
}

}  // namespace tanisep
