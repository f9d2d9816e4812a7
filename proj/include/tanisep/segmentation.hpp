#pragma once

#include <vector>

#include "tanisep/annotation.hpp"
#include "tanisep/onset.hpp"

namespace tanisep {

// Contiguous cover of [0, duration_total] with seg_len pieces; the last one
// may be shorter.
std::vector<Segment> segment_fixed(double duration_total, double seg_len = 2.0);

// Varying-length segments holding min_strokes onsets each (half-open
// intervals), cut at the midpoint between the last onset of one segment and
// the first onset of the next. The final segment takes the remainder.
// Fewer than min_strokes onsets gives one segment covering everything.
std::vector<Segment> segment_by_strokes(const OnsetList& onsets, double duration_total,
                                        int min_strokes = 15);

}  // namespace tanisep
