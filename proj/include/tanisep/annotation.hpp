#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tanisep {

namespace labels {
inline constexpr const char* mridangam = "MRIDANGAM";
inline constexpr const char* ghatam = "GHATAM";
inline constexpr const char* overlap = "OVERLAP";
}  // namespace labels

// Half-open interval [start, end) in seconds.
struct Segment {
    double start = 0.0;
    double end = 0.0;
    std::optional<std::string> label;

    double duration() const { return end - start; }
    bool contains(double t) const { return t >= start && t < end; }
};

// Time-ordered, non-overlapping labeled intervals. Ground truth and
// hypotheses share this type.
class Annotation {
public:
    Annotation() = default;
    explicit Annotation(std::vector<Segment> segments);

    const std::vector<Segment>& segments() const { return segments_; }
    std::size_t size() const { return segments_.size(); }
    bool empty() const { return segments_.empty(); }

    double start() const;
    double end() const;
    double labeled_duration() const;

    // Appends a segment; it must start at or after the current end.
    void push_back(Segment s);

    // Label covering t, if any.
    std::optional<std::string> label_at(double t) const;

    std::vector<std::string> label_set() const;

    // Joins adjacent segments that touch and carry the same label.
    Annotation merged() const;

    // Replaces labels through a mapping; unmapped labels are kept.
    Annotation relabeled(const std::vector<std::pair<std::string, std::string>>& mapping) const;

    // Throws unless segments are sorted, non-overlapping and have start < end.
    void validate() const;

private:
    std::vector<Segment> segments_;
};

// RTTM lines: SPEAKER <file-id> 1 <start> <duration> <NA> <NA> <label> <NA> <NA>.
// Times are written in whole milliseconds with three decimals; start and end are
// rounded independently so contiguous segments stay contiguous after a round trip.
void write_rttm(std::ostream& out, const Annotation& ann, const std::string& file_id);
void write_rttm(const std::filesystem::path& path, const Annotation& ann, const std::string& file_id);
Annotation read_rttm(std::istream& in);
Annotation read_rttm(const std::filesystem::path& path);

}  // namespace tanisep
