#include "tanisep/annotation.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "tanisep/audio.hpp"

namespace tanisep {

Annotation::Annotation(std::vector<Segment> segments) : segments_(std::move(segments)) { validate(); }

double Annotation::start() const { return segments_.empty() ? 0.0 : segments_.front().start; }

double Annotation::end() const { return segments_.empty() ? 0.0 : segments_.back().end; }

double Annotation::labeled_duration() const {
    double total = 0.0;
    for (const auto& s : segments_) {
        if (s.label) total += s.duration();
    }
    return total;
}

void Annotation::push_back(Segment s) {
    if (!(s.start < s.end)) throw Error("annotation: segment must have start < end");
    if (!segments_.empty() && s.start < segments_.back().end) {
        throw Error("annotation: segments must be time-ordered and non-overlapping");
    }
    segments_.push_back(std::move(s));
}

std::optional<std::string> Annotation::label_at(double t) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](double v, const Segment& s) { return v < s.start; });
    if (it == segments_.begin()) return std::nullopt;
    --it;
    if (it->contains(t)) return it->label;
    return std::nullopt;
}

std::vector<std::string> Annotation::label_set() const {
    std::set<std::string> seen;
    for (const auto& s : segments_) {
        if (s.label) seen.insert(*s.label);
    }
    return {seen.begin(), seen.end()};
}

Annotation Annotation::merged() const {
    Annotation out;
    for (const auto& s : segments_) {
        if (!out.segments_.empty()) {
            Segment& last = out.segments_.back();
            if (last.end == s.start && last.label == s.label) {
                last.end = s.end;
                continue;
            }
        }
        out.segments_.push_back(s);
    }
    return out;
}

Annotation Annotation::relabeled(const std::vector<std::pair<std::string, std::string>>& mapping) const {
    Annotation out = *this;
    for (auto& s : out.segments_) {
        if (!s.label) continue;
        for (const auto& [from, to] : mapping) {
            if (*s.label == from) {
                s.label = to;
                break;
            }
        }
    }
    return out;
}

void Annotation::validate() const {
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const Segment& s = segments_[i];
        if (!(s.start < s.end) || s.start < 0.0) {
            throw Error("annotation: segment " + std::to_string(i) + " must satisfy 0 <= start < end");
        }
        if (i > 0 && s.start < segments_[i - 1].end) {
            throw Error("annotation: segments must be time-ordered and non-overlapping");
        }
    }
}

namespace {

std::int64_t to_ms(double seconds) { return std::llround(seconds * 1000.0); }

std::string format_ms(std::int64_t ms) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%" PRId64 ".%03" PRId64, ms / 1000, ms % 1000);
    return buf;
}

std::int64_t parse_ms(const std::string& token) {
    try {
        std::size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size()) throw Error("rttm: malformed time '" + token + "'");
        return to_ms(v);
    } catch (const std::logic_error&) {
        throw Error("rttm: malformed time '" + token + "'");
    }
}

}  // namespace

void write_rttm(std::ostream& out, const Annotation& ann, const std::string& file_id) {
    for (const auto& s : ann.segments()) {
        const std::int64_t start = to_ms(s.start);
        const std::int64_t dur = to_ms(s.end) - start;
        out << "SPEAKER " << file_id << " 1 " << format_ms(start) << ' ' << format_ms(dur) << " <NA> <NA> "
            << (s.label ? *s.label : std::string("<NA>")) << " <NA> <NA>\n";
    }
}

void write_rttm(const std::filesystem::path& path, const Annotation& ann, const std::string& file_id) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("rttm: cannot write " + path.string());
    write_rttm(out, ann, file_id);
    if (!out) throw Error("rttm: write failed for " + path.string());
}

Annotation read_rttm(std::istream& in) {
    std::vector<Segment> segs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        std::vector<std::string> tok;
        for (std::string t; fields >> t;) tok.push_back(t);
        if (tok.empty() || tok[0].starts_with(';') || tok[0].starts_with('#')) continue;
        if (tok.size() < 8 || tok[0] != "SPEAKER") {
            throw Error("rttm: malformed line " + std::to_string(line_no));
        }
        const std::int64_t start = parse_ms(tok[3]);
        const std::int64_t dur = parse_ms(tok[4]);
        if (dur <= 0) throw Error("rttm: non-positive duration on line " + std::to_string(line_no));
        Segment s;
        s.start = static_cast<double>(start) / 1000.0;
        s.end = static_cast<double>(start + dur) / 1000.0;
        if (tok[7] != "<NA>") s.label = tok[7];
        segs.push_back(std::move(s));
    }
    std::stable_sort(segs.begin(), segs.end(), [](const Segment& a, const Segment& b) { return a.start < b.start; });
    return Annotation(std::move(segs));
}

Annotation read_rttm(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("rttm: cannot open " + path.string());
    return read_rttm(in);
}

}  // namespace tanisep
