#include "mks/records_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace mks {

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

namespace {

struct Line {
    std::size_t number;
    std::vector<std::string> fields;
};

std::vector<Line> tokenize(std::istream& is) {
    std::vector<Line> out;
    std::string text;
    std::size_t number = 0;
    while (std::getline(is, text)) {
        ++number;
        const auto first = text.find_first_not_of(" \t\r");
        if (first == std::string::npos || text[first] == '#') continue;
        std::istringstream ss(text);
        Line l{number, {}};
        for (std::string tok; ss >> tok;) l.fields.push_back(tok);
        out.push_back(std::move(l));
    }
    return out;
}

double to_real(const std::string& tok, const std::string& source, std::size_t line, const char* what) {
    double v = 0.0;
    const char* end = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw ParseError(source, line, std::string("bad ") + what + " '" + tok + "'");
    return v;
}

int to_int(const std::string& tok, const std::string& source, std::size_t line, const char* what) {
    int v = 0;
    const char* end = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw ParseError(source, line, std::string("bad ") + what + " '" + tok + "'");
    return v;
}

AABox to_box(const Line& l, std::size_t at, const std::string& source) {
    const double cx = to_real(l.fields[at], source, l.number, "cx");
    const double cy = to_real(l.fields[at + 1], source, l.number, "cy");
    const double w = to_real(l.fields[at + 2], source, l.number, "w");
    const double h = to_real(l.fields[at + 3], source, l.number, "h");
    try {
        return {cx, cy, w, h};
    } catch (const std::exception& e) {
        throw ParseError(source, l.number, e.what());
    }
}

void expect_fields(const Line& l, std::size_t lo, std::size_t hi, const std::string& source, const char* format) {
    if (l.fields.size() < lo || l.fields.size() > hi)
        throw ParseError(source, l.number,
                         "expected '" + std::string(format) + "', got " + std::to_string(l.fields.size()) + " fields");
}

constexpr const char* kDetFormat = "image_id class_id cx cy w h [confidence]";

DetectionRecord to_detection(const Line& l, const std::string& source) {
    expect_fields(l, 6, 7, source, kDetFormat);
    DetectionRecord d;
    d.image_id = l.fields[0];
    d.class_id = to_int(l.fields[1], source, l.number, "class_id");
    d.box = to_box(l, 2, source);
    if (l.fields.size() == 7) {
        d.confidence = to_real(l.fields[6], source, l.number, "confidence");
        if (!(d.confidence >= 0.0 && d.confidence <= 1.0))
            throw ParseError(source, l.number, "confidence must lie in [0, 1]");
    }
    return d;
}

template <class T, class F>
std::vector<T> read_file(const std::string& path, F parse) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return parse(is, path);
}

} // namespace

std::vector<BoxPair> parse_box_pairs(std::istream& is, const std::string& source) {
    std::vector<BoxPair> out;
    for (const auto& l : tokenize(is)) {
        expect_fields(l, 8, 8, source, "pcx pcy pw ph gcx gcy gw gh");
        out.push_back({to_box(l, 0, source), to_box(l, 4, source)});
    }
    return out;
}

std::vector<AABox> parse_boxes(std::istream& is, const std::string& source) {
    std::vector<AABox> out;
    for (const auto& l : tokenize(is)) {
        expect_fields(l, 4, 4, source, "cx cy w h");
        out.push_back(to_box(l, 0, source));
    }
    return out;
}

std::vector<DetectionRecord> parse_detections(std::istream& is, const std::string& source) {
    std::vector<DetectionRecord> out;
    for (const auto& l : tokenize(is)) out.push_back(to_detection(l, source));
    return out;
}

std::vector<LevelDetections> parse_level_detections(std::istream& is, const std::string& source) {
    std::map<double, std::vector<DetectionRecord>> by_level;
    for (const auto& l : tokenize(is)) {
        const double level = to_real(l.fields[0], source, l.number, "level");
        auto& bucket = by_level[level];
        if (l.fields.size() == 1) continue;
        bucket.push_back(to_detection(l, source));
    }
    std::vector<LevelDetections> out;
    for (auto& [level, dets] : by_level) out.push_back({level, std::move(dets)});
    return out;
}

std::vector<std::pair<double, Outcome>> parse_outcomes(std::istream& is, const std::string& source) {
    std::vector<std::pair<double, Outcome>> out;
    for (const auto& l : tokenize(is)) {
        expect_fields(l, 2, 2, source, "level outcome");
        const double level = to_real(l.fields[0], source, l.number, "level");
        try {
            out.emplace_back(level, parse_outcome(l.fields[1]));
        } catch (const std::invalid_argument& e) {
            throw ParseError(source, l.number, e.what());
        }
    }
    return out;
}

std::vector<BoxPair> read_box_pairs(const std::string& path) {
    return read_file<BoxPair>(path, [](std::istream& is, const std::string& s) { return parse_box_pairs(is, s); });
}
std::vector<AABox> read_boxes(const std::string& path) {
    return read_file<AABox>(path, [](std::istream& is, const std::string& s) { return parse_boxes(is, s); });
}
std::vector<DetectionRecord> read_detections(const std::string& path) {
    return read_file<DetectionRecord>(path,
                                      [](std::istream& is, const std::string& s) { return parse_detections(is, s); });
}
std::vector<LevelDetections> read_level_detections(const std::string& path) {
    return read_file<LevelDetections>(
        path, [](std::istream& is, const std::string& s) { return parse_level_detections(is, s); });
}
std::vector<std::pair<double, Outcome>> read_outcomes(const std::string& path) {
    return read_file<std::pair<double, Outcome>>(
        path, [](std::istream& is, const std::string& s) { return parse_outcomes(is, s); });
}

} // namespace mks
