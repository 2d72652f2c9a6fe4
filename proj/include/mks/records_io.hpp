#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mks/boxgeom.hpp"
#include "mks/evalmetrics.hpp"
#include "mks/robustness.hpp"

namespace mks {

/// Parse failure with the 1-based line it occurred on.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// All line formats are whitespace separated. Blank lines and lines starting
// with '#' are skipped.

struct BoxPair {
    AABox pred;
    AABox gt;
};

/// `pcx pcy pw ph gcx gcy gw gh`
std::vector<BoxPair> parse_box_pairs(std::istream& is, const std::string& source = "<input>");
/// `cx cy w h`
std::vector<AABox> parse_boxes(std::istream& is, const std::string& source = "<input>");
/// `image_id class_id cx cy w h [confidence]`; confidence defaults to 1.
std::vector<DetectionRecord> parse_detections(std::istream& is, const std::string& source = "<input>");

/// Detections keyed by level: the image id is the level. A line holding only
/// an image id marks a level that was run without producing detections.
struct LevelDetections {
    double level = 0.0;
    std::vector<DetectionRecord> detections;
};
std::vector<LevelDetections> parse_level_detections(std::istream& is, const std::string& source = "<input>");

/// `level outcome` with outcome one of clean, miss, fail.
std::vector<std::pair<double, Outcome>> parse_outcomes(std::istream& is, const std::string& source = "<input>");

std::vector<BoxPair> read_box_pairs(const std::string& path);
std::vector<AABox> read_boxes(const std::string& path);
std::vector<DetectionRecord> read_detections(const std::string& path);
std::vector<LevelDetections> read_level_detections(const std::string& path);
std::vector<std::pair<double, Outcome>> read_outcomes(const std::string& path);

} // namespace mks
