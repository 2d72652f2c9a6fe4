#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace mks::cli {

using Json = nlohmann::ordered_json;

/// JSON value for a real; non-finite values become the strings inf/-inf/nan.
Json real(double v);

/// One table plus a config echo and a summary block. CSV output is
///   # config {...}
///   header
///   rows
///   # summary {...}
/// and JSON output is a single document holding the same data.
class Report {
public:
    Report(std::string command, Json config);

    void set_columns(std::vector<std::string> columns) { columns_ = std::move(columns); }
    void add_row(std::vector<Json> cells);
    Json& summary() { return summary_; }

    std::string render(const std::string& format) const;
    /// Writes to `path`, or stdout when it is empty or "-".
    void write(const std::string& format, const std::string& path) const;

private:
    std::string command_;
    Json config_;
    std::vector<std::string> columns_;
    std::vector<std::vector<Json>> rows_;
    Json summary_ = Json::object();
};

} // namespace mks::cli
