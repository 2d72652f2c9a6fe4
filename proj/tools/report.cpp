#include "report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace mks::cli {

Json real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

Report::Report(std::string command, Json config) : command_(std::move(command)), config_(std::move(config)) {}

void Report::add_row(std::vector<Json> cells) {
    if (cells.size() != columns_.size()) throw std::logic_error("report row width does not match the header");
    rows_.push_back(std::move(cells));
}

namespace {

std::string csv_cell(const Json& v) {
    if (v.is_number_float()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.12g", v.get<double>());
        return buf;
    }
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    }
    if (v.is_null()) return "";
    return v.dump();
}

} // namespace

std::string Report::render(const std::string& format) const {
    std::ostringstream os;
    if (format == "csv") {
        Json cfg = {{"command", command_}};
        cfg.update(config_);
        os << "# config " << cfg.dump() << '\n';
        for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
        os << '\n';
        for (const auto& row : rows_) {
            for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_cell(row[i]);
            os << '\n';
        }
        os << "# summary " << summary_.dump() << '\n';
    } else if (format == "json") {
        Json doc = {{"command", command_}, {"config", config_}};
        Json rows = Json::array();
        for (const auto& row : rows_) {
            Json obj = Json::object();
            for (std::size_t i = 0; i < row.size(); ++i) obj[columns_[i]] = row[i];
            rows.push_back(std::move(obj));
        }
        doc["rows"] = std::move(rows);
        doc["summary"] = summary_;
        os << doc.dump(2) << '\n';
    } else {
        throw std::invalid_argument("unknown format '" + format + "'");
    }
    return os.str();
}

void Report::write(const std::string& format, const std::string& path) const {
    const std::string text = render(format);
    if (path.empty() || path == "-") {
        std::cout << text << std::flush;
        return;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << text;
    if (!os) throw std::runtime_error(path + ": write failed");
}

} // namespace mks::cli
