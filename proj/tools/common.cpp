#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "commands.hpp"

namespace mks::cli {

void add_common(CLI::App& sub, CommonOptions& common, bool with_seed) {
    sub.add_option("--format", common.format, "Output format")->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    sub.add_option("--out", common.out, "Output file (default: stdout)");
    if (with_seed) sub.add_option("--seed", common.seed, "RNG seed")->capture_default_str();
}

std::string path_echo(const std::string& path) {
    if (path.empty()) return path;
    return std::filesystem::path(path).filename().string();
}

Range parse_range(const std::string& text) {
    std::vector<double> parts;
    std::stringstream ss(text);
    for (std::string tok; std::getline(ss, tok, ':');) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            used = std::string::npos;
        }
        if (used != tok.size()) throw CLI::ValidationError("--range", "bad number '" + tok + "' in '" + text + "'");
        parts.push_back(v);
    }
    if (parts.size() != 3) throw CLI::ValidationError("--range", "expected lo:hi:step, got '" + text + "'");
    if (!(parts[2] > 0.0) || !(parts[1] >= parts[0]))
        throw CLI::ValidationError("--range", "need step > 0 and lo <= hi");
    return {parts[0], parts[1], parts[2]};
}

} // namespace mks::cli
