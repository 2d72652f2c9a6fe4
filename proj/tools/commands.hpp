#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "report.hpp"

namespace mks::cli {

/// Nonzero exit codes.
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

struct CommonOptions {
    std::string format = "csv";
    std::string out;
    std::uint64_t seed = 42;
};

/// Adds --format, --out and (optionally) --seed to a subcommand.
void add_common(CLI::App& sub, CommonOptions& common, bool with_seed = true);

/// Echo of a path without its directories, so outputs carry no absolute paths.
std::string path_echo(const std::string& path);

struct Range {
    double lo = 0.0, hi = 0.0, step = 0.0;
};
/// Parses lo:hi:step.
Range parse_range(const std::string& text);

/// Every subcommand writes its exit code here.
using ExitCode = std::shared_ptr<int>;

void register_loss_commands(CLI::App& app, const ExitCode& code);   // loss-compare, gradcheck
void register_match_commands(CLI::App& app, const ExitCode& code);  // match, match-verify
void register_eval_commands(CLI::App& app, const ExitCode& code);   // eval
void register_image_commands(CLI::App& app, const ExitCode& code);  // sweep, gen-series, histogram
void register_tensor_commands(CLI::App& app, const ExitCode& code); // fuse-check, attn-demo

} // namespace mks::cli
