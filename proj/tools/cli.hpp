// Command-line front end: inject, train, fit-bmm, eval, sweep, synth.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace denoise::cli {

enum ExitCode : int { kOk = 0, kUsageError = 1, kRuntimeError = 2 };

/// Runs one command; args excludes the program name. Returns the exit code.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

/// Parses a flat `key = value` config (`#` comments, blank lines ignored).
/// Throws std::invalid_argument on a malformed line.
std::map<std::string, std::string> parse_flat_config(const std::string& text);

/// Expands `--config FILE` into `--key=value` arguments placed before the
/// remaining command-line arguments, so explicit flags win.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

/// Seed for sweep cell (t0, beta) under `master`.
std::uint64_t sweep_cell_seed(std::uint64_t master, std::size_t t0, double beta);

}  // namespace denoise::cli
