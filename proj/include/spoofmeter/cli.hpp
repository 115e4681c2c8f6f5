#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace spoofmeter::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kInternalError = 2 };

/// Runs one subcommand (gen-synth, train-head, predict, fuse, evaluate,
/// report). Results go to files or `out`; diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Where a resolved seed came from, in priority order.
struct ResolvedSeed {
  std::uint64_t value = 0;
  std::string source;  // "flag", "manifest", "env" or "default"
};

/// --seed, then an explicit manifest seed, then SPOOFMETER_SEED, then 0.
ResolvedSeed resolve_seed(std::optional<std::uint64_t> flag,
                          std::optional<std::uint64_t> manifest_seed);

}  // namespace spoofmeter::cli
