#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "genbench/keyvalue.hpp"
#include "genbench/models.hpp"
#include "genbench/training.hpp"

namespace genbench {

inline constexpr std::string_view kVersion = "1.0.0";
inline constexpr std::string_view kRevision = "1";

/// Fully resolved invocation. `resolved` holds every setting the subcommand
/// reads, after applying defaults, then the config file, then flags.
struct RunConfig {
  std::string command;
  KeyValue resolved;
  KeyValue from_file;
  KeyValue from_flags;
  std::filesystem::path config_path;
  bool force = false;
  unsigned jobs = 1;
  bool show_version = false;
  /// Non-empty when --help was requested.
  std::string help;
};

/// Throws Error(Usage) for unknown flags, malformed or conflicting values.
RunConfig parse_args(const std::vector<std::string>& args);

/// Runs the subcommand and returns the process exit code: 0 ok, 1 numerical
/// or training failure, 2 usage or I/O. Errors are reported on `err`.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// parse_args + run with error reporting; what main() calls.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "1..8", "2,4", "1,3..5".
std::vector<int> parse_int_list(const std::string& text);

/// Builds the training configuration for `kind` from resolved settings.
TrainConfig training_config_from(ModelKind kind, const KeyValue& resolved);

}  // namespace genbench
