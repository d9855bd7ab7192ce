#pragma once

// Command runner behind the resonant-homog executable. A run is described by a
// single JSON document (see README for the schema); every numeric field is
// checked before any computation starts, and every artifact is written to a
// temporary file that is renamed into place once complete.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rh/common.hpp"
#include "rh/laws.hpp"

namespace rh {

enum ExitCode : int {
  kExitOk = 0,
  kExitUnexpected = 1,
  kExitConfig = 2,
  kExitHypothesis = 3,
  kExitNumerical = 4,
};

// Malformed or out-of-range configuration; `path` locates the offending field
// (for example "laws[1].radius.uniform").
class ConfigError : public DomainError {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : DomainError(path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// The law violates the well-posedness hypotheses at some requested k0.
class HypothesisViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> commands{"mu-sweep", "mu-limit", "eps-eff", "sample", "scatter", "validate"};
  return commands;
}

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides numerics.seed
  bool force = false;
  std::filesystem::path out_dir = ".";
};

struct RunResult {
  int exit_code = kExitOk;
  std::string message;                      // diagnostic for non-zero exits
  std::vector<std::filesystem::path> files;  // artifacts written, in order
};

// `command` must match config["command"] when the latter is present.
RunResult run(const std::string& command, const nlohmann::json& config, const RunOptions& options);
RunResult run_file(const std::string& command, const std::filesystem::path& config_path, const RunOptions& options);

// Pieces exposed for testing.
ComponentLaw parse_component(const nlohmann::json& j, const std::string& path);
RodLaw parse_law(const nlohmann::json& j, const std::string& path);
std::vector<double> parse_k0_grid(const nlohmann::json& j, const std::string& path);
std::uint64_t config_digest(const nlohmann::json& config);

// Writes `content` to `path` through a temporary file and a rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

// Formats with 17 significant digits, so values survive a text round trip.
std::string format_double(double v);

}  // namespace rh
