#pragma once

// Run configuration: a versioned YAML document plus dotted --key=value
// overrides. See README.md for the schema.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgectl/scenarios.hpp"

namespace edgectl {

inline constexpr int kSchemaVersion = 1;

/// Malformed or inconsistent configuration; the message names the file,
/// line and field where possible.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  Experiment exp;
  /// "default" for the shipped table, a CSV path, or "inline" when the
  /// table was embedded in the document.
  std::string profiles_source = "default";
  /// Placements to run; more than one when the document says "all".
  std::vector<Node> placements{Node::Edge};
  /// $EDGECTL_OUTPUT_DIR when set, else "out"; the document may override it.
  std::filesystem::path output_dir = "out";
  std::vector<std::uint64_t> seeds{1};
};

RunConfig default_run_config(ScenarioKind kind = ScenarioKind::Baseline);

/// Parses a document. Relative paths inside it resolve against base_dir.
/// Overrides look like "scenario.placement=aws"; the value is read as YAML.
RunConfig parse_config(const std::string& text, const std::string& origin,
                       const std::vector<std::string>& overrides = {},
                       const std::filesystem::path& base_dir = ".");
/// Throws ConfigError, or std::runtime_error if the file cannot be read.
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Fully resolved document for one placement and seed; feeding it back to
/// parse_config reproduces the run.
std::string emit_config(const RunConfig& cfg, Node placement, std::uint64_t seed);
/// Hex digest of emit_config.
std::string config_hash(const RunConfig& cfg, Node placement, std::uint64_t seed);

std::string summary_yaml(const RunConfig& cfg, Node placement, std::uint64_t seed, const RunResult& result,
                         const std::string& csv_name);

}  // namespace edgectl
