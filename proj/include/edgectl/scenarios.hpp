#pragma once

// The three experiments (baseline, random migration, tightened input
// bounds), per-sample metrics, box statistics and CSV output.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "edgectl/app.hpp"
#include "edgectl/control.hpp"
#include "edgectl/net.hpp"
#include "edgectl/plant.hpp"
#include "edgectl/runtime.hpp"
#include "edgectl/stats.hpp"

namespace edgectl {

enum class ScenarioKind : std::uint8_t { Baseline, Migration, Constrained };

std::string_view scenario_kind_name(ScenarioKind k);
std::optional<ScenarioKind> parse_scenario_kind(std::string_view name);

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::Baseline;
  Node placement = Node::Edge;  ///< MPC node; initial node for migration runs
  Duration duration = std::chrono::minutes(10);
  std::uint64_t master_seed = 1;
  double setpoint_low = 0.0;
  double setpoint_high = 0.30;
  Duration setpoint_period = std::chrono::seconds(60);
  Duration migration_period = std::chrono::seconds(10);
  /// Constrained runs replace the MPC input bounds with +-u_bound_tight.
  double u_bound_tight = 0.45;
  Duration respawn_delay = std::chrono::seconds(5);
};

/// Everything one simulation needs.
struct Experiment {
  ScenarioConfig scenario;
  PlantParams plant;
  MpcConfig mpc;
  Profiles profiles = default_profiles();
  /// Application graph; the standard one when empty.
  std::optional<GraphSpec> graph;
};

struct MetricRecord {
  SimTime t{};  ///< actuation time
  Node mpc_node = Node::Edge;
  Duration exec_time{};
  Duration latency{};  ///< ADC read to DAC apply
  LatencyParts parts;
  int iterations = 0;
  double u = 0.0;
  double u_sq = 0.0;
  double position = 0.0;
  double setpoint = 0.0;
  bool solved = true;
  bool off_beam = false;
  bool respawn = false;  ///< excluded from summaries
  std::optional<std::pair<Node, Node>> migration;
};

struct RunResult {
  std::vector<MetricRecord> records;
  std::vector<MigrationReport> migrations;
  std::uint64_t solver_failures = 0;
  std::optional<SimTime> first_off_beam;
  /// Setpoint in force when the ball first left the beam, and the time since
  /// the last setpoint change.
  std::optional<Duration> off_beam_after_setpoint_change;
  bool conservation_ok = true;
  /// Stale samples the MPC skipped because it was still busy.
  std::uint64_t overruns = 0;
  std::uint64_t events = 0;
};

/// Validates the experiment; throws std::invalid_argument describing the
/// first broken invariant.
void validate(const Experiment& exp);
/// All violations, one message each; empty when valid.
std::vector<std::string> check(const Experiment& exp);

/// The MPC settings a scenario actually runs with.
MpcConfig effective_mpc(const Experiment& exp);

RunResult run_baseline(const Experiment& exp);
RunResult run_migration(const Experiment& exp);
RunResult run_constrained(const Experiment& exp);
/// Dispatches on exp.scenario.kind.
RunResult run_scenario(const Experiment& exp);

enum class Column : std::uint8_t { ExecMs, LatencyMs, U, USq, Position };
std::string_view column_name(Column c);

/// Box statistics over records not flagged as respawn. Throws
/// std::invalid_argument when nothing is left.
BoxStats summarize(const std::vector<MetricRecord>& records, Column column);

void write_csv(const std::vector<MetricRecord>& records, std::ostream& out);
/// Throws std::runtime_error naming the path on I/O failure.
void emit_csv(const std::vector<MetricRecord>& records, const std::filesystem::path& path);

struct CalibrationResult {
  double overhead_median_ms = 0.0;
  double achieved_median_ms = 0.0;
  int evaluations = 0;
};

/// Searches the per-hop overhead median so that the Edge placement's median
/// control latency, pooled over `seeds`, hits target_ms.
CalibrationResult calibrate_overhead(Experiment base, double target_ms, const std::vector<std::uint64_t>& seeds,
                                     double tol_ms = 0.05);

}  // namespace edgectl
