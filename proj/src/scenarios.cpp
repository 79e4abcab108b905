#include "edgectl/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace edgectl {

std::string_view scenario_kind_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Baseline: return "baseline";
    case ScenarioKind::Migration: return "migration";
    case ScenarioKind::Constrained: return "constrained";
  }
  return "unknown";
}

std::optional<ScenarioKind> parse_scenario_kind(std::string_view name) {
  for (ScenarioKind k : {ScenarioKind::Baseline, ScenarioKind::Migration, ScenarioKind::Constrained}) {
    if (scenario_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

MpcConfig effective_mpc(const Experiment& exp) {
  MpcConfig m = exp.mpc;
  if (exp.scenario.kind == ScenarioKind::Constrained) {
    m.u_min = -exp.scenario.u_bound_tight;
    m.u_max = exp.scenario.u_bound_tight;
  }
  return m;
}

std::vector<std::string> check(const Experiment& exp) {
  std::vector<std::string> errs;
  const ScenarioConfig& s = exp.scenario;
  const PlantParams& p = exp.plant;
  const MpcConfig& m = exp.mpc;
  auto fail = [&](std::string msg) { errs.push_back(std::move(msg)); };

  if (!(p.beam_length > 0)) fail("plant.beam_length must be positive");
  if (!(p.alpha_max > 0)) fail("plant.alpha_max must be positive");
  if (!(p.u_min_hw < p.u_max_hw)) fail("plant hardware input range: u_min_hw must be below u_max_hw");
  if (p.sigma_pos < 0 || p.sigma_ang < 0 || p.sigma_proc < 0) fail("plant noise levels must be non-negative");

  if (m.h <= Duration::zero()) fail("mpc.h must be positive");
  if (m.horizon < 1) fail("mpc.horizon must be at least 1");
  if (!(m.u_min < m.u_max)) fail("bounds ordering: mpc.u_min must be below mpc.u_max");
  if (!(m.R > 0)) fail("mpc.R must be positive");
  if (!m.Q.isApprox(m.Q.transpose()) || Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(m.Q).eigenvalues().minCoeff() < 0) {
    fail("mpc.Q must be symmetric positive semidefinite");
  }
  if (!(m.tol > 0)) fail("mpc.tol must be positive");
  if (m.max_iter_cap < 1) fail("mpc.max_iter_cap must be at least 1");
  if (m.soft_penalty < 0) fail("mpc.soft_penalty must be non-negative");
  if (!(m.pos_bound > 0) || !(m.ang_bound > 0)) fail("mpc soft state bounds must be positive");

  if (s.duration < Duration::zero()) fail("scenario.duration must be non-negative");
  if (s.setpoint_period <= Duration::zero()) fail("scenario.setpoint_period must be positive");
  const double half = p.half_length();
  const double reach = std::max(std::abs(s.setpoint_low), std::abs(s.setpoint_high));
  if (s.kind == ScenarioKind::Constrained) {
    if (half - std::abs(s.setpoint_high) > 0.05 + 1e-12) {
      fail("constrained margin: scenario.setpoint_high must lie within 5 cm of the beam end");
    }
    if (reach >= half) fail("constrained margin: set-point must stay on the beam");
    if (!(s.u_bound_tight > 0)) fail("scenario.u_bound_tight must be positive");
    if (!(s.u_bound_tight < std::min(-m.u_min, m.u_max))) {
      fail("constrained bounds: scenario.u_bound_tight must tighten the baseline input bounds");
    }
  } else if (half - reach < 0.15 - 1e-12) {
    fail("set-point margin: set-points must stay at least 15 cm from the beam end");
  }
  if (s.kind == ScenarioKind::Migration) {
    if (s.migration_period <= Duration::zero()) fail("scenario.migration_period must be positive");
    if (exp.graph) {
      for (const ActorSpec& a : exp.graph->actors) {
        if (a.kind == ActorKind::Mpc && a.affinity) fail("migration: the MPC actor cannot carry an affinity");
      }
    }
  }
  if (s.respawn_delay < Duration::zero()) fail("scenario.respawn_delay must be non-negative");

  try {
    exp.profiles.validate();
  } catch (const std::exception& e) {
    fail(std::string("profiles: ") + e.what());
  }
  if (errs.empty()) {
    try {
      const Mpc probe(effective_mpc(exp), p);
    } catch (const std::exception& e) {
      fail(std::string("horizon conditioning: ") + e.what());
    }
  }
  return errs;
}

void validate(const Experiment& exp) {
  const auto errs = check(exp);
  if (!errs.empty()) throw std::invalid_argument(errs.front());
}

namespace {

struct RunOptions {
  bool migrate = false;
  bool stop_at_off_beam = false;
  bool respawn = true;
};

RunResult run_impl(const Experiment& exp, const RunOptions& opt) {
  validate(exp);
  const ScenarioConfig& sc = exp.scenario;
  Engine engine(sc.master_seed);
  Plant plant(exp.plant, engine.rng_stream("plant.process"));
  const Mpc mpc(effective_mpc(exp), exp.plant);
  ProfileDelivery delivery(exp.profiles, engine);
  Runtime rt(engine, delivery);
  RunResult res;

  AppEnv env;
  env.engine = &engine;
  env.plant = &plant;
  env.mpc = &mpc;
  env.profiles = &exp.profiles;
  env.setpoint_low = sc.setpoint_low;
  env.setpoint_high = sc.setpoint_high;
  env.run_id = sc.master_seed;

  std::optional<SimTime> respawn_at;
  env.on_actuate = [&](const Command& cmd, SimTime at, double applied) {
    MetricRecord r;
    r.t = at;
    r.mpc_node = cmd.mpc_node;
    r.exec_time = cmd.exec_time;
    r.latency = at - cmd.read_stamp;
    r.parts = cmd.parts;
    r.iterations = cmd.iterations;
    r.u = applied;
    r.u_sq = applied * applied;
    r.position = plant.state().p;
    r.setpoint = cmd.setpoint;
    r.solved = cmd.converged;
    r.off_beam = plant.state().off_beam;
    r.migration = cmd.migrated;
    if (!r.solved) ++res.solver_failures;
    if (r.off_beam && !res.first_off_beam) {
      res.first_off_beam = at;
      res.off_beam_after_setpoint_change = Duration{(at - kSimStart).count() % sc.setpoint_period.count()};
    }
    r.respawn = r.off_beam || respawn_at.has_value();
    res.records.push_back(r);
    if (!r.off_beam) return;
    if (opt.stop_at_off_beam) {
      engine.stop();
    } else if (opt.respawn && !respawn_at) {
      respawn_at = at + sc.respawn_delay;
      engine.schedule_at(*respawn_at, "respawn", [&] {
        plant.respawn(engine.now());
        respawn_at.reset();
      });
    }
  };

  const GraphSpec spec = exp.graph ? *exp.graph : default_graph_spec(sc.placement, exp.mpc.h, sc.setpoint_period);
  GraphSpec placed = spec;
  for (ActorSpec& a : placed.actors) {
    if (a.kind == ActorKind::Mpc) a.node = sc.placement;
  }
  rt.deploy(build_app_graph(placed, env));

  // Outlives the loop below; the scheduled callbacks refer to it.
  std::function<void()> tick;
  if (opt.migrate) {
    const ActorId mpc_id = rt.actor_id("mpc");
    RngStream& pick = engine.rng_stream("scenario.migration");
    tick = [&, mpc_id, pick = &pick] {
      rt.check_conservation();
      // Nothing would be left of the run to finish a move started at its end.
      if (engine.now() >= kSimStart + sc.duration) return;
      if (!rt.migrating(mpc_id)) {
        std::vector<Node> others;
        for (Node n : kAllNodes) {
          if (n != rt.location(mpc_id)) others.push_back(n);
        }
        rt.migrate(mpc_id, others[pick->uniform_index(others.size())]);
      }
      engine.schedule(sc.migration_period, "scenario.migrate", tick);
    };
    engine.schedule(sc.migration_period, "scenario.migrate", tick);
  }

  engine.run_until(kSimStart + sc.duration);
  res.events = engine.processed_count();
  res.migrations = rt.migrations();
  for (const ActorSpec& a : placed.actors) {
    if (a.kind == ActorKind::Mpc) res.overruns += rt.overruns(rt.actor_id(a.name));
  }
  try {
    rt.check_conservation();
  } catch (const InvariantBreach&) {
    res.conservation_ok = false;
    throw;
  }
  return res;
}

}  // namespace

RunResult run_baseline(const Experiment& exp) {
  if (exp.scenario.kind != ScenarioKind::Baseline) throw std::invalid_argument("run_baseline: scenario kind is not baseline");
  return run_impl(exp, {false, false, true});
}

RunResult run_migration(const Experiment& exp) {
  if (exp.scenario.kind != ScenarioKind::Migration) throw std::invalid_argument("run_migration: scenario kind is not migration");
  return run_impl(exp, {true, false, true});
}

RunResult run_constrained(const Experiment& exp) {
  if (exp.scenario.kind != ScenarioKind::Constrained) {
    throw std::invalid_argument("run_constrained: scenario kind is not constrained");
  }
  return run_impl(exp, {false, true, false});
}

RunResult run_scenario(const Experiment& exp) {
  switch (exp.scenario.kind) {
    case ScenarioKind::Baseline: return run_baseline(exp);
    case ScenarioKind::Migration: return run_migration(exp);
    case ScenarioKind::Constrained: return run_constrained(exp);
  }
  throw std::invalid_argument("unknown scenario kind");
}

std::string_view column_name(Column c) {
  switch (c) {
    case Column::ExecMs: return "exec_ms";
    case Column::LatencyMs: return "latency_ms";
    case Column::U: return "u";
    case Column::USq: return "u_sq";
    case Column::Position: return "position_m";
  }
  return "unknown";
}

BoxStats summarize(const std::vector<MetricRecord>& records, Column column) {
  std::vector<double> v;
  v.reserve(records.size());
  for (const MetricRecord& r : records) {
    if (r.respawn) continue;
    switch (column) {
      case Column::ExecMs: v.push_back(to_millis(r.exec_time)); break;
      case Column::LatencyMs: v.push_back(to_millis(r.latency)); break;
      case Column::U: v.push_back(r.u); break;
      case Column::USq: v.push_back(r.u_sq); break;
      case Column::Position: v.push_back(r.position); break;
    }
  }
  if (v.empty()) throw std::invalid_argument("summarize: no samples for " + std::string(column_name(column)));
  return box_stats(std::move(v));
}

namespace {
std::string g9(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}
}  // namespace

void write_csv(const std::vector<MetricRecord>& records, std::ostream& out) {
  out << "t_ns,node,exec_ms,latency_ms,u,u_sq,position_m,setpoint_m,solved,off_beam,migrate_from,migrate_to\n";
  for (const MetricRecord& r : records) {
    out << (r.t - kSimStart).count() << ',' << node_name(r.mpc_node) << ',' << g9(to_millis(r.exec_time)) << ','
        << g9(to_millis(r.latency)) << ',' << g9(r.u) << ',' << g9(r.u_sq) << ',' << g9(r.position) << ','
        << g9(r.setpoint) << ',' << (r.solved ? 1 : 0) << ',' << (r.off_beam ? 1 : 0) << ',';
    if (r.migration) out << node_name(r.migration->first) << ',' << node_name(r.migration->second);
    else out << ',';
    out << '\n';
  }
}

void emit_csv(const std::vector<MetricRecord>& records, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_csv(records, f);
  f.flush();
  if (!f) throw std::runtime_error("write failed on " + path.string());
}

CalibrationResult calibrate_overhead(Experiment base, double target_ms, const std::vector<std::uint64_t>& seeds,
                                     double tol_ms) {
  if (seeds.empty()) throw std::invalid_argument("calibrate_overhead: no seeds");
  base.scenario.kind = ScenarioKind::Baseline;
  base.scenario.placement = Node::Edge;
  CalibrationResult out;
  auto evaluate = [&](double delta) {
    base.profiles.overhead.median_ms = delta;
    std::vector<double> lat;
    for (std::uint64_t seed : seeds) {
      base.scenario.master_seed = seed;
      const RunResult r = run_baseline(base);
      for (const MetricRecord& m : r.records) {
        if (!m.respawn) lat.push_back(to_millis(m.latency));
      }
    }
    ++out.evaluations;
    return box_stats(std::move(lat)).median;
  };
  double lo = 0.0;
  double f_lo = evaluate(lo);
  if (f_lo >= target_ms) return {lo, f_lo, out.evaluations};
  double hi = std::max(1.0, target_ms);
  double f_hi = evaluate(hi);
  while (f_hi < target_ms) {
    lo = hi;
    hi *= 2;
    f_hi = evaluate(hi);
  }
  double mid = hi;
  double f_mid = f_hi;
  for (int i = 0; i < 40 && std::abs(f_mid - target_ms) > tol_ms; ++i) {
    mid = 0.5 * (lo + hi);
    f_mid = evaluate(mid);
    (f_mid < target_ms ? lo : hi) = mid;
  }
  out.overhead_median_ms = mid;
  out.achieved_median_ms = f_mid;
  return out;
}

}  // namespace edgectl
