#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "edgectl/config.hpp"
#include "edgectl/scenarios.hpp"

namespace edgectl::cli {

namespace {

namespace fs = std::filesystem;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// "--mpc.r=30" style leftovers become overrides; anything else is an error.
std::vector<std::string> dotted_overrides(const std::vector<std::string>& extras) {
  std::vector<std::string> out;
  for (const std::string& e : extras) {
    const auto eq = e.find('=');
    const std::string key = e.rfind("--", 0) == 0 ? e.substr(2, eq == std::string::npos ? std::string::npos : eq - 2) : "";
    if (key.empty() || eq == std::string::npos || key.find('.') == std::string::npos) {
      throw ConfigError("unrecognized argument '" + e + "' (overrides look like --section.key=value)");
    }
    out.push_back(e.substr(2));
  }
  return out;
}

struct Common {
  std::string config;
  std::string scenario;
  std::string placement;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> sets;
  std::string output_dir;
};

RunConfig resolve(const Common& c, const std::vector<std::string>& extras) {
  std::vector<std::string> ov;
  if (!c.scenario.empty()) ov.push_back("scenario.kind=" + c.scenario);
  if (!c.placement.empty()) {
    // Node names are checked by the config reader, which lists the valid ones.
    ov.push_back("scenario.placement=" + c.placement);
  }
  if (!c.seeds.empty()) {
    std::string list = "[";
    for (std::size_t i = 0; i < c.seeds.size(); ++i) list += (i ? "," : "") + std::to_string(c.seeds[i]);
    ov.push_back("seeds=" + list + "]");
  }
  if (!c.output_dir.empty()) ov.push_back("output_dir=" + c.output_dir);
  for (const std::string& s : c.sets) ov.push_back(s);
  for (const std::string& s : dotted_overrides(extras)) ov.push_back(s);
  if (c.config.empty()) {
    ov.insert(ov.begin(), "schema_version=" + std::to_string(kSchemaVersion));
    return parse_config("", "<defaults>", ov);
  }
  if (!fs::exists(c.config)) throw IoError("cannot read config " + c.config + ": no such file");
  return load_config(c.config, ov);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  f.close();
  if (!f) throw IoError("cannot write " + path.string());
}

int cmd_run(const Common& c, const std::vector<std::string>& extras, std::ostream& out) {
  const RunConfig cfg = resolve(c, extras);
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.output_dir.string() + ": " + ec.message());

  const std::string kind(scenario_kind_name(cfg.exp.scenario.kind));
  bool conservation = true;
  for (Node n : cfg.placements) {
    for (std::uint64_t seed : cfg.seeds) {
      Experiment exp = cfg.exp;
      exp.scenario.placement = n;
      exp.scenario.master_seed = seed;
      const RunResult res = run_scenario(exp);
      conservation = conservation && res.conservation_ok;

      const std::string stem = kind + "_" + std::string(node_name(n)) + "_s" + std::to_string(seed);
      try {
        emit_csv(res.records, cfg.output_dir / (stem + ".csv"));
      } catch (const std::runtime_error& e) {
        throw IoError(e.what());
      }
      write_text(cfg.output_dir / (stem + ".summary.yaml"), summary_yaml(cfg, n, seed, res, stem + ".csv"));

      out << stem << ": " << res.records.size() << " samples";
      std::size_t kept = 0;
      for (const MetricRecord& r : res.records) kept += !r.respawn;
      if (kept > 0) {
        out << ", latency median " << fmt("%.2f", summarize(res.records, Column::LatencyMs).median) << " ms"
            << ", u^2 median " << fmt("%.6g", summarize(res.records, Column::USq).median);
      }
      out << ", solver failures " << res.solver_failures;
      if (!res.migrations.empty()) out << ", migrations " << res.migrations.size();
      if (res.first_off_beam) out << ", ball off beam at " << fmt("%.2f", to_seconds(*res.first_off_beam)) << " s";
      out << "\n";
    }
  }
  out << "output in " << cfg.output_dir.string() << "\n";
  return conservation ? kOk : kInvariantBreach;
}

int cmd_validate(const Common& c, const std::vector<std::string>& extras, std::ostream& out) {
  const RunConfig cfg = resolve(c, extras);
  out << (c.config.empty() ? std::string("defaults") : c.config) << ": ok (" << scenario_kind_name(cfg.exp.scenario.kind)
      << ", " << cfg.placements.size() << " placement(s), " << cfg.seeds.size() << " seed(s))\n";
  return kOk;
}

Profiles profiles_for(const std::string& path, const Common& c, const std::vector<std::string>& extras) {
  if (!path.empty()) {
    if (!fs::exists(path)) throw IoError("cannot read profiles " + path + ": no such file");
    try {
      return load_profiles(path);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  return resolve(c, extras).exp.profiles;
}

int cmd_calibrate(const Common& c, const std::vector<std::string>& extras, const std::string& profiles_path,
                  std::size_t samples, bool overhead, double target, std::ostream& out) {
  Profiles p = profiles_for(profiles_path, c, extras);
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  bool ok = true;
  out << "round trip plant<->node, " << samples << " draws (ms)\n";
  out << "node   target q1/med/q3            sampled q1/med/q3           worst err  \n";
  for (const LinkCheck& l : check_links(p, samples)) {
    char line[160];
    std::snprintf(line, sizeof line, "%-6s %7.3f %7.3f %7.3f    %7.3f %7.3f %7.3f    %6.2f%%  %s\n",
                  std::string(node_name(l.node)).c_str(), l.target.q1, l.target.median, l.target.q3, l.sampled.q1,
                  l.sampled.median, l.sampled.q3, 100.0 * l.worst_rel_error, l.pass ? "PASS" : "FAIL");
    out << line;
    ok = ok && l.pass;
  }
  const RunConfig cfg = resolve(c, extras);
  out << "solver cost (cap " << cfg.exp.mpc.max_iter_cap << " iterations)\n";
  for (Node n : kAllNodes) {
    const NodeProfile np = p.node(n);
    char line[160];
    std::snprintf(line, sizeof line, "%-6s scale %.3f  iteration %.2f us  cap %.1f ms\n", std::string(node_name(n)).c_str(),
                  np.compute_scale, 1e3 * to_millis(np.iter_cost), cfg.exp.mpc.max_iter_cap * to_millis(np.iter_cost));
    out << line;
  }
  if (overhead) {
    Experiment exp = cfg.exp;
    exp.profiles = p;
    exp.scenario.kind = ScenarioKind::Baseline;
    exp.scenario.placement = Node::Edge;
    const CalibrationResult r = calibrate_overhead(exp, target, cfg.seeds.size() > 1 ? cfg.seeds : std::vector<std::uint64_t>{1, 2, 3, 4, 5});
    out << "overhead median " << fmt("%.3f", r.overhead_median_ms) << " ms gives edge latency median "
        << fmt("%.3f", r.achieved_median_ms) << " ms (target " << fmt("%.2f", target) << ", " << r.evaluations
        << " evaluations)\n";
  }
  return ok ? kOk : kInvariantBreach;
}

int cmd_export(const Common& c, const std::vector<std::string>& extras, const std::string& profiles_path,
               const std::string& dest, std::ostream& out) {
  const std::string csv = profiles_to_csv(profiles_for(profiles_path, c, extras));
  if (dest.empty() || dest == "-") {
    out << csv;
  } else {
    write_text(dest, csv);
  }
  return kOk;
}

}  // namespace

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ball-and-beam MPC over a simulated edge/cloud infrastructure", "edgectl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", EDGECTL_VERSION);

  Common c;
  auto common = [&c](CLI::App* sub, bool with_config) {
    if (with_config) sub->add_option("config", c.config, "YAML configuration (defaults when omitted)");
    sub->add_option("--scenario", c.scenario, "baseline, migration or constrained");
    sub->add_option("--placement", c.placement, "MPC node: plant, edge, erdc, aws or all");
    sub->add_option("--seed", c.seeds, "master seed; repeat for a sweep");
    sub->add_option("--set", c.sets, "override, e.g. --set mpc.r=30");
    sub->add_option("--output-dir", c.output_dir, "output directory (default $EDGECTL_OUTPUT_DIR or ./out)");
    sub->allow_extras();
  };

  CLI::App* run = app.add_subcommand("run", "run a scenario for each placement and seed");
  common(run, true);
  CLI::App* validate = app.add_subcommand("validate", "check a configuration without simulating");
  common(validate, true);

  std::string profiles_path;
  std::size_t samples = 10000;
  bool overhead = false;
  double target = 83.49;
  CLI::App* calibrate = app.add_subcommand("calibrate", "compare sampled link delays with the profile table");
  common(calibrate, true);
  calibrate->add_option("--profiles", profiles_path, "profile CSV (default: the configuration's table)");
  calibrate->add_option("--samples", samples, "draws per link")->check(CLI::Range(std::size_t{2}, std::size_t{100000000}));
  calibrate->add_flag("--overhead", overhead, "also search the per-hop overhead median on the edge placement");
  calibrate->add_option("--target", target, "edge latency median to hit, ms");

  std::string dest;
  CLI::App* exportp = app.add_subcommand("export-profiles", "write the profile table as CSV");
  common(exportp, true);
  exportp->add_option("--profiles", profiles_path, "profile CSV to normalize (default: the configuration's table)");
  exportp->add_option("-o,--out", dest, "destination file (stdout when omitted)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << EDGECTL_VERSION << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (!app.get_subcommands().empty()) err << app.get_subcommands().front()->help();
    return kConfigError;
  }

  try {
    if (run->parsed()) return cmd_run(c, run->remaining(), out);
    if (validate->parsed()) return cmd_validate(c, validate->remaining(), out);
    if (calibrate->parsed()) return cmd_calibrate(c, calibrate->remaining(), profiles_path, samples, overhead, target, out);
    if (exportp->parsed()) return cmd_export(c, exportp->remaining(), profiles_path, dest, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const InvariantBreach& e) {
    err << "invariant breach: " << e.what() << "\n";
    return kInvariantBreach;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const EventError& e) {
    // Anything thrown inside the simulation loop arrives wrapped here.
    err << "invariant breach: " << e.what() << "\n";
    return kInvariantBreach;
  } catch (const std::runtime_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoError;
  }
  return kOk;
}

}  // namespace edgectl::cli
