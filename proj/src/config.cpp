#include "edgectl/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace edgectl {

RunConfig default_run_config(ScenarioKind kind) {
  RunConfig c;
  if (const char* dir = std::getenv("EDGECTL_OUTPUT_DIR"); dir && *dir) c.output_dir = dir;
  ScenarioConfig& s = c.exp.scenario;
  s.kind = kind;
  switch (kind) {
    case ScenarioKind::Baseline: break;
    case ScenarioKind::Migration: s.duration = std::chrono::seconds(800); break;
    case ScenarioKind::Constrained:
      s.duration = std::chrono::seconds(80);
      s.setpoint_high = 0.50;
      s.setpoint_period = std::chrono::seconds(15);
      break;
  }
  return c;
}

namespace {

class Reader {
 public:
  Reader(std::string origin) : origin_(std::move(origin)) {}

  std::string where(const YAML::Node& n, const std::string& field) const {
    const YAML::Mark m = n.Mark();
    std::string loc = origin_;
    if (m.line >= 0) loc += ":" + std::to_string(m.line + 1);
    else loc += " (override)";
    return loc + ": " + field;
  }

  [[noreturn]] void fail(const YAML::Node& n, const std::string& field, const std::string& msg) const {
    throw ConfigError(where(n, field) + ": " + msg);
  }

  void expect_map(const YAML::Node& n, const std::string& field, std::initializer_list<const char*> keys) const {
    if (!n.IsMap()) fail(n, field, "expected a mapping");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& kv : n) {
      const std::string k = kv.first.as<std::string>();
      if (!allowed.count(k)) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        fail(kv.first, field.empty() ? k : field + "." + k, "unknown key (expected one of: " + list + ")");
      }
    }
  }

  template <typename T>
  void read(const YAML::Node& parent, const char* key, const std::string& section, T& out) const {
    const YAML::Node n = parent[key];
    if (!n) return;
    const std::string field = section + "." + key;
    try {
      out = n.as<T>();
    } catch (const YAML::BadConversion&) {
      fail(n, field, "cannot read '" + scalar(n) + "' as " + type_name<T>());
    }
  }

  void read_duration_s(const YAML::Node& parent, const char* key, const std::string& section, Duration& out) const {
    double v = to_seconds(out);
    read(parent, key, section, v);
    out = from_seconds(v);
  }

  Node node(const YAML::Node& n, const std::string& field) const {
    const std::string s = scalar(n);
    if (auto v = parse_node(s)) return *v;
    fail(n, field, "unknown node '" + s + "' (valid: plant, edge, erdc, aws)");
  }

  static std::string scalar(const YAML::Node& n) { return n.IsScalar() ? n.Scalar() : std::string("<non-scalar>"); }

 private:
  template <typename T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else return "a string";
  }

  std::string origin_;
};

void apply_override(YAML::Node& root, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + spec + "': expected key=value");
  std::string key = spec.substr(0, eq);
  while (key.rfind("--", 0) == 0) key.erase(0, 2);
  const std::string value = spec.substr(eq + 1);
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string p; std::getline(ss, p, '.');) {
    if (p.empty()) throw ConfigError("override '" + spec + "': empty key segment");
    parts.push_back(p);
  }
  YAML::Node parsed;
  try {
    parsed = YAML::Load(value);
  } catch (const YAML::Exception& e) {
    throw ConfigError("override '" + spec + "': " + e.msg);
  }
  if (!parsed || parsed.IsNull()) parsed = YAML::Node(value);
  YAML::Node cur = root;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node next = cur[parts[i]];
    if (!next || !next.IsMap()) {
      cur[parts[i]] = YAML::Node(YAML::NodeType::Map);
      next = cur[parts[i]];
    }
    cur.reset(next);
  }
  cur[parts.back()] = parsed;
}

GraphSpec read_graph(const Reader& rd, const YAML::Node& g) {
  rd.expect_map(g, "graph", {"actors", "connections"});
  GraphSpec spec;
  const YAML::Node actors = g["actors"];
  if (!actors || !actors.IsSequence()) rd.fail(g, "graph.actors", "expected a list");
  for (const YAML::Node& a : actors) {
    rd.expect_map(a, "graph.actors[]", {"name", "kind", "node", "affinity"});
    ActorSpec s;
    rd.read(a, "name", "graph.actors[]", s.name);
    if (s.name.empty()) rd.fail(a, "graph.actors[].name", "missing");
    std::string kind;
    rd.read(a, "kind", "graph.actors[]", kind);
    static const std::map<std::string, ActorKind> kinds{{"clock", ActorKind::Clock},
                                                        {"adc", ActorKind::Adc},
                                                        {"setpoint", ActorKind::Setpoint},
                                                        {"mpc", ActorKind::Mpc},
                                                        {"dac", ActorKind::Dac}};
    auto it = kinds.find(kind);
    if (it == kinds.end()) rd.fail(a, "graph.actors[].kind", "unknown kind '" + kind + "' (valid: clock, adc, setpoint, mpc, dac)");
    s.kind = it->second;
    if (a["node"]) s.node = rd.node(a["node"], "graph.actors[].node");
    if (a["affinity"]) s.affinity = rd.node(a["affinity"], "graph.actors[].affinity");
    spec.actors.push_back(std::move(s));
  }
  const YAML::Node conns = g["connections"];
  if (!conns || !conns.IsSequence()) rd.fail(g, "graph.connections", "expected a list");
  for (const YAML::Node& c : conns) {
    rd.expect_map(c, "graph.connections[]", {"from", "to", "period_s"});
    ConnectionSpec s;
    rd.read(c, "from", "graph.connections[]", s.from);
    rd.read(c, "to", "graph.connections[]", s.to);
    if (c["period_s"]) {
      double p = 0;
      rd.read(c, "period_s", "graph.connections[]", p);
      s.period = from_seconds(p);
    }
    spec.connections.push_back(std::move(s));
  }
  return spec;
}

RunConfig build(const YAML::Node& root, const Reader& rd, const std::filesystem::path& base_dir) {
  rd.expect_map(root, "", {"schema_version", "scenario", "plant", "mpc", "profiles", "graph", "output_dir", "seeds"});
  if (!root["schema_version"]) rd.fail(root, "schema_version", "missing");
  int version = 0;
  rd.read(root, "schema_version", "", version);
  if (version != kSchemaVersion) {
    rd.fail(root["schema_version"], "schema_version", "unsupported version " + std::to_string(version) + " (this build reads " +
                                                          std::to_string(kSchemaVersion) + ")");
  }

  const YAML::Node sc = root["scenario"];
  ScenarioKind kind = ScenarioKind::Baseline;
  if (sc) {
    rd.expect_map(sc, "scenario",
                  {"kind", "placement", "duration_s", "setpoint_low_m", "setpoint_high_m", "setpoint_period_s",
                   "migration_period_s", "u_bound_tight", "respawn_delay_s"});
    if (sc["kind"]) {
      const std::string k = Reader::scalar(sc["kind"]);
      auto pk = parse_scenario_kind(k);
      if (!pk) rd.fail(sc["kind"], "scenario.kind", "unknown scenario '" + k + "' (valid: baseline, migration, constrained)");
      kind = *pk;
    }
  }
  RunConfig cfg = default_run_config(kind);
  ScenarioConfig& s = cfg.exp.scenario;
  if (sc) {
    if (const YAML::Node p = sc["placement"]) {
      if (Reader::scalar(p) == "all") {
        cfg.placements = kind == ScenarioKind::Constrained ? std::vector<Node>{Node::Plant, Node::Edge, Node::Aws}
                                                           : std::vector<Node>(kAllNodes.begin(), kAllNodes.end());
      } else {
        cfg.placements = {rd.node(p, "scenario.placement")};
      }
      s.placement = cfg.placements.front();
    }
    rd.read_duration_s(sc, "duration_s", "scenario", s.duration);
    rd.read(sc, "setpoint_low_m", "scenario", s.setpoint_low);
    rd.read(sc, "setpoint_high_m", "scenario", s.setpoint_high);
    rd.read_duration_s(sc, "setpoint_period_s", "scenario", s.setpoint_period);
    rd.read_duration_s(sc, "migration_period_s", "scenario", s.migration_period);
    rd.read(sc, "u_bound_tight", "scenario", s.u_bound_tight);
    rd.read_duration_s(sc, "respawn_delay_s", "scenario", s.respawn_delay);
  }

  if (const YAML::Node p = root["plant"]) {
    rd.expect_map(p, "plant",
                  {"beam_length_m", "k_omega", "alpha_max_rad", "u_min_hw", "u_max_hw", "sigma_pos_m", "sigma_ang_rad",
                   "sigma_proc", "adc_bits"});
    PlantParams& pp = cfg.exp.plant;
    rd.read(p, "beam_length_m", "plant", pp.beam_length);
    rd.read(p, "k_omega", "plant", pp.k_omega);
    rd.read(p, "alpha_max_rad", "plant", pp.alpha_max);
    rd.read(p, "u_min_hw", "plant", pp.u_min_hw);
    rd.read(p, "u_max_hw", "plant", pp.u_max_hw);
    rd.read(p, "sigma_pos_m", "plant", pp.sigma_pos);
    rd.read(p, "sigma_ang_rad", "plant", pp.sigma_ang);
    rd.read(p, "sigma_proc", "plant", pp.sigma_proc);
    if (p["adc_bits"]) {
      unsigned bits = 0;
      rd.read(p, "adc_bits", "plant", bits);
      pp.adc_bits = bits == 0 ? std::nullopt : std::optional<unsigned>(bits);
    }
  }

  if (const YAML::Node m = root["mpc"]) {
    rd.expect_map(m, "mpc",
                  {"h_ms", "horizon", "q", "r", "u_min", "u_max", "pos_bound_m", "ang_bound_rad", "soft_penalty",
                   "max_iter_cap", "tol", "max_penalty_passes"});
    MpcConfig& mc = cfg.exp.mpc;
    double h_ms = to_millis(mc.h);
    rd.read(m, "h_ms", "mpc", h_ms);
    mc.h = from_millis(h_ms);
    rd.read(m, "horizon", "mpc", mc.horizon);
    if (const YAML::Node q = m["q"]) {
      std::vector<double> diag;
      rd.read(m, "q", "mpc", diag);
      if (diag.size() != 3) rd.fail(q, "mpc.q", "expected three diagonal weights");
      mc.Q = Eigen::Vector3d(diag[0], diag[1], diag[2]).asDiagonal();
    }
    rd.read(m, "r", "mpc", mc.R);
    rd.read(m, "u_min", "mpc", mc.u_min);
    rd.read(m, "u_max", "mpc", mc.u_max);
    rd.read(m, "pos_bound_m", "mpc", mc.pos_bound);
    rd.read(m, "ang_bound_rad", "mpc", mc.ang_bound);
    rd.read(m, "soft_penalty", "mpc", mc.soft_penalty);
    rd.read(m, "max_iter_cap", "mpc", mc.max_iter_cap);
    rd.read(m, "tol", "mpc", mc.tol);
    rd.read(m, "max_penalty_passes", "mpc", mc.max_penalty_passes);
  }

  if (const YAML::Node p = root["profiles"]) {
    try {
      if (p.IsMap()) {
        rd.expect_map(p, "profiles", {"table"});
        std::string table;
        rd.read(p, "table", "profiles", table);
        cfg.exp.profiles = parse_profiles(table, rd.where(p, "profiles.table"));
        cfg.profiles_source = "inline";
      } else {
        const std::string src = Reader::scalar(p);
        if (src == "default" || src == "paper-default") {
          cfg.exp.profiles = default_profiles();
          cfg.profiles_source = "default";
        } else {
          std::filesystem::path path(src);
          if (path.is_relative()) path = base_dir / path;
          if (!std::filesystem::exists(path)) rd.fail(p, "profiles", "file not found: " + path.string());
          cfg.exp.profiles = load_profiles(path);
          cfg.profiles_source = path.string();
        }
      }
    } catch (const std::invalid_argument& e) {
      rd.fail(p, "profiles", e.what());
    }
  }

  if (const YAML::Node g = root["graph"]) cfg.exp.graph = read_graph(rd, g);

  if (const YAML::Node o = root["output_dir"]) {
    std::string dir;
    rd.read(root, "output_dir", "", dir);
    cfg.output_dir = dir;
  }
  if (const YAML::Node sd = root["seeds"]) {
    if (sd.IsScalar()) {
      std::uint64_t one = 0;
      rd.read(root, "seeds", "", one);
      cfg.seeds = {one};
    } else {
      rd.read(root, "seeds", "", cfg.seeds);
    }
    if (cfg.seeds.empty()) rd.fail(sd, "seeds", "at least one seed is required");
  }
  s.master_seed = cfg.seeds.front();

  std::vector<std::string> errors;
  for (Node n : cfg.placements) {
    Experiment probe = cfg.exp;
    probe.scenario.placement = n;
    for (const std::string& e : check(probe)) {
      if (std::find(errors.begin(), errors.end(), e) == errors.end()) errors.push_back(e);
    }
  }
  if (!errors.empty()) {
    std::string msg = rd.where(root, "config") + ": " + errors.front();
    for (std::size_t i = 1; i < errors.size(); ++i) msg += "\n" + rd.where(root, "config") + ": " + errors[i];
    throw ConfigError(msg);
  }
  return cfg;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin, const std::vector<std::string>& overrides,
                       const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(origin + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  // A run summary carries its configuration under "config".
  if (root.IsMap() && root["config"] && root["summary"]) {
    YAML::Node inner = root["config"];
    root.reset(inner);
  }
  for (const std::string& o : overrides) apply_override(root, o);
  try {
    return build(root, Reader(origin), base_dir);
  } catch (const YAML::Exception& e) {
    throw ConfigError(origin + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string(), overrides, path.parent_path().empty() ? "." : path.parent_path());
}


// Exact for whole seconds, unlike scaling by 1e-9.
double secs(Duration d) { return static_cast<double>(d.count()) / 1e9; }

namespace {

std::string_view kind_key(ActorKind k) { return actor_kind_name(k); }

void emit_body(YAML::Emitter& out, const RunConfig& cfg, Node placement, std::uint64_t seed) {
  const ScenarioConfig& s = cfg.exp.scenario;
  const PlantParams& p = cfg.exp.plant;
  const MpcConfig& m = cfg.exp.mpc;
  out << YAML::BeginMap;
  out << YAML::Key << "schema_version" << YAML::Value << kSchemaVersion;
  out << YAML::Key << "scenario" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << std::string(scenario_kind_name(s.kind));
  out << YAML::Key << "placement" << YAML::Value << std::string(node_name(placement));
  out << YAML::Key << "duration_s" << YAML::Value << secs(s.duration);
  out << YAML::Key << "setpoint_low_m" << YAML::Value << s.setpoint_low;
  out << YAML::Key << "setpoint_high_m" << YAML::Value << s.setpoint_high;
  out << YAML::Key << "setpoint_period_s" << YAML::Value << secs(s.setpoint_period);
  out << YAML::Key << "migration_period_s" << YAML::Value << secs(s.migration_period);
  out << YAML::Key << "u_bound_tight" << YAML::Value << s.u_bound_tight;
  out << YAML::Key << "respawn_delay_s" << YAML::Value << secs(s.respawn_delay);
  out << YAML::EndMap;

  out << YAML::Key << "plant" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "beam_length_m" << YAML::Value << p.beam_length;
  out << YAML::Key << "k_omega" << YAML::Value << p.k_omega;
  out << YAML::Key << "alpha_max_rad" << YAML::Value << p.alpha_max;
  out << YAML::Key << "u_min_hw" << YAML::Value << p.u_min_hw;
  out << YAML::Key << "u_max_hw" << YAML::Value << p.u_max_hw;
  out << YAML::Key << "sigma_pos_m" << YAML::Value << p.sigma_pos;
  out << YAML::Key << "sigma_ang_rad" << YAML::Value << p.sigma_ang;
  out << YAML::Key << "sigma_proc" << YAML::Value << p.sigma_proc;
  out << YAML::Key << "adc_bits" << YAML::Value << (p.adc_bits ? *p.adc_bits : 0u);
  out << YAML::EndMap;

  out << YAML::Key << "mpc" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "h_ms" << YAML::Value << m.h.count() / 1e6;
  out << YAML::Key << "horizon" << YAML::Value << m.horizon;
  out << YAML::Key << "q" << YAML::Value << YAML::Flow << YAML::BeginSeq << m.Q(0, 0) << m.Q(1, 1) << m.Q(2, 2)
      << YAML::EndSeq;
  out << YAML::Key << "r" << YAML::Value << m.R;
  out << YAML::Key << "u_min" << YAML::Value << m.u_min;
  out << YAML::Key << "u_max" << YAML::Value << m.u_max;
  out << YAML::Key << "pos_bound_m" << YAML::Value << m.pos_bound;
  out << YAML::Key << "ang_bound_rad" << YAML::Value << m.ang_bound;
  out << YAML::Key << "soft_penalty" << YAML::Value << m.soft_penalty;
  out << YAML::Key << "max_iter_cap" << YAML::Value << m.max_iter_cap;
  out << YAML::Key << "tol" << YAML::Value << m.tol;
  out << YAML::Key << "max_penalty_passes" << YAML::Value << m.max_penalty_passes;
  out << YAML::EndMap;

  out << YAML::Key << "profiles" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "table" << YAML::Value << YAML::Literal << profiles_to_csv(cfg.exp.profiles);
  out << YAML::EndMap;

  if (cfg.exp.graph) {
    out << YAML::Key << "graph" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "actors" << YAML::Value << YAML::BeginSeq;
    for (const ActorSpec& a : cfg.exp.graph->actors) {
      out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << a.name;
      out << YAML::Key << "kind" << YAML::Value << std::string(kind_key(a.kind));
      out << YAML::Key << "node" << YAML::Value << std::string(node_name(a.kind == ActorKind::Mpc ? placement : a.node));
      if (a.affinity) out << YAML::Key << "affinity" << YAML::Value << std::string(node_name(*a.affinity));
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "connections" << YAML::Value << YAML::BeginSeq;
    for (const ConnectionSpec& c : cfg.exp.graph->connections) {
      out << YAML::BeginMap << YAML::Key << "from" << YAML::Value << c.from;
      out << YAML::Key << "to" << YAML::Value << c.to;
      if (c.period) out << YAML::Key << "period_s" << YAML::Value << secs(*c.period);
      out << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;
  }

  out << YAML::Key << "output_dir" << YAML::Value << cfg.output_dir.string();
  out << YAML::Key << "seeds" << YAML::Value << YAML::Flow << YAML::BeginSeq << seed << YAML::EndSeq;
  out << YAML::EndMap;
}

void box(YAML::Emitter& out, const char* name, const BoxStats& b) {
  out << YAML::Key << name << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "median" << YAML::Value << b.median;
  out << YAML::Key << "q1" << YAML::Value << b.q1;
  out << YAML::Key << "q3" << YAML::Value << b.q3;
  out << YAML::Key << "lo_whisker" << YAML::Value << b.lo_whisker;
  out << YAML::Key << "hi_whisker" << YAML::Value << b.hi_whisker;
  out << YAML::EndMap;
}

}  // namespace

std::string emit_config(const RunConfig& cfg, Node placement, std::uint64_t seed) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  emit_body(out, cfg, placement, seed);
  return std::string(out.c_str()) + "\n";
}

std::string config_hash(const RunConfig& cfg, Node placement, std::uint64_t seed) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(emit_config(cfg, placement, seed))));
  return buf;
}

std::string summary_yaml(const RunConfig& cfg, Node placement, std::uint64_t seed, const RunResult& result,
                         const std::string& csv_name) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "summary" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "version" << YAML::Value << EDGECTL_VERSION;
  out << YAML::Key << "seed" << YAML::Value << seed;
  out << YAML::Key << "config_hash" << YAML::Value << config_hash(cfg, placement, seed);
  out << YAML::Key << "csv" << YAML::Value << csv_name;
  out << YAML::Key << "records" << YAML::Value << result.records.size();
  out << YAML::Key << "solver_failures" << YAML::Value << result.solver_failures;
  out << YAML::Key << "overruns" << YAML::Value << result.overruns;
  out << YAML::Key << "migrations" << YAML::Value << result.migrations.size();
  out << YAML::Key << "off_beam" << YAML::Value << result.first_off_beam.has_value();
  if (result.first_off_beam) {
    out << YAML::Key << "off_beam_at_s" << YAML::Value << to_seconds(*result.first_off_beam);
  }
  std::size_t kept = 0;
  for (const MetricRecord& r : result.records) kept += !r.respawn;
  if (kept > 0) {
    out << YAML::Key << "stats" << YAML::Value << YAML::BeginMap;
    box(out, "exec_ms", summarize(result.records, Column::ExecMs));
    box(out, "latency_ms", summarize(result.records, Column::LatencyMs));
    box(out, "u", summarize(result.records, Column::U));
    box(out, "u_sq", summarize(result.records, Column::USq));
    box(out, "position_m", summarize(result.records, Column::Position));
    out << YAML::EndMap;
  }
  if (!result.migrations.empty()) {
    std::vector<double> down;
    for (const MigrationReport& m : result.migrations) down.push_back(to_millis(m.downtime()));
    out << YAML::Key << "migration" << YAML::Value << YAML::BeginMap;
    box(out, "downtime_ms", box_stats(down));
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  out << YAML::Key << "config" << YAML::Value;
  emit_body(out, cfg, placement, seed);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace edgectl
