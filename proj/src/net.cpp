#include "edgectl/net.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace edgectl {

namespace {

constexpr std::array<std::string_view, 4> kNodeNames{"plant", "edge", "erdc", "aws"};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string_view node_name(Node n) { return kNodeNames[node_index(n)]; }

std::optional<Node> parse_node(std::string_view name) {
  const std::string l = lower(trim(name));
  for (Node n : kAllNodes) {
    if (l == node_name(n)) return n;
  }
  return std::nullopt;
}

double LognormalFit::median() const { return std::exp(mu); }

double LognormalFit::quantile(double p) const {
  if (p == 0.25) return std::exp(mu - kZ75 * sigma);
  if (p == 0.75) return std::exp(mu + kZ75 * sigma);
  if (p == 0.5) return std::exp(mu);
  throw std::invalid_argument("LognormalFit::quantile supports p in {0.25, 0.5, 0.75}");
}

LognormalFit fit_lognormal(double median, double q1, double q3) {
  if (!(q1 > 0.0) || !(q1 <= median) || !(median <= q3)) {
    throw std::invalid_argument("fit_lognormal: need 0 < q1 <= median <= q3, got q1=" + std::to_string(q1) +
                                " median=" + std::to_string(median) + " q3=" + std::to_string(q3));
  }
  const double lm = std::log(median);
  const double l1 = std::log(q1);
  const double l3 = std::log(q3);
  // Minimizes (mu-lm)^2 + (mu - z s - l1)^2 + (mu + z s - l3)^2.
  return LognormalFit{(lm + l1 + l3) / 3.0, (l3 - l1) / (2.0 * kZ75)};
}

double LinkProfile::sample_rtt_ms(RngStream& rng) const {
  if (zero) return 0.0;
  // Always consume a fixed pattern per accepted draw; rejection is rare.
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double x = rng.lognormal(fit.mu, fit.sigma);
    if (x >= rtt_ms.lo_whisker && x <= rtt_ms.hi_whisker) return x;
  }
  return std::clamp(std::exp(fit.mu), rtt_ms.lo_whisker, rtt_ms.hi_whisker);
}

Duration sample_one_way(const LinkProfile& link, RngStream& rng) {
  return from_millis(0.5 * link.sample_rtt_ms(rng));
}

Duration OverheadProfile::sample(RngStream& rng) const {
  if (median_ms <= 0.0) return Duration::zero();
  return from_millis(rng.lognormal(std::log(median_ms), sigma_log));
}

NodeProfile Profiles::node(Node n) const {
  NodeProfile p;
  p.node = n;
  p.compute_scale = exec_ms[node_index(n)].median / exec_ms[node_index(Node::Edge)].median;
  p.iter_cost = from_millis(iter_cost_edge_ms * p.compute_scale);
  return p;
}

LinkProfile Profiles::link(Node a, Node b) const {
  LinkProfile l;
  if (a == b) {
    l.far = a;
    l.zero = true;
    return l;
  }
  // Links between two compute tiers reuse the profile of the farther tier.
  const Node far = node_index(a) > node_index(b) ? a : b;
  l.far = far;
  l.rtt_ms = rtt_ms[node_index(far)];
  l.zero = l.rtt_ms.median == 0.0;
  if (!l.zero) l.fit = fit_lognormal(l.rtt_ms.median, l.rtt_ms.q1, l.rtt_ms.q3);
  return l;
}

void Profiles::validate() const {
  auto check_box = [](const BoxStats& b, const std::string& what) {
    if (!(b.lo_whisker <= b.q1 && b.q1 <= b.median && b.median <= b.q3 && b.q3 <= b.hi_whisker)) {
      throw std::invalid_argument(what + ": box statistics out of order (need lo_whisker <= q1 <= median <= q3 <= hi_whisker)");
    }
  };
  for (Node n : kAllNodes) {
    const std::string name(node_name(n));
    check_box(rtt_ms[node_index(n)], "rtt." + name);
    check_box(exec_ms[node_index(n)], "exec." + name);
    if (rtt_ms[node_index(n)].median > 0.0) {
      const auto& b = rtt_ms[node_index(n)];
      fit_lognormal(b.median, b.q1, b.q3);
    }
    if (!(exec_ms[node_index(n)].median > 0.0)) throw std::invalid_argument("exec." + name + ": median must be > 0");
  }
  if (rtt_ms[node_index(Node::Plant)].hi_whisker != 0.0) throw std::invalid_argument("rtt.plant must be zero");
  if (!(iter_cost_edge_ms > 0.0)) throw std::invalid_argument("solver.iter_cost_edge must be > 0");
  if (overhead.median_ms < 0.0 || overhead.sigma_log < 0.0) throw std::invalid_argument("overhead.remote must be >= 0");
  if (transport_legs < 1.0) throw std::invalid_argument("platform.transport_legs must be >= 1");
  if (local_dispatch_ms < 0.0 || io_cost_ms < 0.0 || light_cost_ms < 0.0 || migration_handling_ms < 0.0) {
    throw std::invalid_argument("platform costs must be >= 0");
  }
}

Profiles default_profiles() {
  Profiles p;
  p.rtt_ms[0] = {0, 0, 0, 0, 0};
  p.rtt_ms[1] = {9.63, 9.35, 10.3, 8.5, 11.28};
  p.rtt_ms[2] = {13.7, 13.6, 14.6, 12.6, 18.6};
  p.rtt_ms[3] = {27.7, 27.6, 28.6, 25.884, 34.716};
  p.exec_ms[0] = {5.1231, 5.0991, 5.162, 5.0399, 9.9721};
  p.exec_ms[1] = {1.0419, 0.93794, 1.195, 0.75793, 1.2591};
  p.exec_ms[2] = {1.0791, 0.88882, 1.1208, 0.83709, 1.467};
  p.exec_ms[3] = {0.55504, 0.54812, 0.57793, 0.54502, 0.67711};
  p.iter_cost_edge_ms = 0.04;
  p.exec_jitter_ms = 0.01;
  p.exec_jitter_sigma = 0.5;
  p.overhead = {26.76, 0.3};
  p.local_dispatch_ms = 0.2;
  p.transport_legs = 2.0;
  p.io_cost_ms = 0.25;
  p.light_cost_ms = 0.05;
  p.migration_handling_ms = 5.0;
  return p;
}

namespace {

using Setter = std::function<void(Profiles&, double)>;

std::map<std::string, Setter> profile_fields() {
  std::map<std::string, Setter> f;
  for (Node n : kAllNodes) {
    const auto i = node_index(n);
    const std::string name(node_name(n));
    for (const char* kind : {"rtt", "exec"}) {
      const bool rtt = std::string_view(kind) == "rtt";
      auto box = [i, rtt](Profiles& p) -> BoxStats& { return rtt ? p.rtt_ms[i] : p.exec_ms[i]; };
      const std::string e = std::string(kind) + "." + name;
      f[e + ",median"] = [box](Profiles& p, double v) { box(p).median = v; };
      f[e + ",q1"] = [box](Profiles& p, double v) { box(p).q1 = v; };
      f[e + ",q3"] = [box](Profiles& p, double v) { box(p).q3 = v; };
      f[e + ",lo_whisker"] = [box](Profiles& p, double v) { box(p).lo_whisker = v; };
      f[e + ",hi_whisker"] = [box](Profiles& p, double v) { box(p).hi_whisker = v; };
    }
  }
  f["solver,iter_cost_edge"] = [](Profiles& p, double v) { p.iter_cost_edge_ms = v; };
  f["solver,jitter_median"] = [](Profiles& p, double v) { p.exec_jitter_ms = v; };
  f["solver,jitter_sigma_log"] = [](Profiles& p, double v) { p.exec_jitter_sigma = v; };
  f["overhead.remote,median"] = [](Profiles& p, double v) { p.overhead.median_ms = v; };
  f["overhead.remote,sigma_log"] = [](Profiles& p, double v) { p.overhead.sigma_log = v; };
  f["platform,local_dispatch"] = [](Profiles& p, double v) { p.local_dispatch_ms = v; };
  f["platform,transport_legs"] = [](Profiles& p, double v) { p.transport_legs = v; };
  f["platform,io_cost"] = [](Profiles& p, double v) { p.io_cost_ms = v; };
  f["platform,light_cost"] = [](Profiles& p, double v) { p.light_cost_ms = v; };
  f["platform,migration_handling"] = [](Profiles& p, double v) { p.migration_handling_ms = v; };
  return f;
}

}  // namespace

Profiles parse_profiles(std::string_view csv_text, std::string_view origin) {
  Profiles p = default_profiles();
  const auto fields = profile_fields();
  std::istringstream in{std::string(csv_text)};
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const std::string where = std::string(origin) + ":" + std::to_string(lineno);
    if (!header_seen) {
      if (lower(t) != "entity,stat,value_ms") throw std::invalid_argument(where + ": expected header entity,stat,value_ms");
      header_seen = true;
      continue;
    }
    const auto c1 = t.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : t.find(',', c1 + 1);
    if (c2 == std::string::npos) throw std::invalid_argument(where + ": expected three columns");
    const std::string key = lower(trim(t.substr(0, c1))) + "," + lower(trim(t.substr(c1 + 1, c2 - c1 - 1)));
    const std::string value = trim(t.substr(c2 + 1));
    const auto it = fields.find(key);
    if (it == fields.end()) throw std::invalid_argument(where + ": unknown entry '" + key + "'");
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw std::invalid_argument(where + ": '" + value + "' is not a number");
    }
    it->second(p, v);
  }
  if (!header_seen) throw std::invalid_argument(std::string(origin) + ": empty profile table");
  p.validate();
  return p;
}

Profiles load_profiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open profile table " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_profiles(ss.str(), path.string());
}

std::string profiles_to_csv(const Profiles& p) {
  std::ostringstream out;
  out.precision(9);
  out << "entity,stat,value_ms\n";
  for (const char* kind : {"rtt", "exec"}) {
    for (Node n : kAllNodes) {
      const auto& b = std::string_view(kind) == "rtt" ? p.rtt_ms[node_index(n)] : p.exec_ms[node_index(n)];
      const std::string e = std::string(kind) + "." + std::string(node_name(n));
      out << e << ",median," << b.median << "\n"
          << e << ",q1," << b.q1 << "\n"
          << e << ",q3," << b.q3 << "\n"
          << e << ",lo_whisker," << b.lo_whisker << "\n"
          << e << ",hi_whisker," << b.hi_whisker << "\n";
    }
  }
  out << "solver,iter_cost_edge," << p.iter_cost_edge_ms << "\n"
      << "solver,jitter_median," << p.exec_jitter_ms << "\n"
      << "solver,jitter_sigma_log," << p.exec_jitter_sigma << "\n"
      << "overhead.remote,median," << p.overhead.median_ms << "\n"
      << "overhead.remote,sigma_log," << p.overhead.sigma_log << "\n"
      << "platform,local_dispatch," << p.local_dispatch_ms << "\n"
      << "platform,transport_legs," << p.transport_legs << "\n"
      << "platform,io_cost," << p.io_cost_ms << "\n"
      << "platform,light_cost," << p.light_cost_ms << "\n"
      << "platform,migration_handling," << p.migration_handling_ms << "\n";
  return out.str();
}

std::vector<LinkCheck> check_links(const Profiles& p, std::size_t samples, std::uint64_t seed, double rel_tol) {
  if (samples < 2) throw std::invalid_argument("check_links: need at least two samples");
  std::vector<LinkCheck> out;
  for (Node n : kAllNodes) {
    LinkCheck c;
    c.node = n;
    c.target = p.rtt_ms[node_index(n)];
    const LinkProfile link = p.link(Node::Plant, n);
    RngStream rng("calibrate." + std::string(node_name(n)), seed);
    std::vector<double> draws(samples);
    for (double& d : draws) d = link.sample_rtt_ms(rng);
    c.sampled = box_stats(std::move(draws));
    auto rel = [](double got, double want) {
      if (want == 0.0) return got == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      return std::abs(got - want) / std::abs(want);
    };
    c.worst_rel_error = std::max({rel(c.sampled.median, c.target.median), rel(c.sampled.q1, c.target.q1),
                                  rel(c.sampled.q3, c.target.q3)});
    c.pass = c.worst_rel_error <= rel_tol;
    out.push_back(c);
  }
  return out;
}

Duration mpc_exec_time(const NodeProfile& node, int iterations, const Profiles& profiles, RngStream& rng) {
  if (iterations < 1) throw std::invalid_argument("mpc_exec_time: iterations must be >= 1");
  Duration jitter{};
  if (profiles.exec_jitter_ms > 0.0) {
    jitter = from_millis(node.compute_scale * rng.lognormal(std::log(profiles.exec_jitter_ms), profiles.exec_jitter_sigma));
  }
  return iterations * node.iter_cost + jitter;
}

}  // namespace edgectl
