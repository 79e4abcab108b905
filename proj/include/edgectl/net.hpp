#pragma once

// Four-tier infrastructure: per-node compute speed and per-link delay
// profiles, fitted to measured box statistics.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "edgectl/des.hpp"
#include "edgectl/stats.hpp"

namespace edgectl {

enum class Node : std::uint8_t { Plant = 0, Edge = 1, Erdc = 2, Aws = 3 };

inline constexpr std::array<Node, 4> kAllNodes{Node::Plant, Node::Edge, Node::Erdc, Node::Aws};

std::string_view node_name(Node n);
/// Case-insensitive; nullopt for unknown names.
std::optional<Node> parse_node(std::string_view name);
inline std::size_t node_index(Node n) { return static_cast<std::size_t>(n); }

struct LognormalFit {
  double mu = 0.0;
  double sigma = 0.0;

  double median() const;
  double quantile(double p) const;
};

/// Least-squares fit of a log-normal to (q1, median, q3) in log space:
/// mu is the mean of the three log-quantiles and sigma matches the log IQR.
/// Throws std::invalid_argument unless 0 < q1 <= median <= q3.
LognormalFit fit_lognormal(double median, double q1, double q3);

/// Standard normal quantile at 0.75.
inline constexpr double kZ75 = 0.6744897501960817;

struct NodeProfile {
  Node node = Node::Edge;
  double compute_scale = 1.0;  ///< relative to Edge
  Duration iter_cost{};        ///< one fast-gradient iteration on this node
};

/// Delay between the plant and a node, from round-trip statistics.
/// Round trips are drawn from the fitted log-normal, truncated to the
/// whiskers by resampling; a one-way delay is half a round trip.
struct LinkProfile {
  Node far = Node::Edge;
  BoxStats rtt_ms;
  LognormalFit fit;
  bool zero = false;  ///< plant self-link

  double sample_rtt_ms(RngStream& rng) const;
};

Duration sample_one_way(const LinkProfile& link, RngStream& rng);

struct OverheadProfile {
  double median_ms = 0.0;
  double sigma_log = 0.0;

  Duration sample(RngStream& rng) const;
};

/// Complete infrastructure table. See data/profiles.csv for the shipped values.
struct Profiles {
  std::array<BoxStats, 4> rtt_ms{};   ///< plant <-> node round trip
  std::array<BoxStats, 4> exec_ms{};  ///< MPC execution time per node
  double iter_cost_edge_ms = 0.04;
  double exec_jitter_ms = 0.01;  ///< median at Edge scale
  double exec_jitter_sigma = 0.5;
  OverheadProfile overhead{};       ///< per remote hop
  double local_dispatch_ms = 0.2;   ///< per same-node delivery, Edge scale
  double transport_legs = 2.0;      ///< one-way traversals per remote delivery
  double io_cost_ms = 0.25;         ///< ADC / DAC firing, Edge scale
  double light_cost_ms = 0.05;      ///< clock / set-point firing, Edge scale
  double migration_handling_ms = 5.0;

  NodeProfile node(Node n) const;
  LinkProfile link(Node a, Node b) const;
  /// Throws std::invalid_argument describing the first inconsistent entry.
  void validate() const;
};

/// Compiled-in copy of the shipped table.
Profiles default_profiles();
/// CSV with header "entity,stat,value_ms". Unknown rows are errors; missing
/// rows keep the defaults.
Profiles load_profiles(const std::filesystem::path& path);
Profiles parse_profiles(std::string_view csv_text, std::string_view origin = "<string>");
std::string profiles_to_csv(const Profiles& p);

struct LinkCheck {
  Node node = Node::Edge;
  BoxStats target;
  BoxStats sampled;
  double worst_rel_error = 0.0;  ///< over median, q1 and q3
  bool pass = false;
};

/// Draws `samples` round trips per plant link and compares the sampled
/// quartiles with the table. A zero link must sample exactly zero.
std::vector<LinkCheck> check_links(const Profiles& p, std::size_t samples = 10000, std::uint64_t seed = 1,
                                   double rel_tol = 0.05);

/// iterations * iter_cost plus a small log-normal jitter.
Duration mpc_exec_time(const NodeProfile& node, int iterations, const Profiles& profiles, RngStream& rng);

}  // namespace edgectl
