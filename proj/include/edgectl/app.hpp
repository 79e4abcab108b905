#pragma once

// The ball-and-beam control application as a dataflow graph:
//
//   clock (50 ms self-loop) -+-> adc_pos --+
//                            +-> adc_ang --+--> mpc --> dac
//   setpoint (N s self-loop) --------------+  (optional, latched)
//
// ADC and DAC actors are pinned to the plant node.

#include <functional>
#include <string>
#include <vector>

#include "edgectl/control.hpp"
#include "edgectl/plant.hpp"
#include "edgectl/runtime.hpp"

namespace edgectl {

/// Shared by every actor of one application instance; owned by the caller.
struct AppEnv {
  Engine* engine = nullptr;
  Plant* plant = nullptr;
  const Mpc* mpc = nullptr;
  const Profiles* profiles = nullptr;
  double setpoint_low = 0.0;
  double setpoint_high = 0.30;
  std::uint64_t run_id = 0;
  /// Called when the DAC applies a command; `applied` is the clipped input.
  std::function<void(const Command& cmd, SimTime at, double applied)> on_actuate;
};

/// One actor of a declarative application description.
struct ActorSpec {
  std::string name;
  ActorKind kind = ActorKind::Generic;
  Node node = Node::Plant;
  std::optional<Node> affinity;
};

/// "actor.port" endpoints; period only on self-loops.
struct ConnectionSpec {
  std::string from;
  std::string to;
  std::optional<Duration> period;
};

struct GraphSpec {
  std::vector<ActorSpec> actors;
  std::vector<ConnectionSpec> connections;
};

/// The standard graph with the MPC at `mpc_node`.
GraphSpec default_graph_spec(Node mpc_node, Duration sample_period, Duration setpoint_period);

/// Binds a spec to actor implementations. Throws std::invalid_argument for
/// unsupported kinds or malformed endpoints. ADC and DAC actors always get
/// plant affinity.
AppGraph build_app_graph(const GraphSpec& spec, AppEnv& env);

/// Canonical byte helpers for small actor states.
void put_u64(std::vector<std::byte>& out, std::uint64_t v);
std::uint64_t get_u64(std::span<const std::byte> in, std::size_t offset);

}  // namespace edgectl
