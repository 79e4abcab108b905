#pragma once

// Calvin-style dataflow runtime on the virtual clock.
//
// Actors are resident on exactly one node. Each node runs its actors in
// rounds: in a fixed rotation, every actor whose required input ports all
// hold a token fires at most once per round. A firing occupies the node for
// the actor's compute time; its output tokens leave when the firing ends.
//
// Tokens on a connection carry a sequence number and are admitted to the
// receiving port strictly in sequence order (a hold-back buffer absorbs
// reordering by the network). Migration pauses an actor, ships its state and
// queued tokens to the destination and reroutes its inbound connections;
// tokens that reach the old node afterwards are forwarded.

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "edgectl/des.hpp"
#include "edgectl/net.hpp"

namespace edgectl {

/// Raised when a runtime guarantee (conservation, FIFO, exactly-once state
/// transfer) is violated. Scenarios treat this as a hard failure.
class InvariantBreach : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using ActorId = std::uint32_t;
using ConnectionId = std::uint32_t;

/// Time spent by a control sample in each stage; the parts add up to the
/// end-to-end latency.
struct LatencyParts {
  Duration network{};
  Duration overhead{};
  Duration exec{};
  Duration compute{};
  Duration queue{};

  Duration total() const { return network + overhead + exec + compute + queue; }
};

struct Tick {
  std::uint64_t index = 0;
};

struct Reading {
  double value = 0.0;
  SimTime read_stamp{};
  LatencyParts parts;
};

struct SetpointValue {
  double value = 0.0;
};

struct Command {
  double u = 0.0;
  double setpoint = 0.0;
  SimTime read_stamp{};
  LatencyParts parts;
  Node mpc_node = Node::Plant;
  int iterations = 0;
  bool converged = true;
  Duration exec_time{};
  std::optional<std::pair<Node, Node>> migrated;  ///< first command after a migration
};

using Payload = std::variant<std::int64_t, Tick, Reading, SetpointValue, Command>;

struct TraceHop {
  Node node = Node::Plant;
  SimTime enqueued{};
  SimTime dequeued{};
};

struct Token {
  Payload payload;
  SimTime produced_at{};
  std::uint64_t seq = 0;
  std::vector<TraceHop> trace;
  /// Accumulated delivery delay of the current hop, split by cause.
  Duration hop_network{};
  Duration hop_overhead{};
};

enum class ActorKind : std::uint8_t { Clock, Adc, Setpoint, Mpc, Dac, Generic };

std::string_view actor_kind_name(ActorKind k);

struct PortSpec {
  std::string name;
  /// Required ports gate firing; optional ports are drained when non-empty.
  bool required = true;
  /// Backlog on latest-only ports is skipped: when every such port holds
  /// more than one token, the older ones are consumed unused and counted as
  /// overruns.
  bool latest = false;
};

class Runtime;

/// What an actor sees while firing.
class FireContext {
 public:
  FireContext(Runtime& rt, ActorId self, Node node) : rt_(rt), self_(self), node_(node) {}
  SimTime now() const;
  Node node() const { return node_; }
  ActorId self() const { return self_; }
  Runtime& runtime() { return rt_; }

  /// Consumed tokens, indexed like the actor's input ports; empty optional
  /// for an optional port that held nothing.
  std::vector<std::optional<Token>> inputs;

 private:
  Runtime& rt_;
  ActorId self_;
  Node node_;
};

struct Emission {
  std::string port;
  Payload payload;
};

struct FireResult {
  Duration cost{};
  std::vector<Emission> outputs;
};

class Actor {
 public:
  virtual ~Actor() = default;
  virtual ActorKind kind() const = 0;
  virtual std::vector<PortSpec> inputs() const = 0;
  virtual std::vector<std::string> outputs() const = 0;
  /// Called when the firing starts. Outputs are emitted at start + cost.
  virtual FireResult fire(FireContext& ctx) = 0;
  /// Called when the firing ends, before outputs leave.
  virtual void finish(FireContext&) {}
  virtual std::vector<std::byte> snapshot() const = 0;
  virtual void restore(std::span<const std::byte> bytes) = 0;
};

using ActorFactory = std::function<std::unique_ptr<Actor>()>;

/// Delivery delays, split into network and platform overhead.
struct Delay {
  Duration network{};
  Duration overhead{};
  Duration total() const { return network + overhead; }
};

class DeliveryModel {
 public:
  virtual ~DeliveryModel() = default;
  virtual Delay remote(Node from, Node to) = 0;
  virtual Delay local(Node node) = 0;
  /// State transfer during migration.
  virtual Delay migration(Node from, Node to) = 0;
  /// Compute-time multiplier for actors on this node.
  virtual double compute_scale(Node node) = 0;
};

/// Delays drawn from the calibrated profiles: a remote delivery costs
/// transport_legs one-way link samples plus one overhead sample.
class ProfileDelivery : public DeliveryModel {
 public:
  ProfileDelivery(const Profiles& profiles, Engine& engine);
  Delay remote(Node from, Node to) override;
  Delay local(Node node) override;
  Delay migration(Node from, Node to) override;
  double compute_scale(Node node) override;

 private:
  RngStream& link_rng(Node far);

  const Profiles& profiles_;
  Engine& engine_;
  RngStream& overhead_rng_;
};

struct ActorDecl {
  std::string name;
  ActorKind kind = ActorKind::Generic;
  Node node = Node::Plant;
  std::optional<Node> affinity;
  ActorFactory factory;
};

struct ConnectionDecl {
  std::string from_actor;
  std::string from_port;
  std::string to_actor;
  std::string to_port;
  /// Self-loops only: tokens re-arrive exactly one period after the
  /// previous nominal time, independent of the network.
  std::optional<Duration> period;
};

struct AppGraph {
  std::vector<ActorDecl> actors;
  std::vector<ConnectionDecl> connections;
};

struct MigrationReport {
  ActorId actor = 0;
  Node from = Node::Plant;
  Node to = Node::Plant;
  SimTime initiated_at{};
  SimTime completed_at{};
  std::uint64_t tokens_forwarded = 0;
  std::size_t state_bytes = 0;
  bool completed = false;

  Duration downtime() const { return completed_at - initiated_at; }
};

struct ConnectionCounters {
  std::uint64_t emitted = 0;
  std::uint64_t consumed = 0;
  std::uint64_t in_flight = 0;
  std::uint64_t held = 0;    ///< hold-back buffer or pre-instantiation inbox
  std::uint64_t queued = 0;  ///< in the receiving port
  std::uint64_t forwarded = 0;

  bool balanced() const { return emitted == consumed + in_flight + held + queued; }
};

class Runtime {
 public:
  Runtime(Engine& engine, DeliveryModel& delivery);
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  /// Instantiates every actor on its node and primes self-loops with one
  /// token due at the current time. Throws std::invalid_argument on affinity
  /// violations, unknown ports or cycles other than self-loops.
  void deploy(const AppGraph& graph);

  /// Starts the migration protocol. The report is filled in when the actor
  /// resumes at dest; the index returned addresses migrations().
  /// Migrating to the current node completes immediately with zero downtime.
  std::size_t migrate(ActorId actor, Node dest);
  /// Points a connection at a new receiving node. Later emissions take the
  /// new path; tokens already in flight are forwarded on arrival.
  void reroute(ConnectionId conn, Node new_endpoint);

  Engine& engine() { return engine_; }
  SimTime now() const { return engine_.now(); }

  std::optional<ActorId> find_actor(std::string_view name) const;
  ActorId actor_id(std::string_view name) const;
  const std::string& actor_name(ActorId id) const;
  Node location(ActorId id) const;
  bool migrating(ActorId id) const;
  std::size_t actor_count() const { return slots_.size(); }
  Actor& actor(ActorId id);
  std::vector<ActorId> resident(Node node) const;

  ConnectionId connection_count() const { return static_cast<ConnectionId>(conns_.size()); }
  std::optional<ConnectionId> find_connection(std::string_view from_actor, std::string_view from_port,
                                              std::string_view to_actor, std::string_view to_port) const;
  ConnectionCounters counters(ConnectionId conn) const;
  /// Checks conservation on every connection; throws InvariantBreach.
  void check_conservation() const;

  const std::vector<MigrationReport>& migrations() const { return migrations_; }
  std::uint64_t firings(ActorId id) const;
  std::uint64_t total_firings() const;
  /// Samples skipped on the latest-only ports of this actor.
  std::uint64_t overruns(ActorId id) const;

  /// Observer invoked after each state transfer with (actor, sent, received).
  using TransferHook = std::function<void(ActorId, std::span<const std::byte>, std::span<const std::byte>)>;
  void set_transfer_hook(TransferHook hook) { transfer_hook_ = std::move(hook); }

  /// Set once when the actor resumes after a migration; cleared by the read.
  std::optional<std::pair<Node, Node>> take_migration_marker(ActorId id);

  /// Compute time on `node` for work that costs `edge_cost` on the Edge node.
  Duration scaled_cost(Node node, Duration edge_cost);

 private:
  friend class FireContext;

  struct InPort {
    PortSpec spec;
    std::deque<std::pair<ConnectionId, Token>> queue;
  };
  struct HoldBack {
    std::uint64_t next_seq = 0;
    std::map<std::uint64_t, Token> pending;
  };
  struct Slot {
    std::string name;
    ActorKind kind = ActorKind::Generic;
    std::optional<Node> affinity;
    ActorFactory factory;
    std::unique_ptr<Actor> actor;
    std::vector<InPort> in_ports;
    std::vector<std::string> out_ports;
    std::map<ConnectionId, HoldBack> holdback;
    std::deque<std::pair<ConnectionId, Token>> inbox;  ///< arrived at dest before instantiation
    Node location = Node::Plant;
    bool firing = false;
    bool pause_requested = false;
    bool in_transit = false;
    Node dest = Node::Plant;
    std::optional<std::size_t> pending_migration;
    std::optional<std::pair<Node, Node>> just_migrated;
    std::uint64_t firings = 0;
    std::uint64_t overruns = 0;
  };
  struct Connection {
    ActorId from = 0;
    std::size_t from_port = 0;
    ActorId to = 0;
    std::size_t to_port = 0;
    std::optional<Duration> period;
    Node route{};
    std::uint64_t next_seq = 0;
    std::uint64_t emitted = 0;
    std::uint64_t consumed = 0;
    std::uint64_t in_flight = 0;
    std::uint64_t forwarded = 0;
    SimTime last_nominal{};
  };
  struct Scheduler {
    std::vector<ActorId> rotation;
    std::size_t cursor = 0;
    bool fired_this_round = false;
    bool busy = false;
    bool wake_pending = false;
  };

  bool fireable(const Slot& s) const;
  void wake(Node node);
  void run_round(Node node);
  void start_firing(ActorId id);
  void complete_firing(ActorId id, FireResult result, std::shared_ptr<FireContext> ctx, SimTime started);
  void emit(ActorId from, const std::string& port, Payload payload);
  void send(ConnectionId c, Token token, Node from_node, SimTime nominal);
  void arrive(ConnectionId c, Token token, Node at_node);
  void admit(Slot& slot, ConnectionId c, Token token);
  void begin_transfer(ActorId id);
  void finish_transfer(ActorId id, std::vector<std::byte> state);
  Scheduler& scheduler(Node n) { return schedulers_[node_index(n)]; }

  Engine& engine_;
  DeliveryModel& delivery_;
  std::vector<Slot> slots_;
  std::vector<Connection> conns_;
  std::array<Scheduler, 4> schedulers_{};
  std::vector<MigrationReport> migrations_;
  TransferHook transfer_hook_;
};

/// Payload accessor that throws InvariantBreach on a type mismatch.
template <typename T>
const T& payload_as(const Token& t) {
  if (const T* p = std::get_if<T>(&t.payload)) return *p;
  throw InvariantBreach("token carries an unexpected payload type");
}

}  // namespace edgectl
