#include "edgectl/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

namespace edgectl {

std::string_view actor_kind_name(ActorKind k) {
  switch (k) {
    case ActorKind::Clock: return "clock";
    case ActorKind::Adc: return "adc";
    case ActorKind::Setpoint: return "setpoint";
    case ActorKind::Mpc: return "mpc";
    case ActorKind::Dac: return "dac";
    case ActorKind::Generic: return "generic";
  }
  return "unknown";
}

SimTime FireContext::now() const { return rt_.now(); }

ProfileDelivery::ProfileDelivery(const Profiles& profiles, Engine& engine)
    : profiles_(profiles), engine_(engine), overhead_rng_(engine.rng_stream("net.overhead")) {}

RngStream& ProfileDelivery::link_rng(Node far) {
  return engine_.rng_stream("net." + std::string(node_name(far)));
}

Delay ProfileDelivery::remote(Node from, Node to) {
  Delay d;
  const LinkProfile link = profiles_.link(from, to);
  RngStream& rng = link_rng(link.far);
  const int legs = std::max(1, static_cast<int>(std::lround(profiles_.transport_legs)));
  for (int i = 0; i < legs; ++i) d.network += sample_one_way(link, rng);
  d.overhead = profiles_.overhead.sample(overhead_rng_);
  return d;
}

Delay ProfileDelivery::local(Node node) {
  return Delay{Duration::zero(), from_millis(profiles_.local_dispatch_ms * compute_scale(node))};
}

Delay ProfileDelivery::migration(Node from, Node to) {
  const LinkProfile link = profiles_.link(from, to);
  return Delay{sample_one_way(link, link_rng(link.far)), from_millis(profiles_.migration_handling_ms)};
}

double ProfileDelivery::compute_scale(Node node) { return profiles_.node(node).compute_scale; }

Runtime::Runtime(Engine& engine, DeliveryModel& delivery) : engine_(engine), delivery_(delivery) {}

Runtime::~Runtime() = default;

Duration Runtime::scaled_cost(Node node, Duration edge_cost) {
  return Duration{std::llround(static_cast<double>(edge_cost.count()) * delivery_.compute_scale(node))};
}

void Runtime::deploy(const AppGraph& graph) {
  if (!slots_.empty()) throw std::logic_error("deploy: runtime already holds an application");
  std::map<std::string, ActorId, std::less<>> by_name;
  for (const ActorDecl& d : graph.actors) {
    if (by_name.count(d.name)) throw std::invalid_argument("deploy: duplicate actor name '" + d.name + "'");
    if (d.affinity && *d.affinity != d.node) {
      throw std::invalid_argument("deploy: actor '" + d.name + "' requires node " + std::string(node_name(*d.affinity)) +
                                  " but is placed on " + std::string(node_name(d.node)));
    }
    if (!d.factory) throw std::invalid_argument("deploy: actor '" + d.name + "' has no factory");
    by_name.emplace(d.name, static_cast<ActorId>(by_name.size()));
  }
  std::vector<Slot> slots;
  for (const ActorDecl& d : graph.actors) {
    Slot s;
    s.name = d.name;
    s.kind = d.kind;
    s.affinity = d.affinity;
    s.factory = d.factory;
    s.actor = d.factory();
    for (PortSpec& p : s.actor->inputs()) s.in_ports.push_back(InPort{std::move(p), {}});
    s.out_ports = s.actor->outputs();
    s.location = d.node;
    slots.push_back(std::move(s));
  }

  auto port_index = [](const auto& ports, std::string_view name, auto get) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < ports.size(); ++i) {
      if (get(ports[i]) == name) return i;
    }
    return std::nullopt;
  };

  std::vector<Connection> conns;
  std::vector<std::set<ActorId>> succ(slots.size());
  for (const ConnectionDecl& cd : graph.connections) {
    const std::string label = cd.from_actor + "." + cd.from_port + " -> " + cd.to_actor + "." + cd.to_port;
    auto fi = by_name.find(cd.from_actor);
    auto ti = by_name.find(cd.to_actor);
    if (fi == by_name.end() || ti == by_name.end()) throw std::invalid_argument("deploy: unknown actor in " + label);
    Connection c;
    c.from = fi->second;
    c.to = ti->second;
    auto fp = port_index(slots[c.from].out_ports, cd.from_port, [](const std::string& s) -> std::string_view { return s; });
    auto tp = port_index(slots[c.to].in_ports, cd.to_port, [](const InPort& p) -> std::string_view { return p.spec.name; });
    if (!fp || !tp) throw std::invalid_argument("deploy: unknown port in " + label);
    c.from_port = *fp;
    c.to_port = *tp;
    if (c.from == c.to) {
      if (!cd.period || *cd.period <= Duration::zero()) {
        throw std::invalid_argument("deploy: self-loop " + label + " needs a positive period");
      }
      c.period = cd.period;
    } else {
      if (cd.period) throw std::invalid_argument("deploy: only self-loops may carry a period (" + label + ")");
      succ[c.from].insert(c.to);
    }
    c.route = slots[c.to].location;
    conns.push_back(c);
  }

  // Reject cycles other than declared self-loops.
  std::vector<int> color(slots.size(), 0);
  std::function<void(ActorId)> visit = [&](ActorId a) {
    color[a] = 1;
    for (ActorId b : succ[a]) {
      if (color[b] == 1) throw std::invalid_argument("deploy: application graph has a cycle through '" + slots[b].name + "'");
      if (color[b] == 0) visit(b);
    }
    color[a] = 2;
  };
  for (ActorId a = 0; a < slots.size(); ++a) {
    if (color[a] == 0) visit(a);
  }

  slots_ = std::move(slots);
  conns_ = std::move(conns);
  for (ActorId a = 0; a < slots_.size(); ++a) scheduler(slots_[a].location).rotation.push_back(a);

  for (ConnectionId c = 0; c < conns_.size(); ++c) {
    if (!conns_[c].period) continue;
    Connection& conn = conns_[c];
    Token t{Payload{Tick{0}}, now(), conn.next_seq++, {}, {}, {}};
    ++conn.emitted;
    ++conn.in_flight;
    conn.last_nominal = now();
    engine_.schedule_at(now(), "timer:" + slots_[conn.to].name,
                        [this, c, t = std::move(t)]() mutable { arrive(c, std::move(t), slots_[conns_[c].to].location); });
  }
}

std::optional<ActorId> Runtime::find_actor(std::string_view name) const {
  for (ActorId a = 0; a < slots_.size(); ++a) {
    if (slots_[a].name == name) return a;
  }
  return std::nullopt;
}

ActorId Runtime::actor_id(std::string_view name) const {
  if (auto a = find_actor(name)) return *a;
  throw std::invalid_argument("unknown actor '" + std::string(name) + "'");
}

const std::string& Runtime::actor_name(ActorId id) const { return slots_.at(id).name; }
Node Runtime::location(ActorId id) const { return slots_.at(id).location; }
bool Runtime::migrating(ActorId id) const { return slots_.at(id).in_transit || slots_.at(id).pause_requested; }

Actor& Runtime::actor(ActorId id) {
  Slot& s = slots_.at(id);
  if (!s.actor) throw std::logic_error("actor '" + s.name + "' is in transit");
  return *s.actor;
}

std::vector<ActorId> Runtime::resident(Node node) const {
  std::vector<ActorId> out;
  for (ActorId a = 0; a < slots_.size(); ++a) {
    if (!slots_[a].in_transit && slots_[a].location == node) out.push_back(a);
  }
  return out;
}

std::optional<ConnectionId> Runtime::find_connection(std::string_view from_actor, std::string_view from_port,
                                                     std::string_view to_actor, std::string_view to_port) const {
  for (ConnectionId c = 0; c < conns_.size(); ++c) {
    const Connection& k = conns_[c];
    if (slots_[k.from].name == from_actor && slots_[k.from].out_ports[k.from_port] == from_port &&
        slots_[k.to].name == to_actor && slots_[k.to].in_ports[k.to_port].spec.name == to_port) {
      return c;
    }
  }
  return std::nullopt;
}

ConnectionCounters Runtime::counters(ConnectionId c) const {
  const Connection& k = conns_.at(c);
  const Slot& s = slots_[k.to];
  ConnectionCounters out;
  out.emitted = k.emitted;
  out.consumed = k.consumed;
  out.in_flight = k.in_flight;
  out.forwarded = k.forwarded;
  if (auto it = s.holdback.find(c); it != s.holdback.end()) out.held += it->second.pending.size();
  for (const auto& entry : s.inbox) out.held += (entry.first == c);
  for (const auto& entry : s.in_ports[k.to_port].queue) out.queued += (entry.first == c);
  return out;
}

void Runtime::check_conservation() const {
  for (ConnectionId c = 0; c < conns_.size(); ++c) {
    const ConnectionCounters k = counters(c);
    if (!k.balanced()) {
      const Connection& conn = conns_[c];
      throw InvariantBreach("token conservation violated on " + slots_[conn.from].name + " -> " +
                            slots_[conn.to].name + ": emitted " + std::to_string(k.emitted) + ", consumed " +
                            std::to_string(k.consumed) + ", in flight " + std::to_string(k.in_flight) + ", held " +
                            std::to_string(k.held) + ", queued " + std::to_string(k.queued));
    }
  }
}

std::uint64_t Runtime::firings(ActorId id) const { return slots_.at(id).firings; }

std::uint64_t Runtime::total_firings() const {
  std::uint64_t n = 0;
  for (const Slot& s : slots_) n += s.firings;
  return n;
}

std::uint64_t Runtime::overruns(ActorId id) const { return slots_.at(id).overruns; }

std::optional<std::pair<Node, Node>> Runtime::take_migration_marker(ActorId id) {
  auto out = slots_.at(id).just_migrated;
  slots_.at(id).just_migrated.reset();
  return out;
}

bool Runtime::fireable(const Slot& s) const {
  if (!s.actor || s.in_transit || s.pause_requested || s.firing) return false;
  bool any = false;
  for (const InPort& p : s.in_ports) {
    if (p.spec.required && p.queue.empty()) return false;
    any = any || !p.queue.empty();
  }
  return any;
}

void Runtime::wake(Node node) {
  Scheduler& sc = scheduler(node);
  if (sc.busy || sc.wake_pending) return;
  sc.wake_pending = true;
  engine_.schedule(Duration::zero(), "round:" + std::string(node_name(node)), [this, node] { run_round(node); });
}

void Runtime::run_round(Node node) {
  Scheduler& sc = scheduler(node);
  sc.wake_pending = false;
  if (sc.busy) return;
  for (int pass = 0; pass < 2; ++pass) {
    while (sc.cursor < sc.rotation.size()) {
      const ActorId id = sc.rotation[sc.cursor++];
      if (fireable(slots_[id])) {
        sc.fired_this_round = true;
        start_firing(id);
        return;
      }
    }
    sc.cursor = 0;
    if (!sc.fired_this_round) return;
    sc.fired_this_round = false;
  }
}

void Runtime::start_firing(ActorId id) {
  Slot& s = slots_[id];
  const Node node = s.location;
  Scheduler& sc = scheduler(node);
  s.firing = true;
  sc.busy = true;
  auto ctx = std::make_shared<FireContext>(*this, id, node);
  ctx->inputs.resize(s.in_ports.size());
  // Latest-only ports are trimmed together so their tokens stay paired.
  std::size_t stale = 0;
  bool any_latest = false;
  for (const InPort& p : s.in_ports) {
    if (!p.spec.latest) continue;
    const std::size_t extra = p.queue.empty() ? 0 : p.queue.size() - 1;
    stale = any_latest ? std::min(stale, extra) : extra;
    any_latest = true;
  }
  s.overruns += stale;
  for (std::size_t i = 0; i < s.in_ports.size(); ++i) {
    auto& q = s.in_ports[i].queue;
    if (q.empty()) continue;
    if (s.in_ports[i].spec.latest) {
      for (std::size_t k = 0; k < stale; ++k) {
        ++conns_[q.front().first].consumed;
        q.pop_front();
      }
    }
    auto [c, tok] = std::move(q.front());
    q.pop_front();
    ++conns_[c].consumed;
    if (!tok.trace.empty()) tok.trace.back().dequeued = now();
    ctx->inputs[i] = std::move(tok);
  }
  const SimTime started = now();
  FireResult result = s.actor->fire(*ctx);
  ++s.firings;
  if (result.cost < Duration::zero()) throw InvariantBreach("actor '" + s.name + "' reported a negative cost");
  engine_.schedule(result.cost, "fire:" + s.name,
                   [this, id, r = std::move(result), ctx, started]() mutable {
                     complete_firing(id, std::move(r), std::move(ctx), started);
                   });
}

void Runtime::complete_firing(ActorId id, FireResult result, std::shared_ptr<FireContext> ctx, SimTime) {
  Slot& s = slots_[id];
  const Node node = s.location;
  s.actor->finish(*ctx);
  s.firing = false;
  scheduler(node).busy = false;
  for (Emission& e : result.outputs) emit(id, e.port, std::move(e.payload));
  if (s.pause_requested) begin_transfer(id);
  wake(node);
}

void Runtime::emit(ActorId from, const std::string& port, Payload payload) {
  const Slot& s = slots_[from];
  auto it = std::find(s.out_ports.begin(), s.out_ports.end(), port);
  if (it == s.out_ports.end()) throw InvariantBreach("actor '" + s.name + "' emitted on unknown port '" + port + "'");
  const std::size_t pi = static_cast<std::size_t>(it - s.out_ports.begin());
  for (ConnectionId c = 0; c < conns_.size(); ++c) {
    Connection& conn = conns_[c];
    if (conn.from != from || conn.from_port != pi) continue;
    Token t{payload, now(), conn.next_seq++, {}, {}, {}};
    ++conn.emitted;
    SimTime nominal = now();
    if (conn.period) {
      conn.last_nominal += *conn.period;
      nominal = conn.last_nominal;
    }
    send(c, std::move(t), s.location, nominal);
  }
}

void Runtime::send(ConnectionId c, Token token, Node from_node, SimTime nominal) {
  Connection& conn = conns_[c];
  ++conn.in_flight;
  const std::string label = "deliver:" + slots_[conn.to].name;
  if (conn.period) {
    // Timer tokens: no network, and no drift when the node ran late.
    const SimTime at = std::max(nominal, now());
    engine_.schedule_at(at, label, [this, c, t = std::move(token)]() mutable {
      arrive(c, std::move(t), slots_[conns_[c].to].location);
    });
    return;
  }
  const Node to_node = conn.route;
  const Delay d = from_node == to_node ? delivery_.local(to_node) : delivery_.remote(from_node, to_node);
  token.hop_network += d.network;
  token.hop_overhead += d.overhead;
  engine_.schedule(d.total(), label,
                   [this, c, to_node, t = std::move(token)]() mutable { arrive(c, std::move(t), to_node); });
}

void Runtime::arrive(ConnectionId c, Token token, Node at_node) {
  Connection& conn = conns_[c];
  if (conn.in_flight == 0) throw InvariantBreach("arrival on a connection with nothing in flight");
  --conn.in_flight;
  Slot& s = slots_[conn.to];
  if (conn.period) {
    if (s.in_transit) {
      s.inbox.emplace_back(c, std::move(token));
    } else {
      admit(s, c, std::move(token));
    }
    return;
  }
  if (!s.in_transit && s.location == at_node) {
    admit(s, c, std::move(token));
    return;
  }
  if (s.in_transit && s.dest == at_node) {
    s.inbox.emplace_back(c, std::move(token));
    return;
  }
  // Stale route: forward to where the actor is (or is going).
  const Node target = s.in_transit ? s.dest : s.location;
  ++conn.forwarded;
  if (s.pending_migration) ++migrations_[*s.pending_migration].tokens_forwarded;
  ++conn.in_flight;
  const Delay d = delivery_.remote(at_node, target);
  token.hop_network += d.network;
  token.hop_overhead += d.overhead;
  engine_.schedule(d.total(), "forward:" + s.name,
                   [this, c, target, t = std::move(token)]() mutable { arrive(c, std::move(t), target); });
}

void Runtime::admit(Slot& s, ConnectionId c, Token token) {
  HoldBack& hb = s.holdback[c];
  auto enqueue = [&](Token t) {
    t.trace.push_back(TraceHop{s.location, now(), now()});
    s.in_ports[conns_[c].to_port].queue.emplace_back(c, std::move(t));
    ++hb.next_seq;
  };
  if (token.seq < hb.next_seq) {
    throw InvariantBreach("duplicate token seq " + std::to_string(token.seq) + " for '" + s.name + "'");
  }
  if (token.seq > hb.next_seq) {
    if (!hb.pending.emplace(token.seq, std::move(token)).second) {
      throw InvariantBreach("duplicate held token for '" + s.name + "'");
    }
    return;
  }
  enqueue(std::move(token));
  for (auto it = hb.pending.begin(); it != hb.pending.end() && it->first == hb.next_seq;) {
    enqueue(std::move(it->second));
    it = hb.pending.erase(it);
  }
  if (!s.in_transit) wake(s.location);
}

std::size_t Runtime::migrate(ActorId id, Node dest) {
  Slot& s = slots_.at(id);
  if (s.in_transit || s.pause_requested) throw std::logic_error("actor '" + s.name + "' is already migrating");
  if (s.affinity && *s.affinity != dest) {
    throw std::invalid_argument("actor '" + s.name + "' is pinned to " + std::string(node_name(*s.affinity)));
  }
  MigrationReport r;
  r.actor = id;
  r.from = s.location;
  r.to = dest;
  r.initiated_at = now();
  const std::size_t idx = migrations_.size();
  if (dest == s.location) {
    r.completed_at = now();
    r.completed = true;
    migrations_.push_back(r);
    return idx;
  }
  migrations_.push_back(r);
  s.pause_requested = true;
  s.pending_migration = idx;
  s.dest = dest;
  if (!s.firing) begin_transfer(id);
  return idx;
}

void Runtime::reroute(ConnectionId c, Node new_endpoint) { conns_.at(c).route = new_endpoint; }

void Runtime::begin_transfer(ActorId id) {
  Slot& s = slots_[id];
  std::vector<std::byte> state = s.actor->snapshot();
  MigrationReport& r = migrations_[*s.pending_migration];
  r.state_bytes = state.size();
  s.pause_requested = false;
  s.in_transit = true;
  Scheduler& sc = scheduler(s.location);
  auto it = std::find(sc.rotation.begin(), sc.rotation.end(), id);
  if (it != sc.rotation.end()) {
    const auto pos = static_cast<std::size_t>(it - sc.rotation.begin());
    sc.rotation.erase(it);
    if (pos < sc.cursor) --sc.cursor;
  }
  // The old instance is gone; queued tokens travel with the state.
  s.actor.reset();
  const Delay d = delivery_.migration(s.location, s.dest);
  engine_.schedule(d.total(), "migrate:" + s.name,
                   [this, id, st = std::move(state)]() mutable { finish_transfer(id, std::move(st)); });
}

void Runtime::finish_transfer(ActorId id, std::vector<std::byte> state) {
  Slot& s = slots_[id];
  std::unique_ptr<Actor> fresh = s.factory();
  fresh->restore(state);
  const std::vector<std::byte> check = fresh->snapshot();
  if (transfer_hook_) transfer_hook_(id, state, check);
  if (check != state) throw InvariantBreach("state of '" + s.name + "' changed in transfer");
  s.actor = std::move(fresh);
  const Node from = s.location;
  s.location = s.dest;
  s.in_transit = false;
  for (Connection& c : conns_) {
    if (c.to == id && !c.period) c.route = s.location;
  }
  scheduler(s.location).rotation.push_back(id);
  MigrationReport& r = migrations_[*s.pending_migration];
  r.completed_at = now();
  r.completed = true;
  s.pending_migration.reset();
  s.just_migrated = std::make_pair(from, s.location);
  auto inbox = std::move(s.inbox);
  s.inbox.clear();
  for (auto& [c, tok] : inbox) admit(s, c, std::move(tok));
  wake(s.location);
}

}  // namespace edgectl
