#pragma once

// Generic actors and an adversarial delivery model for runtime tests: a
// periodic source, a stateful relay that gets migrated around, and a sink.

#include <algorithm>
#include <functional>
#include <memory>
#include <vector>

#include "edgectl/app.hpp"
#include "edgectl/runtime.hpp"

namespace edgectl::testing {

/// Every delay is drawn uniformly from a wide range, so tokens overtake
/// each other all the time.
class JitterDelivery : public DeliveryModel {
 public:
  JitterDelivery(Engine& e, double max_remote_ms, double max_local_ms = 0.3)
      : rng_(e.rng_stream("test.jitter")), max_remote_(max_remote_ms), max_local_(max_local_ms) {}
  Delay remote(Node, Node) override {
    return {from_millis(rng_.uniform() * max_remote_), from_millis(rng_.uniform() * 2.0)};
  }
  Delay local(Node) override { return {Duration::zero(), from_millis(rng_.uniform() * max_local_)}; }
  Delay migration(Node, Node) override { return {from_millis(rng_.uniform() * max_remote_), from_millis(1.0)}; }
  double compute_scale(Node n) override { return n == Node::Plant ? 2.0 : 1.0; }

 private:
  RngStream& rng_;
  double max_remote_;
  double max_local_;
};

class SourceActor : public Actor {
 public:
  ActorKind kind() const override { return ActorKind::Generic; }
  std::vector<PortSpec> inputs() const override { return {{"tick", true}}; }
  std::vector<std::string> outputs() const override { return {"tick", "out"}; }
  FireResult fire(FireContext&) override {
    FireResult r;
    r.cost = std::chrono::microseconds(50);
    r.outputs.push_back({"out", static_cast<std::int64_t>(n_++)});
    r.outputs.push_back({"tick", Tick{n_}});
    return r;
  }
  std::vector<std::byte> snapshot() const override {
    std::vector<std::byte> b;
    put_u64(b, n_);
    return b;
  }
  void restore(std::span<const std::byte> b) override { n_ = get_u64(b, 0); }

 private:
  std::uint64_t n_ = 0;
};

/// Forwards values and folds them into a running checksum, which is the
/// state that has to survive migration.
class RelayActor : public Actor {
 public:
  ActorKind kind() const override { return ActorKind::Generic; }
  std::vector<PortSpec> inputs() const override { return {{"in", true}}; }
  std::vector<std::string> outputs() const override { return {"out"}; }
  FireResult fire(FireContext& ctx) override {
    const std::int64_t v = std::get<std::int64_t>(ctx.inputs[0]->payload);
    ++count_;
    sum_ = sum_ * 31 + static_cast<std::uint64_t>(v);
    FireResult r;
    r.cost = std::chrono::microseconds(300);
    r.outputs.push_back({"out", v});
    return r;
  }
  std::vector<std::byte> snapshot() const override {
    std::vector<std::byte> b;
    put_u64(b, count_);
    put_u64(b, sum_);
    return b;
  }
  void restore(std::span<const std::byte> b) override {
    count_ = get_u64(b, 0);
    sum_ = get_u64(b, 8);
  }
  std::uint64_t count() const { return count_; }
  std::uint64_t sum() const { return sum_; }

 private:
  std::uint64_t count_ = 0;
  std::uint64_t sum_ = 0;
};

class SinkActor : public Actor {
 public:
  explicit SinkActor(std::vector<std::int64_t>* seen) : seen_(seen) {}
  ActorKind kind() const override { return ActorKind::Generic; }
  std::vector<PortSpec> inputs() const override { return {{"in", true}}; }
  std::vector<std::string> outputs() const override { return {}; }
  FireResult fire(FireContext& ctx) override {
    seen_->push_back(std::get<std::int64_t>(ctx.inputs[0]->payload));
    return {std::chrono::microseconds(20), {}};
  }
  std::vector<std::byte> snapshot() const override { return {}; }
  void restore(std::span<const std::byte>) override {}

 private:
  std::vector<std::int64_t>* seen_;
};

inline AppGraph relay_graph(std::vector<std::int64_t>* seen, Duration period) {
  AppGraph g;
  g.actors = {
      {"source", ActorKind::Generic, Node::Plant, Node::Plant, [] { return std::make_unique<SourceActor>(); }},
      {"relay", ActorKind::Generic, Node::Edge, std::nullopt, [] { return std::make_unique<RelayActor>(); }},
      {"sink", ActorKind::Generic, Node::Plant, Node::Plant, [seen] { return std::make_unique<SinkActor>(seen); }},
  };
  g.connections = {
      {"source", "tick", "source", "tick", period},
      {"source", "out", "relay", "in", std::nullopt},
      {"relay", "out", "sink", "in", std::nullopt},
  };
  return g;
}

struct StressReport {
  std::size_t migrations_requested = 0;
  std::size_t migrations_completed = 0;
  std::size_t transfers = 0;
  std::size_t transfer_mismatches = 0;
  std::size_t conservation_checks = 0;
  std::size_t delivered = 0;
  bool in_order = true;          ///< sink saw 0, 1, 2, ... with no gaps or repeats
  bool relay_state_ok = true;    ///< relay checksum matches what the sink saw
  bool balanced_at_end = true;
  std::uint64_t relay_forwarded = 0;
};

/// Migrates the relay to a random other node every `every` until `count`
/// migrations have been requested, then lets the pipeline drain.
inline StressReport migration_stress(std::uint64_t seed, std::size_t count, Duration every = std::chrono::milliseconds(7),
                                     double max_remote_ms = 30.0) {
  Engine engine(seed);
  JitterDelivery delivery(engine, max_remote_ms);
  Runtime rt(engine, delivery);
  std::vector<std::int64_t> seen;
  rt.deploy(relay_graph(&seen, std::chrono::milliseconds(2)));
  const ActorId relay = rt.actor_id("relay");

  StressReport rep;
  rt.set_transfer_hook([&](ActorId, std::span<const std::byte> sent, std::span<const std::byte> got) {
    ++rep.transfers;
    if (sent.size() != got.size() || !std::equal(sent.begin(), sent.end(), got.begin())) ++rep.transfer_mismatches;
  });

  RngStream& pick = engine.rng_stream("test.pick");
  std::function<void()> tick = [&] {
    rt.check_conservation();
    ++rep.conservation_checks;
    if (rep.migrations_requested >= count) return;
    if (!rt.migrating(relay)) {
      std::vector<Node> others;
      for (Node n : kAllNodes) {
        if (n != rt.location(relay)) others.push_back(n);
      }
      rt.migrate(relay, others[pick.uniform_index(others.size())]);
      ++rep.migrations_requested;
    }
    engine.schedule(every, "test.migrate", tick);
  };
  engine.schedule(every, "test.migrate", tick);

  // Long enough for every requested migration plus a drain period.
  const SimTime end = kSimStart + every * static_cast<std::int64_t>(count * 3) + std::chrono::seconds(1);
  while (rep.migrations_requested < count && engine.now() < end) {
    engine.run_until(engine.now() + std::chrono::milliseconds(500));
  }
  engine.run_until(engine.now() + std::chrono::milliseconds(500));

  for (const MigrationReport& m : rt.migrations()) rep.migrations_completed += m.completed;
  rep.delivered = seen.size();
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] != static_cast<std::int64_t>(i)) {
      rep.in_order = false;
      break;
    }
  }
  try {
    rt.check_conservation();
  } catch (const InvariantBreach&) {
    rep.balanced_at_end = false;
  }

  // The relay checksum covers everything it forwarded; replay the same
  // fold over the values it emitted (a prefix of 0, 1, 2, ...).
  // The relay counts a value when its firing starts and emits it when the
  // firing ends, so compare at an instant where it is not mid-firing.
  const auto& r = dynamic_cast<const RelayActor&>(rt.actor(relay));
  const ConnectionId to_sink = *rt.find_connection("relay", "out", "sink", "in");
  SimTime until = engine.now();
  for (int i = 0; i < 1000 && rt.counters(to_sink).emitted != r.count(); ++i) {
    until += std::chrono::microseconds(50);
    engine.run_until(until);
  }
  rep.relay_forwarded = r.count();
  std::uint64_t sum = 0;
  for (std::uint64_t v = 0; v < r.count(); ++v) sum = sum * 31 + v;
  rep.relay_state_ok = sum == r.sum() && rt.counters(to_sink).emitted == r.count();
  return rep;
}

}  // namespace edgectl::testing
