#include <doctest.h>

#include "../support/stress.hpp"

using namespace edgectl;
using namespace edgectl::testing;

TEST_CASE("per-connection order survives heavy reordering in the network") {
  Engine engine(5);
  JitterDelivery delivery(engine, 40.0);
  Runtime rt(engine, delivery);
  std::vector<std::int64_t> seen;
  rt.deploy(relay_graph(&seen, std::chrono::milliseconds(1)));
  engine.run_until(kSimStart + std::chrono::seconds(3));
  REQUIRE(seen.size() > 2500);
  for (std::size_t i = 0; i < seen.size(); ++i) REQUIRE(seen[i] == static_cast<std::int64_t>(i));
  CHECK_NOTHROW(rt.check_conservation());
}

TEST_CASE("migration stress: no loss, no duplicates, identical state") {
  for (std::uint64_t seed : {1u, 2u}) {
    const StressReport r = migration_stress(seed, 300);
    CHECK(r.migrations_requested == 300);
    CHECK(r.migrations_completed == 300);
    CHECK(r.transfers == 300);
    CHECK(r.transfer_mismatches == 0);
    CHECK(r.in_order);
    CHECK(r.relay_state_ok);
    CHECK(r.balanced_at_end);
    CHECK(r.delivered > 1000);
  }
}

TEST_CASE("migrating to the current node is a no-op") {
  Engine engine(1);
  JitterDelivery delivery(engine, 5.0);
  Runtime rt(engine, delivery);
  std::vector<std::int64_t> seen;
  rt.deploy(relay_graph(&seen, std::chrono::milliseconds(2)));
  engine.run_until(kSimStart + std::chrono::milliseconds(20));
  const ActorId relay = rt.actor_id("relay");
  const std::size_t i = rt.migrate(relay, Node::Edge);
  CHECK(rt.migrations()[i].completed);
  CHECK(rt.migrations()[i].downtime() == Duration::zero());
  CHECK_FALSE(rt.migrating(relay));
}

TEST_CASE("pinned actors cannot be placed or moved elsewhere") {
  Engine engine(1);
  JitterDelivery delivery(engine, 5.0);
  Runtime rt(engine, delivery);
  std::vector<std::int64_t> seen;
  AppGraph g = relay_graph(&seen, std::chrono::milliseconds(2));
  g.actors[0].node = Node::Edge;  // source is pinned to the plant
  CHECK_THROWS_AS(rt.deploy(g), std::invalid_argument);

  Runtime ok(engine, delivery);
  ok.deploy(relay_graph(&seen, std::chrono::milliseconds(2)));
  CHECK_THROWS(ok.migrate(ok.actor_id("sink"), Node::Aws));
}

TEST_CASE("graphs with cycles or unknown ports are refused") {
  Engine engine(1);
  JitterDelivery delivery(engine, 5.0);
  std::vector<std::int64_t> seen;
  {
    Runtime rt(engine, delivery);
    AppGraph g = relay_graph(&seen, std::chrono::milliseconds(2));
    g.actors.push_back({"relay2", ActorKind::Generic, Node::Edge, std::nullopt, [] { return std::make_unique<RelayActor>(); }});
    g.connections.push_back({"relay", "out", "relay2", "in", std::nullopt});
    g.connections.push_back({"relay2", "out", "relay", "in", std::nullopt});
    CHECK_THROWS_AS(rt.deploy(g), std::invalid_argument);
  }
  {
    Runtime rt(engine, delivery);
    AppGraph g = relay_graph(&seen, std::chrono::milliseconds(2));
    g.connections.push_back({"source", "nope", "sink", "in", std::nullopt});
    CHECK_THROWS_AS(rt.deploy(g), std::invalid_argument);
  }
}

namespace {

// Two latest-only inputs fed in lock step, and a firing much longer than the
// feed period, so a backlog forms on both ports.
class PairSource : public Actor {
 public:
  ActorKind kind() const override { return ActorKind::Generic; }
  std::vector<PortSpec> inputs() const override { return {{"tick", true}}; }
  std::vector<std::string> outputs() const override { return {"tick", "a", "b"}; }
  FireResult fire(FireContext&) override {
    FireResult r;
    r.outputs.push_back({"a", static_cast<std::int64_t>(n_)});
    r.outputs.push_back({"b", static_cast<std::int64_t>(n_)});
    ++n_;
    r.outputs.push_back({"tick", Tick{n_}});
    return r;
  }
  std::vector<std::byte> snapshot() const override { return {}; }
  void restore(std::span<const std::byte>) override {}

 private:
  std::uint64_t n_ = 0;
};

class SlowPair : public Actor {
 public:
  explicit SlowPair(std::vector<std::pair<std::int64_t, std::int64_t>>* got) : got_(got) {}
  ActorKind kind() const override { return ActorKind::Generic; }
  std::vector<PortSpec> inputs() const override { return {{"a", true, true}, {"b", true, true}}; }
  std::vector<std::string> outputs() const override { return {}; }
  FireResult fire(FireContext& ctx) override {
    got_->emplace_back(std::get<std::int64_t>(ctx.inputs[0]->payload), std::get<std::int64_t>(ctx.inputs[1]->payload));
    return {std::chrono::milliseconds(7), {}};
  }
  std::vector<std::byte> snapshot() const override { return {}; }
  void restore(std::span<const std::byte>) override {}

 private:
  std::vector<std::pair<std::int64_t, std::int64_t>>* got_;
};

}  // namespace

TEST_CASE("latest-only ports skip stale tokens in pairs") {
  Engine engine(3);
  JitterDelivery delivery(engine, 0.0, 0.0);
  Runtime rt(engine, delivery);
  std::vector<std::pair<std::int64_t, std::int64_t>> got;
  AppGraph g;
  g.actors = {
      {"src", ActorKind::Generic, Node::Plant, std::nullopt, [] { return std::make_unique<PairSource>(); }},
      {"slow", ActorKind::Generic, Node::Edge, std::nullopt, [&got] { return std::make_unique<SlowPair>(&got); }},
  };
  g.connections = {
      {"src", "tick", "src", "tick", std::chrono::milliseconds(2)},
      {"src", "a", "slow", "a", std::nullopt},
      {"src", "b", "slow", "b", std::nullopt},
  };
  rt.deploy(g);
  engine.run_until(kSimStart + std::chrono::seconds(1));
  REQUIRE(got.size() > 50);
  for (const auto& [a, b] : got) CHECK(a == b);
  for (std::size_t i = 1; i < got.size(); ++i) CHECK(got[i].first > got[i - 1].first);
  const ActorId slow = rt.actor_id("slow");
  CHECK(rt.overruns(slow) > 0);
  // Every value was either used or skipped, apart from what is still queued.
  const ConnectionId ca = *rt.find_connection("src", "a", "slow", "a");
  const ConnectionCounters c = rt.counters(ca);
  CHECK(c.consumed == got.size() + rt.overruns(slow));
  CHECK(c.balanced());
  CHECK_NOTHROW(rt.check_conservation());
}

TEST_CASE("round-robin lets every ready actor on a node fire") {
  Engine engine(1);
  JitterDelivery delivery(engine, 0.0, 0.0);
  Runtime rt(engine, delivery);
  std::vector<std::int64_t> s1, s2;
  AppGraph g;
  g.actors = {
      {"src", ActorKind::Generic, Node::Plant, std::nullopt, [] { return std::make_unique<SourceActor>(); }},
      {"k1", ActorKind::Generic, Node::Plant, std::nullopt, [&s1] { return std::make_unique<SinkActor>(&s1); }},
      {"k2", ActorKind::Generic, Node::Plant, std::nullopt, [&s2] { return std::make_unique<SinkActor>(&s2); }},
  };
  g.connections = {
      {"src", "tick", "src", "tick", std::chrono::milliseconds(1)},
      {"src", "out", "k1", "in", std::nullopt},
      {"src", "out", "k2", "in", std::nullopt},
  };
  rt.deploy(g);
  engine.run_until(kSimStart + std::chrono::milliseconds(200));
  CHECK(s1.size() > 150);
  CHECK(s1.size() == s2.size());
  CHECK(rt.firings(rt.actor_id("k1")) == s1.size());
}
