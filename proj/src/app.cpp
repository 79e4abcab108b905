#include "edgectl/app.hpp"

#include <cstring>

namespace edgectl {

void put_u64(std::vector<std::byte>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::span<const std::byte> in, std::size_t offset) {
  if (in.size() < offset + 8) throw std::invalid_argument("actor state truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[offset + i]) << (8 * i);
  return v;
}

namespace {

Duration edge_ms(double ms) { return from_millis(ms); }

// Counts ticks and re-arms its own timer.
class ClockActor : public Actor {
 public:
  explicit ClockActor(AppEnv& env) : env_(env) {}
  ActorKind kind() const override { return ActorKind::Clock; }
  std::vector<PortSpec> inputs() const override { return {{"tick", true}}; }
  std::vector<std::string> outputs() const override { return {"tick", "out"}; }
  FireResult fire(FireContext& ctx) override {
    FireResult r;
    r.cost = ctx.runtime().scaled_cost(ctx.node(), edge_ms(env_.profiles->light_cost_ms));
    r.outputs.push_back({"out", Tick{count_}});
    ++count_;
    r.outputs.push_back({"tick", Tick{count_}});
    return r;
  }
  std::vector<std::byte> snapshot() const override {
    std::vector<std::byte> out;
    put_u64(out, count_);
    return out;
  }
  void restore(std::span<const std::byte> b) override { count_ = get_u64(b, 0); }

 private:
  AppEnv& env_;
  std::uint64_t count_ = 0;
};

class AdcActor : public Actor {
 public:
  AdcActor(AppEnv& env, bool position)
      : env_(env), position_(position), noise_(env.engine->rng_stream(position ? "adc.pos" : "adc.ang")) {}
  ActorKind kind() const override { return ActorKind::Adc; }
  std::vector<PortSpec> inputs() const override { return {{"trigger", true}}; }
  std::vector<std::string> outputs() const override { return {"y"}; }
  FireResult fire(FireContext& ctx) override {
    const Measurement m = env_.plant->sample(ctx.now(), noise_);
    FireResult r;
    r.cost = ctx.runtime().scaled_cost(ctx.node(), edge_ms(env_.profiles->io_cost_ms));
    Reading reading{position_ ? m.pos_reading : m.ang_reading, ctx.now(), {}};
    reading.parts.compute = r.cost;
    r.outputs.push_back({"y", reading});
    return r;
  }
  std::vector<std::byte> snapshot() const override { return {}; }
  void restore(std::span<const std::byte>) override {}

 private:
  AppEnv& env_;
  bool position_;
  RngStream& noise_;
};

// Alternates low, high, low, ... once per timer tick.
class SetpointActor : public Actor {
 public:
  explicit SetpointActor(AppEnv& env) : env_(env) {}
  ActorKind kind() const override { return ActorKind::Setpoint; }
  std::vector<PortSpec> inputs() const override { return {{"tick", true}}; }
  std::vector<std::string> outputs() const override { return {"tick", "sp"}; }
  FireResult fire(FireContext& ctx) override {
    FireResult r;
    r.cost = ctx.runtime().scaled_cost(ctx.node(), edge_ms(env_.profiles->light_cost_ms));
    r.outputs.push_back({"sp", SetpointValue{count_ % 2 == 0 ? env_.setpoint_low : env_.setpoint_high}});
    ++count_;
    r.outputs.push_back({"tick", Tick{count_}});
    return r;
  }
  std::vector<std::byte> snapshot() const override {
    std::vector<std::byte> out;
    put_u64(out, count_);
    return out;
  }
  void restore(std::span<const std::byte> b) override { count_ = get_u64(b, 0); }

 private:
  AppEnv& env_;
  std::uint64_t count_ = 0;
};

// Folds the time since the read stamp that is not yet attributed into the
// queueing share, so the parts always sum to the elapsed time.
void account_hop(LatencyParts& parts, const Token& tok, SimTime read_stamp, SimTime now) {
  parts.network += tok.hop_network;
  parts.overhead += tok.hop_overhead;
  parts.queue += (now - read_stamp) - parts.total();
}

class MpcActor : public Actor {
 public:
  explicit MpcActor(AppEnv& env) : env_(env), jitter_(env.engine->rng_stream("mpc.exec")) {
    cs_.setpoint = env.setpoint_low;
    cs_.warm = Eigen::VectorXd::Zero(env.mpc->config().horizon);
    cs_.trace.run_id = env.run_id;
  }
  ActorKind kind() const override { return ActorKind::Mpc; }
  std::vector<PortSpec> inputs() const override { return {{"y", true, true}, {"ang", true, true}, {"y_ref", false}}; }
  std::vector<std::string> outputs() const override { return {"u"}; }
  FireResult fire(FireContext& ctx) override {
    const Token& ty = *ctx.inputs[0];
    const Token& ta = *ctx.inputs[1];
    if (ctx.inputs[2]) cs_.setpoint = payload_as<SetpointValue>(*ctx.inputs[2]).value;
    const Reading& pos = payload_as<Reading>(ty);
    const Reading& ang = payload_as<Reading>(ta);

    const Measurement meas{pos.value, ang.value, pos.read_stamp};
    const MpcReport rep = env_.mpc->step(cs_, meas, env_.profiles->node(ctx.node()), *env_.profiles, jitter_);

    Command cmd;
    cmd.u = rep.u;
    cmd.setpoint = cs_.setpoint;
    cmd.read_stamp = pos.read_stamp;
    cmd.parts = pos.parts;
    account_hop(cmd.parts, ty, pos.read_stamp, ctx.now());
    cmd.parts.exec = rep.exec_time;
    cmd.mpc_node = ctx.node();
    cmd.iterations = rep.iterations;
    cmd.converged = rep.converged;
    cmd.exec_time = rep.exec_time;
    cmd.migrated = ctx.runtime().take_migration_marker(ctx.self());

    FireResult r;
    r.cost = rep.exec_time;
    r.outputs.push_back({"u", cmd});
    return r;
  }
  std::vector<std::byte> snapshot() const override { return serialize(cs_); }
  void restore(std::span<const std::byte> b) override { cs_ = deserialize(b); }

 private:
  AppEnv& env_;
  RngStream& jitter_;
  ControllerState cs_;
};

class DacActor : public Actor {
 public:
  explicit DacActor(AppEnv& env) : env_(env) {}
  ActorKind kind() const override { return ActorKind::Dac; }
  std::vector<PortSpec> inputs() const override { return {{"u", true}}; }
  std::vector<std::string> outputs() const override { return {}; }
  FireResult fire(FireContext& ctx) override {
    const Token& t = *ctx.inputs[0];
    pending_ = payload_as<Command>(t);
    account_hop(pending_.parts, t, pending_.read_stamp, ctx.now());
    started_ = ctx.now();
    FireResult r;
    r.cost = ctx.runtime().scaled_cost(ctx.node(), edge_ms(env_.profiles->io_cost_ms));
    return r;
  }
  void finish(FireContext& ctx) override {
    pending_.parts.compute += ctx.now() - started_;
    const double applied = env_.plant->actuate(ctx.now(), pending_.u);
    if (env_.on_actuate) env_.on_actuate(pending_, ctx.now(), applied);
  }
  std::vector<std::byte> snapshot() const override { return {}; }
  void restore(std::span<const std::byte>) override {}

 private:
  AppEnv& env_;
  Command pending_;
  SimTime started_{};
};

std::pair<std::string, std::string> split_endpoint(const std::string& ep) {
  const auto dot = ep.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == ep.size()) {
    throw std::invalid_argument("endpoint '" + ep + "' is not of the form actor.port");
  }
  return {ep.substr(0, dot), ep.substr(dot + 1)};
}

}  // namespace

GraphSpec default_graph_spec(Node mpc_node, Duration sample_period, Duration setpoint_period) {
  GraphSpec g;
  g.actors = {
      {"clock", ActorKind::Clock, Node::Plant, std::nullopt},
      {"adc_pos", ActorKind::Adc, Node::Plant, Node::Plant},
      {"adc_ang", ActorKind::Adc, Node::Plant, Node::Plant},
      {"setpoint", ActorKind::Setpoint, Node::Plant, std::nullopt},
      {"mpc", ActorKind::Mpc, mpc_node, std::nullopt},
      {"dac", ActorKind::Dac, Node::Plant, Node::Plant},
  };
  g.connections = {
      {"clock.tick", "clock.tick", sample_period},
      {"clock.out", "adc_pos.trigger", std::nullopt},
      {"clock.out", "adc_ang.trigger", std::nullopt},
      {"setpoint.tick", "setpoint.tick", setpoint_period},
      {"adc_pos.y", "mpc.y", std::nullopt},
      {"adc_ang.y", "mpc.ang", std::nullopt},
      {"setpoint.sp", "mpc.y_ref", std::nullopt},
      {"mpc.u", "dac.u", std::nullopt},
  };
  return g;
}

AppGraph build_app_graph(const GraphSpec& spec, AppEnv& env) {
  if (!env.engine || !env.plant || !env.mpc || !env.profiles) {
    throw std::invalid_argument("application environment is incomplete");
  }
  AppGraph g;
  for (const ActorSpec& a : spec.actors) {
    ActorDecl d{a.name, a.kind, a.node, a.affinity, {}};
    AppEnv* e = &env;
    switch (a.kind) {
      case ActorKind::Clock: d.factory = [e] { return std::make_unique<ClockActor>(*e); }; break;
      case ActorKind::Setpoint: d.factory = [e] { return std::make_unique<SetpointActor>(*e); }; break;
      case ActorKind::Mpc: d.factory = [e] { return std::make_unique<MpcActor>(*e); }; break;
      case ActorKind::Adc: {
        const bool pos = a.name.find("ang") == std::string::npos;
        d.factory = [e, pos] { return std::make_unique<AdcActor>(*e, pos); };
        d.affinity = Node::Plant;
        break;
      }
      case ActorKind::Dac:
        d.factory = [e] { return std::make_unique<DacActor>(*e); };
        d.affinity = Node::Plant;
        break;
      case ActorKind::Generic:
        throw std::invalid_argument("actor '" + a.name + "': generic actors are not part of this application");
    }
    g.actors.push_back(std::move(d));
  }
  for (const ConnectionSpec& c : spec.connections) {
    auto [fa, fp] = split_endpoint(c.from);
    auto [ta, tp] = split_endpoint(c.to);
    g.connections.push_back({fa, fp, ta, tp, c.period});
  }
  return g;
}

}  // namespace edgectl
