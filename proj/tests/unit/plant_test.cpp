#include <doctest.h>

#include "edgectl/plant.hpp"

using namespace edgectl;

namespace {

// Exact response of p' = v, v' = kv a, a' = kw u over t with constant u.
PlantState closed_form(const PlantState& s, double u, double t, const PlantParams& pp) {
  const double kv = pp.k_v, kw = pp.k_omega;
  PlantState r = s;
  r.p = s.p + s.v * t + kv * s.alpha * t * t / 2.0 + kv * kw * u * t * t * t / 6.0;
  r.v = s.v + kv * s.alpha * t + kv * kw * u * t * t / 2.0;
  r.alpha = s.alpha + kw * u * t;
  return r;
}

double gap(const PlantState& a, const PlantState& b) {
  return std::max({std::abs(a.p - b.p), std::abs(a.v - b.v), std::abs(a.alpha - b.alpha)});
}

}  // namespace

TEST_CASE("one step matches the closed-form response") {
  const PlantParams pp;
  const PlantState s0{0.12, -0.05, 0.03, false};
  for (double u : {-0.8, -0.1, 0.0, 0.4, 0.9}) {
    const PlantState got = step(s0, u, std::chrono::milliseconds(50), pp, nullptr);
    CHECK(gap(got, closed_form(s0, u, 0.05, pp)) <= 1e-12);
  }
}

TEST_CASE("two half steps compose to one step") {
  const PlantParams pp;
  const PlantState s0{-0.2, 0.1, -0.05, false};
  const Duration h = std::chrono::milliseconds(50);
  for (double u : {-1.0, -0.3, 0.25, 1.0}) {
    const PlantState whole = step(s0, u, h, pp, nullptr);
    const PlantState halves = step(step(s0, u, h / 2, pp, nullptr), u, h / 2, pp, nullptr);
    CHECK(gap(whole, halves) <= 1e-12);
  }
}

TEST_CASE("the discrete model reproduces the exact step") {
  const PlantParams pp;
  const Duration h = std::chrono::milliseconds(50);
  const DiscreteModel m = discretize(pp, h);
  const PlantState s0{0.1, 0.2, -0.01, false};
  const double u = 0.37;
  const Eigen::Vector3d x = m.A * s0.vector() + m.B * u;
  CHECK((x - step(s0, u, h, pp, nullptr).vector()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("the beam angle saturates exactly and the split step stays consistent") {
  const PlantParams pp;
  PlantState s{0.0, 0.0, pp.alpha_max - 1e-3, false};
  const PlantState out = step(s, 1.0, std::chrono::milliseconds(50), pp, nullptr);
  CHECK(out.alpha == pp.alpha_max);
  // The ball accelerates at kv * alpha_max after the limit is reached.
  const double t_sat = 1e-3 / pp.k_omega;
  const PlantState pre = closed_form(s, 1.0, t_sat, pp);
  PlantState held = pre;
  held.alpha = pp.alpha_max;
  const PlantState post = closed_form(held, 0.0, 0.05 - t_sat, pp);
  CHECK(std::abs(out.p - post.p) <= 1e-12);
  CHECK(std::abs(out.v - post.v) <= 1e-12);
}

TEST_CASE("leaving the beam is sticky") {
  const PlantParams pp;
  PlantState s{pp.half_length() - 1e-4, 1.0, 0.0, false};
  s = step(s, 0.0, std::chrono::milliseconds(50), pp, nullptr);
  CHECK(s.off_beam);
  const PlantState again = step(s, -1.0, std::chrono::milliseconds(50), pp, nullptr);
  CHECK(again.off_beam);
  CHECK(again.p == s.p);
}

TEST_CASE("actuation clips to the hardware range and rejects NaN") {
  const PlantParams pp;
  CHECK(apply_actuation(3.0, pp) == pp.u_max_hw);
  CHECK(apply_actuation(-3.0, pp) == pp.u_min_hw);
  CHECK(apply_actuation(0.2, pp) == 0.2);
  CHECK_THROWS(apply_actuation(std::nan(""), pp));
  CHECK_THROWS(step(PlantState{}, 0.0, Duration::zero(), pp, nullptr));
}

TEST_CASE("quantization rounds to the converter grid") {
  CHECK(quantize(0.123456, 1.1, std::nullopt) == 0.123456);
  const double q = 1.1 / 1024.0;
  const double got = quantize(0.123456, 1.1, 10u);
  CHECK(std::abs(got - 0.123456) <= q / 2.0 + 1e-15);
  CHECK(std::abs(got / q - std::round(got / q)) < 1e-9);
}

TEST_CASE("measurements stay inside the sensor ranges") {
  PlantParams pp;
  PlantState s{0.9, 0.0, 0.5, false};
  const Measurement m = measure(s, pp, kSimStart, nullptr);
  CHECK(m.pos_reading <= pp.half_length());
  CHECK(m.ang_reading <= pp.alpha_max);
}

TEST_CASE("lazy plant: sampling does not change the trajectory, noise is reproducible") {
  PlantParams pp;
  RngStream a("plant", 5), b("plant", 5), sa("sensor", 1), sb("sensor", 1);
  Plant p1(pp, a), p2(pp, b);
  p1.actuate(kSimStart + std::chrono::milliseconds(10), 0.3);
  p2.actuate(kSimStart + std::chrono::milliseconds(10), 0.3);
  for (int k = 1; k <= 40; ++k) p1.sample(kSimStart + std::chrono::milliseconds(10 + 7 * k), sa);
  p1.advance_to(kSimStart + std::chrono::seconds(1));
  p2.advance_to(kSimStart + std::chrono::seconds(1));
  CHECK(p1.state().p == p2.state().p);
  CHECK(p1.state().v == p2.state().v);
  CHECK(p1.state().alpha == p2.state().alpha);

  p1.respawn(kSimStart + std::chrono::seconds(2));
  CHECK(p1.state().p == 0.0);
  CHECK(p1.input() == 0.0);
  (void)sb;
}
