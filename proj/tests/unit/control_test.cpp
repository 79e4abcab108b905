#include <doctest.h>

#include "edgectl/control.hpp"
#include "edgectl/riccati.hpp"

using namespace edgectl;

TEST_CASE("iterated filter gain converges to the filter Riccati gain") {
  const PlantParams pp;
  const DiscreteModel m = discretize(pp, std::chrono::milliseconds(50));
  const KalmanConfig kf = default_kalman(pp, m);

  // Predicted covariance solves the dual Riccati equation.
  const DynMatrix<double> A = kf.A.transpose();
  const DynMatrix<double> B = kf.C.transpose();
  const DynMatrix<double> W = kf.W;
  const DynMatrix<double> V = kf.V;
  const DynMatrix<double> P = dare<double>(A, B, W, V);
  const Eigen::MatrixXd K_ref = P * kf.C.transpose() * (kf.C * P * kf.C.transpose() + kf.V).inverse();

  ControllerState cs;
  Eigen::Matrix<double, 3, 2> K_it;
  for (int k = 0; k < 20000; ++k) {
    kalman_predict(cs, 0.0, kf);
    K_it = cs.P_cov * kf.C.transpose() * (kf.C * cs.P_cov * kf.C.transpose() + kf.V).inverse();
    kalman_update(cs, Measurement{0.0, 0.0, kSimStart}, kf);
  }
  CHECK((K_it - K_ref).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("controller state round-trips byte for byte") {
  ControllerState cs;
  cs.x_hat = Eigen::Vector3d(0.1, -0.2, 0.03);
  cs.P_cov(0, 1) = cs.P_cov(1, 0) = 1e-4;
  cs.setpoint = 0.3;
  cs.last_u = -0.25;
  cs.warm = Eigen::VectorXd::LinSpaced(7, -0.5, 0.5);
  cs.last_stamp = kSimStart + std::chrono::nanoseconds(123456789012);
  cs.trace = {42, 17};
  const auto bytes = serialize(cs);
  const ControllerState back = deserialize(bytes);
  CHECK(serialize(back) == bytes);
  CHECK(back.last_stamp == cs.last_stamp);
  CHECK(back.warm.size() == 7);
  CHECK(back.trace.seq == 17);

  std::vector<std::byte> cut(bytes.begin(), bytes.end() - 3);
  CHECK_THROWS_AS(deserialize(cut), std::invalid_argument);
  auto wrong = bytes;
  wrong[0] = std::byte{9};
  CHECK_THROWS_AS(deserialize(wrong), std::invalid_argument);
  auto longer = bytes;
  longer.push_back(std::byte{0});
  CHECK_THROWS_AS(deserialize(longer), std::invalid_argument);
}

TEST_CASE("skipped samples are bridged by repeated prediction") {
  const PlantParams pp;
  const Mpc mpc(MpcConfig{}, pp);
  const Profiles prof = default_profiles();
  RngStream jitter("j", 1);

  ControllerState a;
  a.warm = Eigen::VectorXd::Zero(mpc.config().horizon);
  const SimTime t0 = kSimStart + std::chrono::milliseconds(50);
  mpc.step(a, Measurement{0.01, 0.0, t0}, prof.node(Node::Edge), prof, jitter);
  ControllerState b = a;

  const Measurement later{0.02, 0.01, t0 + 3 * mpc.config().h};
  mpc.step(a, later, prof.node(Node::Edge), prof, jitter);

  for (int k = 0; k < 3; ++k) kalman_predict(b, b.last_u, mpc.kalman());
  kalman_update(b, later, mpc.kalman());
  CHECK((a.x_hat - b.x_hat).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((a.P_cov - b.P_cov).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(a.last_stamp == later.stamp);
}

TEST_CASE("inputs respect the bounds and the loop settles at the set-point") {
  PlantParams pp;
  pp.adc_bits.reset();
  MpcConfig cfg;
  const Mpc mpc(cfg, pp);
  const Profiles prof = default_profiles();
  RngStream jitter("j", 2);
  ControllerState cs;
  cs.warm = Eigen::VectorXd::Zero(cfg.horizon);
  cs.setpoint = 0.2;
  PlantState s;
  SimTime t = kSimStart;
  for (int k = 0; k < 400; ++k) {
    const MpcReport r = mpc.step(cs, measure(s, pp, t, nullptr), prof.node(Node::Edge), prof, jitter);
    CHECK(r.u >= cfg.u_min);
    CHECK(r.u <= cfg.u_max);
    CHECK(r.iterations >= 1);
    CHECK(r.iterations <= cfg.max_iter_cap);
    s = step(s, r.u, cfg.h, pp, nullptr);
    t += cfg.h;
  }
  CHECK(!s.off_beam);
  CHECK(std::abs(s.p - 0.2) < 5e-3);
}

TEST_CASE("the condensed Hessian is symmetric positive definite") {
  const Mpc mpc(MpcConfig{}, PlantParams{});
  const auto& c = mpc.condensed();
  CHECK((c.H - c.H.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * c.H.cwiseAbs().maxCoeff());
  CHECK(c.mu > 0.0);
  CHECK(c.L >= c.mu);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.H);
  CHECK(es.eigenvalues().minCoeff() == doctest::Approx(c.mu).epsilon(1e-3));
  CHECK(es.eigenvalues().maxCoeff() == doctest::Approx(c.L).epsilon(1e-6));
}

TEST_CASE("bad controller settings are rejected") {
  MpcConfig cfg;
  cfg.horizon = 0;
  CHECK_THROWS_AS(Mpc(cfg, PlantParams{}), std::invalid_argument);
  cfg = MpcConfig{};
  cfg.max_iter_cap = 0;
  CHECK_THROWS_AS(Mpc(cfg, PlantParams{}), std::invalid_argument);
}
