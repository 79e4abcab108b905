#include <doctest.h>

#include "../support/qp_oracle.hpp"

using namespace edgectl;
using namespace edgectl::testing;

TEST_CASE("fast gradient agrees with active-set enumeration on random QPs") {
  std::mt19937_64 gen(20240611);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + t % 8;
    const auto p = random_problem(gen, n);
    const auto oracle = enumerate_active_sets(p);
    REQUIRE(oracle.has_value());
    const auto sol = qp::solve<double>(p, std::nullopt, {200000, 1e-12});
    CHECK(sol.converged);
    worst = std::max(worst, (sol.z - *oracle).lpNorm<Eigen::Infinity>());
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("iterates stay feasible even when the cap stops the solver") {
  std::mt19937_64 gen(7);
  const auto p = random_problem(gen, 6);
  const auto sol = qp::solve<double>(p, std::nullopt, {1, 1e-14});
  CHECK(sol.iterations == 1);
  CHECK_FALSE(sol.converged);
  CHECK((sol.z.array() >= p.lb.array()).all());
  CHECK((sol.z.array() <= p.ub.array()).all());
  CHECK(sol.residual == doctest::Approx(qp::projected_gradient_residual(p, sol.z)));
}

TEST_CASE("a warm start at the optimum stops after one iteration") {
  std::mt19937_64 gen(11);
  const auto p = random_problem(gen, 5);
  const auto ref = qp::solve<double>(p, std::nullopt, {200000, 1e-13});
  const auto again = qp::solve<double>(p, ref.z, {200000, 1e-9});
  CHECK(again.iterations == 1);
  CHECK(again.converged);
}

TEST_CASE("float instantiation solves a small problem") {
  qp::Problem<float> p;
  p.H = Eigen::MatrixXf::Identity(2, 2) * 2.0f;
  p.g = Eigen::Vector2f(-2.0f, 4.0f);
  p.lb = Eigen::Vector2f(-1.0f, -1.0f);
  p.ub = Eigen::Vector2f(0.5f, 1.0f);
  p.mu = 2.0f;
  p.L = 2.0f;
  const auto s = qp::solve<float>(p, std::nullopt, {1000, 1e-6f});
  CHECK(s.z(0) == doctest::Approx(0.5f));
  CHECK(s.z(1) == doctest::Approx(-1.0f));
}

TEST_CASE("malformed problems are rejected") {
  qp::Problem<double> p;
  p.H = Mat::Identity(2, 2);
  p.g = Vec::Zero(2);
  p.lb = Vec::Constant(2, -1.0);
  p.ub = Vec::Constant(2, 1.0);
  p.mu = 1.0;
  p.L = 1.0;
  CHECK_NOTHROW(qp::solve<double>(p, std::nullopt));

  auto bad = p;
  bad.H(0, 1) = 0.3;
  CHECK_THROWS_AS(qp::solve<double>(bad, std::nullopt), std::invalid_argument);
  bad = p;
  bad.lb(1) = 2.0;
  CHECK_THROWS_AS(qp::solve<double>(bad, std::nullopt), std::invalid_argument);
  bad = p;
  bad.mu = 0.0;
  CHECK_THROWS_AS(qp::solve<double>(bad, std::nullopt), std::invalid_argument);
  bad = p;
  bad.g(0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(qp::solve<double>(bad, std::nullopt), std::domain_error);
  CHECK_THROWS_AS(qp::solve<double>(p, Vec::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS(qp::solve<double>(p, std::nullopt, {0, 1e-6}), std::invalid_argument);
}

TEST_CASE("power iteration matches the symmetric eigensolver") {
  std::mt19937_64 gen(3);
  for (int t = 0; t < 20; ++t) {
    const auto p = random_problem(gen, 2 + t % 7);
    const auto [L, mu] = qp::extremal_eigs<double>(p.H);
    CHECK(L == doctest::Approx(p.L).epsilon(1e-6));
    CHECK(mu == doctest::Approx(p.mu).epsilon(1e-4));
  }
}
