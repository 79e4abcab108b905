#include <doctest.h>

#include <random>

#include "edgectl/riccati.hpp"

using namespace edgectl;
using Mat = Eigen::MatrixXd;

TEST_CASE("scalar Riccati equation has the golden-ratio solution") {
  const Mat one = Mat::Ones(1, 1);
  const Mat P = dare<double>(one, one, one, one);
  CHECK(std::abs(P(0, 0) - (1.0 + std::sqrt(5.0)) / 2.0) <= 1e-12);
}

TEST_CASE("random stabilizable systems: residual and closed-loop stability") {
  std::mt19937_64 gen(99);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 50; ++t) {
    const int n = 1 + t % 4;
    const int m = 1 + t % 2;
    Mat A(n, n), B(n, m), Cq(n, n), Cr(m, m);
    for (int i = 0; i < n * n; ++i) A.data()[i] = 0.6 * nd(gen);
    for (int i = 0; i < n * m; ++i) B.data()[i] = nd(gen);
    for (int i = 0; i < n * n; ++i) Cq.data()[i] = nd(gen);
    for (int i = 0; i < m * m; ++i) Cr.data()[i] = nd(gen);
    const Mat Q = Cq.transpose() * Cq + 0.1 * Mat::Identity(n, n);
    const Mat R = Cr.transpose() * Cr + 0.1 * Mat::Identity(m, m);
    const Mat P = dare<double>(A, B, Q, R);
    CHECK(dare_residual<double>(A, B, Q, R, P).cwiseAbs().maxCoeff() <= 1e-10);
    const Mat K = lqr_gain<double>(A, B, R, P);
    const Eigen::VectorXcd ev = (A - B * K).eigenvalues();
    CHECK(ev.cwiseAbs().maxCoeff() < 1.0);
    CHECK((P - P.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, P.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("an unstabilizable pair is reported") {
  Mat A(2, 2);
  A << 1.5, 0.0, 0.0, 0.5;
  Mat B(2, 1);
  B << 0.0, 1.0;
  CHECK_THROWS_AS(dare<double>(A, B, Mat::Identity(2, 2), Mat::Ones(1, 1), {2000, 1e-12}), std::runtime_error);
  CHECK_THROWS_AS(dare<double>(A, Mat::Ones(3, 1), Mat::Identity(2, 2), Mat::Ones(1, 1)), std::invalid_argument);
}
