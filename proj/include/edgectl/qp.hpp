#pragma once

// Box-constrained strongly convex QP
//   minimize 1/2 z'Hz + g'z   subject to lb <= z <= ub
// solved by Nesterov's fast gradient method with a hard iteration cap.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>

namespace edgectl::qp {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct Problem {
  Matrix<Scalar> H;
  Vector<Scalar> g;
  Vector<Scalar> lb;
  Vector<Scalar> ub;
  Scalar L = 0;   ///< upper bound on the largest eigenvalue of H
  Scalar mu = 0;  ///< lower bound on the smallest eigenvalue of H

  Eigen::Index size() const { return g.size(); }
};

template <typename Scalar>
struct Solution {
  Vector<Scalar> z;
  int iterations = 0;
  bool converged = false;
  /// Infinity norm of z - proj(z - grad f(z)).
  Scalar residual = 0;
};

template <typename Scalar>
struct Settings {
  int max_iter = 2000;
  Scalar tol = Scalar(1e-6);
};

template <typename Scalar>
Vector<Scalar> project(const Vector<Scalar>& z, const Vector<Scalar>& lb, const Vector<Scalar>& ub) {
  return z.cwiseMax(lb).cwiseMin(ub);
}

template <typename Scalar>
Scalar objective(const Problem<Scalar>& p, const Vector<Scalar>& z) {
  return Scalar(0.5) * z.dot(p.H * z) + p.g.dot(z);
}

template <typename Scalar>
Scalar projected_gradient_residual(const Problem<Scalar>& p, const Vector<Scalar>& z) {
  const Vector<Scalar> grad = p.H * z + p.g;
  return (z - project<Scalar>(z - grad, p.lb, p.ub)).template lpNorm<Eigen::Infinity>();
}

template <typename Scalar>
void validate(const Problem<Scalar>& p) {
  const auto n = p.size();
  if (p.H.rows() != n || p.H.cols() != n || p.lb.size() != n || p.ub.size() != n) {
    throw std::invalid_argument("qp: dimension mismatch");
  }
  if (!p.H.allFinite() || !p.g.allFinite()) throw std::domain_error("qp: non-finite H or g");
  if (((p.H - p.H.transpose()).cwiseAbs().array() > Scalar(1e-12) * std::max(Scalar(1), p.H.cwiseAbs().maxCoeff()))
          .any()) {
    throw std::invalid_argument("qp: H is not symmetric");
  }
  if ((p.lb.array() > p.ub.array()).any()) throw std::invalid_argument("qp: lb > ub");
  if (!(p.mu > Scalar(0)) || !(p.L >= p.mu)) throw std::invalid_argument("qp: need 0 < mu <= L");
}

/// Every iterate is projected, so the returned z is feasible whether or not
/// the tolerance was reached. At least one iteration is always taken.
template <typename Scalar>
Solution<Scalar> solve(const Problem<Scalar>& p, const std::optional<Vector<Scalar>>& warm,
                       const Settings<Scalar>& settings = {}) {
  validate(p);
  if (settings.max_iter < 1) throw std::invalid_argument("qp: max_iter must be >= 1");
  const auto n = p.size();

  Vector<Scalar> z = warm ? project<Scalar>(*warm, p.lb, p.ub) : project<Scalar>(Vector<Scalar>::Zero(n), p.lb, p.ub);
  if (warm && warm->size() != n) throw std::invalid_argument("qp: warm start has wrong size");
  Vector<Scalar> y = z;
  Vector<Scalar> z_prev = z;

  const Scalar sl = std::sqrt(p.L);
  const Scalar sm = std::sqrt(p.mu);
  const Scalar beta = (sl - sm) / (sl + sm);
  const Scalar step = Scalar(1) / p.L;

  Solution<Scalar> out;
  for (int k = 1; k <= settings.max_iter; ++k) {
    z_prev.swap(z);
    z = project<Scalar>(y - step * (p.H * y + p.g), p.lb, p.ub);
    y = z + beta * (z - z_prev);
    out.iterations = k;
    out.residual = projected_gradient_residual(p, z);
    if (out.residual <= settings.tol) {
      out.converged = true;
      break;
    }
  }
  out.z = std::move(z);
  return out;
}

/// Dominant eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration. Stops once the eigen-residual |Mx - rx| is tiny relative to the
/// Rayleigh quotient r, or r (monotone for PSD M) has stagnated.
template <typename Scalar>
Scalar largest_eig(const Matrix<Scalar>& M, int max_iter = 200000, Scalar rel_tol = Scalar(1e-9)) {
  const auto n = M.rows();
  if (n == 0 || M.cols() != n) throw std::invalid_argument("largest_eig: need a square non-empty matrix");
  Vector<Scalar> x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = Scalar(1) + Scalar(i + 1) / Scalar(7 * n);
  x.normalize();
  Scalar prev = -std::numeric_limits<Scalar>::infinity();
  for (int k = 0; k < max_iter; ++k) {
    const Vector<Scalar> y = M * x;
    const Scalar r = x.dot(y);
    const Scalar scale = std::max(std::abs(r), std::numeric_limits<Scalar>::min());
    const Scalar resid = (y - r * x).norm();
    if (resid <= Scalar(1e-3) * rel_tol * scale || std::abs(r - prev) <= Scalar(1e-2) * rel_tol * scale) return r;
    const Scalar norm = y.norm();
    if (norm == Scalar(0)) return Scalar(0);
    x = y / norm;
    prev = r;
  }
  throw std::runtime_error("largest_eig: power iteration did not converge");
}

/// Extreme eigenvalues of a symmetric matrix by power iteration: the largest
/// from H, the smallest as L - lambda_max(L I - H).
template <typename Scalar>
std::pair<Scalar, Scalar> extremal_eigs(const Matrix<Scalar>& H, int max_iter = 200000,
                                        Scalar rel_tol = Scalar(1e-9)) {
  const auto n = H.rows();
  if (n == 0 || H.cols() != n) throw std::invalid_argument("extremal_eigs: need a square non-empty matrix");
  const Scalar L = largest_eig<Scalar>(H, max_iter, rel_tol);
  const Matrix<Scalar> shifted = L * Matrix<Scalar>::Identity(n, n) - H;
  const Scalar gap = largest_eig<Scalar>(shifted, max_iter, rel_tol);
  return {L, L - gap};
}

}  // namespace edgectl::qp
