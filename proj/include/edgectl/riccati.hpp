#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace edgectl {

template <typename Scalar>
using DynMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct DareOptions {
  int max_iter = 100000;
  /// Stop when |P_{k+1} - P_k|_inf <= tol * max(1, |P_k|_inf).
  Scalar tol = Scalar(1e-12);
};

template <typename Scalar>
DynMatrix<Scalar> dare_residual(const DynMatrix<Scalar>& A, const DynMatrix<Scalar>& B,
                                const DynMatrix<Scalar>& Q, const DynMatrix<Scalar>& R,
                                const DynMatrix<Scalar>& P);

// A few Newton (Hewer) steps from a converged fixed point: the recursion
// creeps when the closed loop is slow, Newton does not. Each step solves
// P = Acl' P Acl + Q + K'RK through the Kronecker form, so only small n.
template <typename Scalar>
DynMatrix<Scalar> newton_polish(const DynMatrix<Scalar>& A, const DynMatrix<Scalar>& B, const DynMatrix<Scalar>& Q,
                                const DynMatrix<Scalar>& R, DynMatrix<Scalar> P) {
  const auto n = A.rows();
  if (n > 16) return P;
  auto size = [&](const DynMatrix<Scalar>& X) { return dare_residual<Scalar>(A, B, Q, R, X).cwiseAbs().maxCoeff(); };
  Scalar best = size(P);
  const DynMatrix<Scalar> I = DynMatrix<Scalar>::Identity(n * n, n * n);
  for (int k = 0; k < 3; ++k) {
    const DynMatrix<Scalar> K = (R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
    const DynMatrix<Scalar> Acl = A - B * K;
    const DynMatrix<Scalar> rhs = Q + K.transpose() * R * K;
    DynMatrix<Scalar> kron(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) kron.block(i * n, j * n, n, n) = Acl(j, i) * Acl.transpose();
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> vec =
        (I - kron).fullPivLu().solve(Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(rhs.data(), n * n));
    DynMatrix<Scalar> next = Eigen::Map<const DynMatrix<Scalar>>(vec.data(), n, n);
    next = Scalar(0.5) * (next + next.transpose()).eval();
    if (!next.allFinite()) break;
    const Scalar r = size(next);
    if (!(r < best)) break;
    best = r;
    P = std::move(next);
  }
  return P;
}

/// Discrete algebraic Riccati equation
///   P = A'PA - A'PB (R + B'PB)^{-1} B'PA + Q
/// by fixed-point iteration of the Riccati recursion started at P = Q.
template <typename Scalar>
DynMatrix<Scalar> dare(const DynMatrix<Scalar>& A, const DynMatrix<Scalar>& B, const DynMatrix<Scalar>& Q,
                       const DynMatrix<Scalar>& R, const DareOptions<Scalar>& opts = {}) {
  const auto n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.cols() ||
      R.cols() != B.cols()) {
    throw std::invalid_argument("dare: dimension mismatch");
  }
  DynMatrix<Scalar> P = Q;
  for (int k = 0; k < opts.max_iter; ++k) {
    const DynMatrix<Scalar> BtPA = B.transpose() * P * A;
    const DynMatrix<Scalar> S = R + B.transpose() * P * B;
    DynMatrix<Scalar> next = A.transpose() * P * A - BtPA.transpose() * S.ldlt().solve(BtPA) + Q;
    next = Scalar(0.5) * (next + next.transpose()).eval();
    if (!next.allFinite()) break;
    const Scalar scale = std::max(Scalar(1), P.cwiseAbs().rowwise().sum().maxCoeff());
    const Scalar delta = (next - P).cwiseAbs().rowwise().sum().maxCoeff();
    P = std::move(next);
    if (delta <= opts.tol * scale) return newton_polish<Scalar>(A, B, Q, R, std::move(P));
  }
  throw std::runtime_error("dare: iteration did not converge (non-stabilizable pair?)");
}

/// Residual of the Riccati equation, for checking a returned P.
template <typename Scalar>
DynMatrix<Scalar> dare_residual(const DynMatrix<Scalar>& A, const DynMatrix<Scalar>& B,
                                const DynMatrix<Scalar>& Q, const DynMatrix<Scalar>& R,
                                const DynMatrix<Scalar>& P) {
  const DynMatrix<Scalar> BtPA = B.transpose() * P * A;
  const DynMatrix<Scalar> S = R + B.transpose() * P * B;
  return A.transpose() * P * A - P - BtPA.transpose() * S.ldlt().solve(BtPA) + Q;
}

/// State-feedback gain K = (R + B'PB)^{-1} B'PA, so u = -K x.
template <typename Scalar>
DynMatrix<Scalar> lqr_gain(const DynMatrix<Scalar>& A, const DynMatrix<Scalar>& B, const DynMatrix<Scalar>& R,
                           const DynMatrix<Scalar>& P) {
  return (R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
}

}  // namespace edgectl
