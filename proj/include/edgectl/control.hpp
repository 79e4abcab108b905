#pragma once

// Model predictive controller for the ball and beam plus its Kalman filter.
//
// The MPC minimizes, over the input sequence u_0..u_{T-1},
//   sum_{t<T} (x_t - r)'Q(x_t - r) + R u_t^2 + (x_T - r)'P(x_T - r)
// with r = (setpoint, 0, 0) and P the Riccati terminal weight, subject to
// u_min <= u_t <= u_max and soft bounds on predicted position and angle.
// States are eliminated (condensed), leaving a box QP over the inputs.

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "edgectl/des.hpp"
#include "edgectl/net.hpp"
#include "edgectl/plant.hpp"
#include "edgectl/qp.hpp"

namespace edgectl {

struct MpcConfig {
  Duration h = std::chrono::milliseconds(50);
  int horizon = 40;
  Eigen::Matrix3d Q = Eigen::Vector3d(100.0, 1.0, 1.0).asDiagonal();
  double R = 30.0;
  double u_min = -1.0;
  double u_max = 1.0;
  /// Soft state bounds |p| <= pos_bound, |alpha| <= ang_bound.
  double pos_bound = 0.54;
  double ang_bound = 0.20;
  /// Large on purpose: penalized problems become badly conditioned and the
  /// solver may run into the cap.
  double soft_penalty = 1.4e6;
  int max_iter_cap = 2000;
  double tol = 2e-3;
  /// Re-solves allowed while the set of penalized state bounds changes.
  int max_penalty_passes = 4;
};

/// Stacked prediction X = Phi x0 + Gamma U over x_1..x_T.
struct Condensed {
  Eigen::MatrixXd Phi;    ///< 3T x 3
  Eigen::MatrixXd Gamma;  ///< 3T x T
  Eigen::MatrixXd Qbar;   ///< blockdiag(Q, ..., Q, P)
  Eigen::MatrixXd H;  ///< Gamma' Qbar Gamma + R I
  double L = 0.0;
  double mu = 0.0;
};

/// Throws std::invalid_argument for bad config or if cond(H) > 1e12.
Condensed build_condensed(const MpcConfig& cfg, const DiscreteModel& model, const Eigen::Matrix3d& P);

struct KalmanConfig {
  Eigen::Matrix3d A;
  Eigen::Vector3d B;
  Eigen::Matrix<double, 2, 3> C;
  Eigen::Matrix3d W;
  Eigen::Matrix2d V;
};

/// Filter matched to the plant's noise and quantization levels.
KalmanConfig default_kalman(const PlantParams& plant, const DiscreteModel& model);

struct TraceMeta {
  std::uint64_t run_id = 0;
  std::uint64_t seq = 0;  ///< completed control steps
};

/// Everything a controller carries between samples; exactly what migrates.
struct ControllerState {
  Eigen::Vector3d x_hat = Eigen::Vector3d::Zero();
  Eigen::Matrix3d P_cov = Eigen::Vector3d(1e-2, 1e-2, 1e-3).asDiagonal();
  double setpoint = 0.0;
  double last_u = 0.0;
  Eigen::VectorXd warm;
  /// Read time of the last measurement, for counting skipped samples.
  SimTime last_stamp{};
  TraceMeta trace;
};

/// Canonical little-endian layout:
///   u32 version (=1)
///   f64 x_hat[3]
///   f64 P_cov[9] (row-major)
///   f64 setpoint, f64 last_u
///   u32 warm length, f64 warm[length]
///   i64 last_stamp (ns)
///   u64 run_id, u64 seq
std::vector<std::byte> serialize(const ControllerState& cs);
/// Throws std::invalid_argument on truncated or malformed input.
ControllerState deserialize(std::span<const std::byte> bytes);

void kalman_predict(ControllerState& cs, double u, const KalmanConfig& kf);
/// Throws std::runtime_error if the innovation covariance is singular.
void kalman_update(ControllerState& cs, const Measurement& meas, const KalmanConfig& kf);

struct MpcReport {
  double u = 0.0;
  int iterations = 0;
  bool converged = false;
  Duration exec_time{};
  int penalized = 0;  ///< soft bounds active in the final pass
};

/// Prebuilt controller for one configuration.
class Mpc {
 public:
  Mpc(const MpcConfig& cfg, const PlantParams& plant);

  const MpcConfig& config() const { return cfg_; }
  const DiscreteModel& model() const { return model_; }
  const Eigen::Matrix3d& terminal_weight() const { return P_; }
  const Condensed& condensed() const { return cond_; }
  const KalmanConfig& kalman() const { return kf_; }

  struct Result {
    qp::Solution<double> solution;
    int iterations = 0;
    int penalized = 0;
  };

  /// Solves from the filtered state (absolute coordinates).
  Result solve(const Eigen::Vector3d& x_hat, double setpoint, const Eigen::VectorXd& warm) const;

  /// One control step: filter, solve, shift the warm start. The returned
  /// input is always inside [u_min, u_max]. If samples were skipped since
  /// the previous step, the filter predicts across all of them.
  MpcReport step(ControllerState& cs, const Measurement& meas, const NodeProfile& node, const Profiles& profiles,
                 RngStream& jitter) const;

 private:
  struct PenalizedHessian {
    Eigen::MatrixXd H;
    double L = 0.0;
  };
  /// rows: sorted indices into the stacked prediction.
  const PenalizedHessian& penalized_hessian(const std::vector<int>& rows) const;

  MpcConfig cfg_;
  DiscreteModel model_;
  Eigen::Matrix3d P_;
  Condensed cond_;
  KalmanConfig kf_;
  mutable std::map<std::vector<int>, PenalizedHessian> cache_;
};

}  // namespace edgectl
