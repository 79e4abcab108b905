#pragma once

// Ball-and-beam plant. Linearized about the level beam:
//   p' = v,  v' = k_v * alpha,  alpha' = k_omega * u
// with k_v < 0, so a positive beam angle rolls the ball toward negative p.
// The input u is the commanded angular velocity of the beam.

#include <Eigen/Dense>

#include <optional>

#include "edgectl/des.hpp"

namespace edgectl {

struct PlantParams {
  double beam_length = 1.10;
  double k_v = -(5.0 / 7.0) * 9.81;
  double k_omega = 0.17;
  double alpha_max = 0.20;
  double u_min_hw = -1.0;
  double u_max_hw = 1.0;
  double sigma_pos = 3e-3;
  double sigma_ang = 2e-3;
  /// Std dev of the velocity disturbance accumulated over one 50 ms sample.
  double sigma_proc = 1e-3;
  /// Empty means an ideal (unquantized) converter.
  std::optional<unsigned> adc_bits = 10;

  double half_length() const { return 0.5 * beam_length; }
};

struct PlantState {
  double p = 0.0;
  double v = 0.0;
  double alpha = 0.0;
  bool off_beam = false;

  Eigen::Vector3d vector() const { return {p, v, alpha}; }
};

struct Measurement {
  double pos_reading = 0.0;
  double ang_reading = 0.0;
  SimTime stamp{};
};

/// Exact zero-order-hold discretization of the triple-integrator chain.
struct DiscreteModel {
  Eigen::Matrix3d A;
  Eigen::Vector3d B;
};

DiscreteModel discretize(const PlantParams& params, Duration h);

/// Reference time over which sigma_proc is specified.
inline constexpr Duration kProcessNoiseReference = std::chrono::milliseconds(50);

/// Advances the plant by h under constant input u. The beam angle saturates
/// at +-alpha_max exactly (the step is split at the saturation instant).
/// Pass noise = nullptr for a deterministic step.
PlantState step(const PlantState& state, double u, Duration h, const PlantParams& params,
                RngStream* noise);

double quantize(double value, double full_range, std::optional<unsigned> bits);

Measurement measure(const PlantState& state, const PlantParams& params, SimTime stamp,
                    RngStream* noise);

/// Clips u into the actuator's hardware range. Throws on NaN.
double apply_actuation(double u, const PlantParams& params);

/// A plant evolving on the virtual clock. The input set by the actuator is
/// held until the next actuation. The state is advanced lazily on a fixed
/// max_substep grid; the velocity disturbance is applied at grid points.
class Plant {
 public:
  Plant(PlantParams params, RngStream& noise, PlantState initial = {});

  const PlantParams& params() const { return params_; }
  const PlantState& state() const { return state_; }
  double input() const { return u_; }

  void advance_to(SimTime t);
  Measurement sample(SimTime t, RngStream& sensor_noise);
  /// Returns the clipped input that was applied.
  double actuate(SimTime t, double u);
  /// Puts the ball back at rest at the beam centre (used after a fall).
  void respawn(SimTime t);

  static constexpr Duration max_substep = std::chrono::milliseconds(5);

 private:
  PlantParams params_;
  RngStream* noise_;
  PlantState state_;
  double u_ = 0.0;
  SimTime t_{};
  PlantState anchor_;
  SimTime anchor_t_{};
};

}  // namespace edgectl
