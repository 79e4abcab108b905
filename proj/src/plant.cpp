#include "edgectl/plant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace edgectl {

DiscreteModel discretize(const PlantParams& params, Duration h) {
  const double dt = to_seconds(h);
  const double kv = params.k_v;
  const double kw = params.k_omega;
  DiscreteModel m;
  // The continuous A is nilpotent (A^3 = 0), so the series for exp(A h) ends.
  m.A << 1.0, dt, 0.5 * kv * dt * dt,
         0.0, 1.0, kv * dt,
         0.0, 0.0, 1.0;
  m.B << kv * kw * dt * dt * dt / 6.0, 0.5 * kv * kw * dt * dt, kw * dt;
  return m;
}

namespace {

void require_finite(const PlantState& s, double u) {
  if (!std::isfinite(s.p) || !std::isfinite(s.v) || !std::isfinite(s.alpha) || !std::isfinite(u)) {
    throw std::domain_error("plant step: non-finite state or input");
  }
}

// Noise-free free-running segment of length dt with constant u.
void integrate(PlantState& s, double u, double dt, const PlantParams& params) {
  const double kv = params.k_v;
  const double kw = params.k_omega;
  const double p = s.p + s.v * dt + 0.5 * kv * s.alpha * dt * dt + kv * kw * u * dt * dt * dt / 6.0;
  const double v = s.v + kv * s.alpha * dt + 0.5 * kv * kw * u * dt * dt;
  const double a = s.alpha + kw * u * dt;
  s.p = p;
  s.v = v;
  s.alpha = a;
}

}  // namespace

PlantState step(const PlantState& state, double u, Duration h, const PlantParams& params,
                RngStream* noise) {
  if (h <= Duration::zero()) throw std::invalid_argument("plant step: h must be positive");
  if (state.off_beam) return state;
  require_finite(state, u);

  PlantState s = state;
  double dt = to_seconds(h);
  const double rate = params.k_omega * u;
  const double amax = params.alpha_max;
  s.alpha = std::clamp(s.alpha, -amax, amax);

  // Split at the instant the angle reaches its limit, then hold it there.
  if (rate != 0.0) {
    const double limit = rate > 0.0 ? amax : -amax;
    const double t_sat = (limit - s.alpha) / rate;
    if (t_sat < dt) {
      const double t1 = std::max(0.0, t_sat);
      integrate(s, u, t1, params);
      s.alpha = limit;
      integrate(s, 0.0, dt - t1, params);
      dt = 0.0;
    }
  }
  if (dt > 0.0) integrate(s, u, dt, params);
  s.alpha = std::clamp(s.alpha, -amax, amax);

  if (noise != nullptr && params.sigma_proc > 0.0) {
    const double scale = std::sqrt(to_seconds(h) / to_seconds(kProcessNoiseReference));
    s.v += params.sigma_proc * scale * noise->normal();
  }
  if (std::abs(s.p) > params.half_length()) s.off_beam = true;
  return s;
}

double quantize(double value, double full_range, std::optional<unsigned> bits) {
  if (!bits) return value;
  const double q = full_range / std::ldexp(1.0, static_cast<int>(*bits));
  return q * std::round(value / q);
}

Measurement measure(const PlantState& state, const PlantParams& params, SimTime stamp,
                    RngStream* noise) {
  const double half = params.half_length();
  double pos = state.p;
  double ang = state.alpha;
  if (noise != nullptr) {
    pos += params.sigma_pos * noise->normal();
    ang += params.sigma_ang * noise->normal();
  }
  pos = std::clamp(pos, -half, half);
  ang = std::clamp(ang, -params.alpha_max, params.alpha_max);
  Measurement m;
  m.pos_reading = std::clamp(quantize(pos, params.beam_length, params.adc_bits), -half, half);
  m.ang_reading = std::clamp(quantize(ang, 2.0 * params.alpha_max, params.adc_bits), -params.alpha_max,
                             params.alpha_max);
  m.stamp = stamp;
  return m;
}

double apply_actuation(double u, const PlantParams& params) {
  if (std::isnan(u)) throw std::domain_error("apply_actuation: NaN input");
  return std::clamp(u, params.u_min_hw, params.u_max_hw);
}

Plant::Plant(PlantParams params, RngStream& noise, PlantState initial)
    : params_(params), noise_(&noise), state_(initial), anchor_(initial) {}

void Plant::advance_to(SimTime t) {
  const double kick = params_.sigma_proc * std::sqrt(to_seconds(max_substep) / to_seconds(kProcessNoiseReference));
  while (t_ < t) {
    const SimTime boundary = kSimStart + ((t_ - kSimStart) / max_substep + 1) * max_substep;
    const SimTime end = std::min(t, boundary);
    // Always integrate from the anchor so intermediate looks at the state
    // leave no rounding trace in the trajectory.
    state_ = step(anchor_, u_, end - anchor_t_, params_, nullptr);
    t_ = end;
    if (t_ == boundary) {
      // One disturbance draw per grid cell, so the realization depends on
      // time only and not on when the plant happens to be observed.
      if (kick > 0.0 && !state_.off_beam) state_.v += kick * noise_->normal();
      anchor_ = state_;
      anchor_t_ = t_;
    }
  }
}

Measurement Plant::sample(SimTime t, RngStream& sensor_noise) {
  advance_to(t);
  return measure(state_, params_, t, &sensor_noise);
}

double Plant::actuate(SimTime t, double u) {
  advance_to(t);
  u_ = apply_actuation(u, params_);
  anchor_ = state_;
  anchor_t_ = t_;
  return u_;
}

void Plant::respawn(SimTime t) {
  advance_to(t);
  state_ = anchor_ = PlantState{};
  anchor_t_ = t_;
  u_ = 0.0;
}

}  // namespace edgectl
