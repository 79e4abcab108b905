#include "edgectl/control.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "edgectl/riccati.hpp"

namespace edgectl {

Condensed build_condensed(const MpcConfig& cfg, const DiscreteModel& model, const Eigen::Matrix3d& P) {
  const int T = cfg.horizon;
  if (T < 1) throw std::invalid_argument("mpc: horizon must be >= 1");
  if (!(cfg.R > 0.0)) throw std::invalid_argument("mpc: R must be > 0");
  if (!(cfg.u_min <= cfg.u_max)) throw std::invalid_argument("mpc: u_min must not exceed u_max");

  Condensed c;
  c.Phi.resize(3 * T, 3);
  c.Gamma = Eigen::MatrixXd::Zero(3 * T, T);
  Eigen::Matrix3d Ak = Eigen::Matrix3d::Identity();
  for (int k = 0; k < T; ++k) {
    // Column block j of row block k holds A^(k-j) B.
    for (int j = 0; j <= k; ++j) {
      c.Gamma.block(3 * k, j, 3, 1) = (k == j) ? Eigen::MatrixXd(model.B) : Eigen::MatrixXd(model.A * c.Gamma.block(3 * (k - 1), j, 3, 1));
    }
    Ak = model.A * Ak;
    c.Phi.block(3 * k, 0, 3, 3) = Ak;
  }
  c.Qbar = Eigen::MatrixXd::Zero(3 * T, 3 * T);
  for (int k = 0; k < T; ++k) c.Qbar.block(3 * k, 3 * k, 3, 3) = (k == T - 1) ? P : cfg.Q;

  c.H = c.Gamma.transpose() * c.Qbar * c.Gamma;
  c.H.diagonal().array() += cfg.R;
  c.H = 0.5 * (c.H + c.H.transpose()).eval();

  // Gamma' Qbar Gamma is PSD, so R bounds the spectrum from below. Power
  // iteration on L I - H stalls on the tight eigenvalue cluster just above R.
  c.L = qp::largest_eig<double>(c.H);
  c.mu = cfg.R;
  if (c.L / c.mu > 1e12) {
    throw std::invalid_argument("mpc: condensed Hessian too ill-conditioned (cond > 1e12); shorten the horizon");
  }
  return c;
}

KalmanConfig default_kalman(const PlantParams& plant, const DiscreteModel& model) {
  KalmanConfig kf;
  kf.A = model.A;
  kf.B = model.B;
  kf.C << 1.0, 0.0, 0.0,
          0.0, 0.0, 1.0;
  kf.W = Eigen::Vector3d(1e-7, plant.sigma_proc * plant.sigma_proc + 1e-8, 1e-6).asDiagonal();
  double qp = 0.0;
  double qa = 0.0;
  if (plant.adc_bits) {
    qp = plant.beam_length / std::ldexp(1.0, static_cast<int>(*plant.adc_bits));
    qa = 2.0 * plant.alpha_max / std::ldexp(1.0, static_cast<int>(*plant.adc_bits));
  }
  const double vp = plant.sigma_pos * plant.sigma_pos + qp * qp / 12.0;
  const double va = plant.sigma_ang * plant.sigma_ang + qa * qa / 12.0;
  kf.V = Eigen::Vector2d(std::max(vp, 1e-12), std::max(va, 1e-12)).asDiagonal();
  return kf;
}

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::byte> take() { return std::move(out_); }

 private:
  template <typename U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
  }
  std::vector<std::byte> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> in) : in_(in) {}
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  bool done() const { return pos_ == in_.size(); }

 private:
  template <typename U>
  U get() {
    if (in_.size() - pos_ < sizeof(U)) throw std::invalid_argument("controller state: truncated input");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(std::to_integer<unsigned>(in_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

constexpr std::uint32_t kStateVersion = 1;

}  // namespace

std::vector<std::byte> serialize(const ControllerState& cs) {
  Writer w;
  w.u32(kStateVersion);
  for (int i = 0; i < 3; ++i) w.f64(cs.x_hat(i));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) w.f64(cs.P_cov(r, c));
  w.f64(cs.setpoint);
  w.f64(cs.last_u);
  w.u32(static_cast<std::uint32_t>(cs.warm.size()));
  for (Eigen::Index i = 0; i < cs.warm.size(); ++i) w.f64(cs.warm(i));
  w.u64(static_cast<std::uint64_t>(cs.last_stamp.time_since_epoch().count()));
  w.u64(cs.trace.run_id);
  w.u64(cs.trace.seq);
  return w.take();
}

ControllerState deserialize(std::span<const std::byte> bytes) {
  Reader r(bytes);
  if (r.u32() != kStateVersion) throw std::invalid_argument("controller state: unsupported version");
  ControllerState cs;
  for (int i = 0; i < 3; ++i) cs.x_hat(i) = r.f64();
  for (int row = 0; row < 3; ++row)
    for (int c = 0; c < 3; ++c) cs.P_cov(row, c) = r.f64();
  cs.setpoint = r.f64();
  cs.last_u = r.f64();
  const std::uint32_t n = r.u32();
  if (n > (1u << 20)) throw std::invalid_argument("controller state: implausible warm-start length");
  cs.warm.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) cs.warm(i) = r.f64();
  cs.last_stamp = SimTime(Duration(static_cast<std::int64_t>(r.u64())));
  cs.trace.run_id = r.u64();
  cs.trace.seq = r.u64();
  if (!r.done()) throw std::invalid_argument("controller state: trailing bytes");
  return cs;
}

void kalman_predict(ControllerState& cs, double u, const KalmanConfig& kf) {
  cs.x_hat = kf.A * cs.x_hat + kf.B * u;
  cs.P_cov = kf.A * cs.P_cov * kf.A.transpose() + kf.W;
  cs.P_cov = 0.5 * (cs.P_cov + cs.P_cov.transpose()).eval();
}

void kalman_update(ControllerState& cs, const Measurement& meas, const KalmanConfig& kf) {
  const Eigen::Matrix2d S = kf.C * cs.P_cov * kf.C.transpose() + kf.V;
  const Eigen::LDLT<Eigen::Matrix2d> ldlt(S);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || std::abs(S.determinant()) < 1e-300) {
    throw std::runtime_error("kalman_update: singular innovation covariance");
  }
  const Eigen::Matrix<double, 3, 2> K = ldlt.solve(kf.C * cs.P_cov).transpose();
  const Eigen::Vector2d y(meas.pos_reading, meas.ang_reading);
  cs.x_hat += K * (y - kf.C * cs.x_hat);
  cs.P_cov = (Eigen::Matrix3d::Identity() - K * kf.C) * cs.P_cov;
  cs.P_cov = 0.5 * (cs.P_cov + cs.P_cov.transpose()).eval();
}

Mpc::Mpc(const MpcConfig& cfg, const PlantParams& plant) : cfg_(cfg) {
  if (cfg_.h <= Duration::zero()) throw std::invalid_argument("mpc: sampling period must be positive");
  if (cfg_.max_iter_cap < 1) throw std::invalid_argument("mpc: max_iter_cap must be >= 1");
  model_ = discretize(plant, cfg_.h);
  const DynMatrix<double> A = model_.A;
  const DynMatrix<double> B = model_.B;
  const DynMatrix<double> Q = cfg_.Q;
  const DynMatrix<double> R = DynMatrix<double>::Constant(1, 1, cfg_.R);
  P_ = dare<double>(A, B, Q, R);
  cond_ = build_condensed(cfg_, model_, P_);
  kf_ = default_kalman(plant, model_);
}

const Mpc::PenalizedHessian& Mpc::penalized_hessian(const std::vector<int>& rows) const {
  auto it = cache_.find(rows);
  if (it != cache_.end()) return it->second;
  if (cache_.size() > 4096) cache_.clear();
  PenalizedHessian ph;
  ph.H = cond_.H;
  for (int r : rows) ph.H.noalias() += cfg_.soft_penalty * cond_.Gamma.row(r).transpose() * cond_.Gamma.row(r);
  ph.L = rows.empty() ? cond_.L : qp::largest_eig<double>(ph.H);
  return cache_.emplace(rows, std::move(ph)).first->second;
}

Mpc::Result Mpc::solve(const Eigen::Vector3d& x_hat, double setpoint, const Eigen::VectorXd& warm_in) const {
  const int T = cfg_.horizon;
  const Eigen::Vector3d ref(setpoint, 0.0, 0.0);
  const Eigen::VectorXd free_abs = cond_.Phi * x_hat;           // predicted states with U = 0
  const Eigen::VectorXd free_dev = cond_.Phi * (x_hat - ref);   // deviation from the target
  const Eigen::VectorXd g0 = cond_.Gamma.transpose() * (cond_.Qbar * free_dev);

  const Eigen::VectorXd lb = Eigen::VectorXd::Constant(T, cfg_.u_min);
  const Eigen::VectorXd ub = Eigen::VectorXd::Constant(T, cfg_.u_max);
  Eigen::VectorXd warm = warm_in.size() == T ? warm_in : Eigen::VectorXd::Zero(T);
  warm = qp::project<double>(warm, lb, ub);

  auto bound_of = [&](int row) { return (row % 3 == 0) ? cfg_.pos_bound : cfg_.ang_bound; };
  // Signed list: +row for an upper-bound violation, -(row + 1) for lower.
  auto violations = [&](const Eigen::VectorXd& U) {
    std::vector<int> v;
    if (cfg_.soft_penalty <= 0.0) return v;
    const Eigen::VectorXd X = free_abs + cond_.Gamma * U;
    for (int row = 0; row < 3 * T; ++row) {
      if (row % 3 == 1) continue;
      const double b = bound_of(row);
      if (X(row) > b) v.push_back(row);
      else if (X(row) < -b) v.push_back(-(row + 1));
    }
    return v;
  };

  Result res;
  std::vector<int> active = violations(warm);
  Eigen::VectorXd start = warm;
  for (int pass = 0; pass < std::max(1, cfg_.max_penalty_passes); ++pass) {
    std::vector<int> rows;
    rows.reserve(active.size());
    for (int s : active) rows.push_back(s >= 0 ? s : -s - 1);
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    const PenalizedHessian& ph = penalized_hessian(rows);

    qp::Problem<double> prob;
    prob.H = ph.H;
    prob.g = g0;
    for (int s : active) {
      const int row = s >= 0 ? s : -s - 1;
      const double b = s >= 0 ? bound_of(row) : -bound_of(row);
      prob.g.noalias() += cfg_.soft_penalty * (free_abs(row) - b) * cond_.Gamma.row(row).transpose();
    }
    prob.lb = lb;
    prob.ub = ub;
    prob.L = ph.L;
    prob.mu = cond_.mu;  // adding penalty terms only raises the spectrum

    qp::Settings<double> settings;
    settings.max_iter = cfg_.max_iter_cap - res.iterations;
    settings.tol = cfg_.tol;
    res.solution = qp::solve<double>(prob, start, settings);
    res.iterations += res.solution.iterations;
    res.penalized = static_cast<int>(active.size());
    if (!res.solution.converged || res.iterations >= cfg_.max_iter_cap) break;

    // Penalized rows stay penalized; stop once no new bound is violated.
    std::vector<int> cur = active;
    std::sort(cur.begin(), cur.end());
    std::vector<int> grown = cur;
    for (int v : violations(res.solution.z)) {
      if (!std::binary_search(cur.begin(), cur.end(), v)) grown.push_back(v);
    }
    if (grown.size() == cur.size()) break;
    active = std::move(grown);
    start = res.solution.z;
  }
  res.solution.iterations = res.iterations;
  return res;
}

MpcReport Mpc::step(ControllerState& cs, const Measurement& meas, const NodeProfile& node, const Profiles& profiles,
                    RngStream& jitter) const {
  if (cs.trace.seq > 0) {
    const auto gap = meas.stamp - cs.last_stamp;
    const std::int64_t steps = std::max<std::int64_t>(1, (gap + cfg_.h / 2) / cfg_.h);
    for (std::int64_t k = 0; k < steps; ++k) kalman_predict(cs, cs.last_u, kf_);
  }
  cs.last_stamp = meas.stamp;
  kalman_update(cs, meas, kf_);

  const Result r = solve(cs.x_hat, cs.setpoint, cs.warm);
  const Eigen::VectorXd& z = r.solution.z;
  const int T = cfg_.horizon;

  MpcReport rep;
  rep.u = std::clamp(z(0), cfg_.u_min, cfg_.u_max);
  rep.iterations = r.iterations;
  rep.converged = r.solution.converged;
  rep.penalized = r.penalized;
  rep.exec_time = mpc_exec_time(node, std::max(1, r.iterations), profiles, jitter);

  cs.warm.resize(T);
  if (T > 1) cs.warm.head(T - 1) = z.tail(T - 1);
  cs.warm(T - 1) = z(T - 1);
  cs.last_u = rep.u;
  ++cs.trace.seq;
  return rep;
}

}  // namespace edgectl
