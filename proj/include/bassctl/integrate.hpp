#pragma once

// Time stepping for the deterministic flow, the additive-noise SDE and the
// noisy observer.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "bassctl/model.hpp"

namespace bassctl {

/// Uniform grid on [0, t_end] with n_steps intervals.
class TimeGrid {
 public:
  TimeGrid(std::size_t n_steps, double t_end) : n_steps_(n_steps), t_end_(t_end) {
    if (n_steps_ < 1) throw std::invalid_argument("TimeGrid: n_steps must be >= 1");
    if (!(t_end_ > 0.0) || !std::isfinite(t_end_)) {
      throw std::invalid_argument("TimeGrid: t_end must be positive and finite");
    }
  }

  static constexpr std::size_t kDefaultSteps = 500;

  std::size_t n_steps() const noexcept { return n_steps_; }
  std::size_t n_points() const noexcept { return n_steps_ + 1; }
  double t_end() const noexcept { return t_end_; }
  double dt() const noexcept { return t_end_ / static_cast<double>(n_steps_); }
  // Computed as t_end * k / n so that the last node is exactly t_end.
  double t(std::size_t k) const noexcept {
    return t_end_ * static_cast<double>(k) / static_cast<double>(n_steps_);
  }

  TimeGrid refined(std::size_t factor) const { return TimeGrid(n_steps_ * factor, t_end_); }

  bool operator==(const TimeGrid&) const = default;

 private:
  std::size_t n_steps_;
  double t_end_;
};

struct Trajectory {
  TimeGrid grid;
  std::vector<double> states;  // n_steps + 1 values

  double final_state() const { return states.back(); }
};

/// Brownian increments dW_k over [t_k, t_{k+1}); W(t_k) = sum_{j<k} dW_j.
struct NoisePath {
  TimeGrid grid;
  std::vector<double> increments;  // n_steps values
  std::uint64_t seed = 0;

  double terminal_value() const {
    double w = 0.0;
    for (double dw : increments) w += dw;
    return w;
  }

  /// W at every grid node, starting from W(0) = 0.
  std::vector<double> brownian_path() const {
    std::vector<double> w(increments.size() + 1, 0.0);
    for (std::size_t k = 0; k < increments.size(); ++k) w[k + 1] = w[k] + increments[k];
    return w;
  }
};

/// Standard normal variates from a 64-bit Mersenne Twister via Box-Muller.
/// std::normal_distribution is implementation-defined, so it would break
/// cross-platform reproducibility of seeded paths.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1], u2 in [0, 1)
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Per-path seed for Monte Carlo ensembles.
constexpr std::uint64_t path_seed(std::uint64_t base_seed, std::size_t path_index) noexcept {
  return base_seed + static_cast<std::uint64_t>(path_index);
}

inline NoisePath sample_noise(const TimeGrid& grid, std::uint64_t seed) {
  NormalStream normal(seed);
  const double scale = std::sqrt(grid.dt());
  NoisePath path{grid, std::vector<double>(grid.n_steps()), seed};
  for (double& dw : path.increments) dw = scale * normal();
  return path;
}

/// Sums `factor` consecutive increments of a fine path onto the coarse grid,
/// so coarse and fine schemes see the same Brownian motion.
inline NoisePath coarsen(const NoisePath& fine, std::size_t factor) {
  if (factor == 0 || fine.grid.n_steps() % factor != 0) {
    throw std::invalid_argument("coarsen: factor must divide n_steps");
  }
  NoisePath coarse{TimeGrid(fine.grid.n_steps() / factor, fine.grid.t_end()),
                   std::vector<double>(fine.grid.n_steps() / factor, 0.0), fine.seed};
  for (std::size_t k = 0; k < fine.increments.size(); ++k) {
    coarse.increments[k / factor] += fine.increments[k];
  }
  return coarse;
}

inline double clamp_share(double x) noexcept { return std::clamp(x, 0.0, 1.0); }

/// One classical RK4 step with the control sampled at the step start, midpoint
/// and end.
inline double rk4_step(double x, double dt, double u_start, double u_mid, double u_end,
                       const ModelParams& params) noexcept {
  const double k1 = drift(x, u_start, params);
  const double k2 = drift(x + 0.5 * dt * k1, u_mid, params);
  const double k3 = drift(x + 0.5 * dt * k2, u_mid, params);
  const double k4 = drift(x + dt * k3, u_end, params);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <typename Control>
concept EffortFunction = requires(const Control& u, double t) {
  { u(t) } -> std::convertible_to<double>;
};

template <EffortFunction Control>
Trajectory integrate_deterministic(double x0, const Control& control, const ModelParams& params,
                                   const TimeGrid& grid) {
  detail::require_share(x0, "integrate_deterministic");
  const double dt = grid.dt();
  Trajectory traj{grid, std::vector<double>(grid.n_points())};
  traj.states[0] = x0;
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    const double t = grid.t(k);
    const double next = rk4_step(traj.states[k], dt, control(t), control(t + 0.5 * dt),
                                 control(grid.t(k + 1)), params);
    traj.states[k + 1] = clamp_share(next);
  }
  return traj;
}

/// Euler-Maruyama for dx = f(x, u) dt + sigma dW. The drift sees the state
/// clamped to [0,1]; the stored states are not clamped.
template <EffortFunction Control>
Trajectory integrate_sde(double x0, const Control& control, const ModelParams& params,
                         const NoisePath& noise) {
  detail::require_share(x0, "integrate_sde");
  const TimeGrid& grid = noise.grid;
  if (noise.increments.size() != grid.n_steps()) {
    throw std::invalid_argument("integrate_sde: noise path length does not match its grid");
  }
  const double dt = grid.dt();
  Trajectory traj{grid, std::vector<double>(grid.n_points())};
  traj.states[0] = x0;
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    const double x = traj.states[k];
    traj.states[k + 1] = x + drift(clamp_share(x), control(grid.t(k)), params) * dt +
                         params.sigma * noise.increments[k];
  }
  return traj;
}

/// Observed trajectory y(t_k) = x(t_k) + sigma * dW_k / dt. Node k uses the
/// increment over [t_k, t_{k+1}); the terminal node reuses the last increment.
inline Trajectory observe(const Trajectory& trajectory, const NoisePath& noise, double sigma) {
  if (!(trajectory.grid == noise.grid) || trajectory.states.size() != noise.grid.n_points() ||
      noise.increments.size() != noise.grid.n_steps()) {
    throw std::invalid_argument("observe: trajectory and noise grids differ");
  }
  Trajectory observed = trajectory;
  if (sigma == 0.0) return observed;
  const double inv_dt = 1.0 / noise.grid.dt();
  const std::size_t n = noise.grid.n_steps();
  for (std::size_t k = 0; k <= n; ++k) {
    const double dw = noise.increments[std::min(k, n - 1)];
    observed.states[k] += sigma * dw * inv_dt;
  }
  return observed;
}

/// Composite trapezoid rule over grid nodes.
inline double trapezoid(std::span<const double> values, double dt) {
  if (values.size() < 2) return 0.0;
  double sum = 0.5 * (values.front() + values.back());
  for (std::size_t k = 1; k + 1 < values.size(); ++k) sum += values[k];
  return sum * dt;
}

}  // namespace bassctl
