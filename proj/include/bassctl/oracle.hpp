#pragma once

// Baselines independent of the cosine parameterization:
//  * direct transcription: one constant effort per time step, optimized by
//    projected gradient descent with discrete-adjoint gradients;
//  * a Pontryagin stationarity residual for any control on the grid.
//
// With H = C u^2 - alpha x u + lambda x (1 - x)(beta u - xi):
//   lambda' = -dH/dx = alpha u - lambda (1 - 2x)(beta u - xi),  lambda(T) = 0,
//   dH/du = 0  =>  u = (alpha x - lambda beta x (1 - x)) / (2 C),
// projected onto u >= 0 when the nonnegativity constraint is active.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "bassctl/control.hpp"
#include "bassctl/integrate.hpp"
#include "bassctl/model.hpp"

namespace bassctl {

struct TranscriptionSolution {
  TimeGrid grid;
  std::vector<double> controls;  // effort on [t_k, t_{k+1}), n_steps values
  std::vector<double> states;    // n_steps + 1 values
  double objective = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  double grad_norm = 0.0;  // max-norm of the projected gradient, per unit time
  // Stopped because accepted steps no longer change J in double precision.
  bool stalled = false;
};

struct TranscriptionConfig {
  double grad_tol = 1e-8;
  // A run that stalls at round-off still counts as converged below this.
  double stall_grad_tol = 1e-6;
  std::size_t max_iters = 20000;
  double armijo_c1 = 1e-4;
  // Constant starting controls, in units of alpha / (2 C). The best local
  // optimum is kept, since the problem has a die-out and a growth basin.
  std::vector<double> start_levels = {0.0, 1.0};
};

namespace detail {

/// RK4 step with constant control, and its partials with respect to x and u,
/// by forward differentiation through the stages.
struct StepJacobian {
  double next;
  double d_x;
  double d_u;
};

inline StepJacobian rk4_step_jacobian(double x, double u, double dt, const ModelParams& p) {
  const double g = p.beta * u - p.xi_cost;
  auto f = [&](double s) { return s * (1.0 - s) * g; };
  auto fx = [&](double s) { return (1.0 - 2.0 * s) * g; };
  auto fu = [&](double s) { return p.beta * s * (1.0 - s); };

  // Stage state X_i and its derivatives dX_i/dx, dX_i/du.
  const double x1 = x, x1_x = 1.0, x1_u = 0.0;
  const double k1 = f(x1), k1_x = fx(x1) * x1_x, k1_u = fx(x1) * x1_u + fu(x1);
  const double x2 = x + 0.5 * dt * k1, x2_x = 1.0 + 0.5 * dt * k1_x, x2_u = 0.5 * dt * k1_u;
  const double k2 = f(x2), k2_x = fx(x2) * x2_x, k2_u = fx(x2) * x2_u + fu(x2);
  const double x3 = x + 0.5 * dt * k2, x3_x = 1.0 + 0.5 * dt * k2_x, x3_u = 0.5 * dt * k2_u;
  const double k3 = f(x3), k3_x = fx(x3) * x3_x, k3_u = fx(x3) * x3_u + fu(x3);
  const double x4 = x + dt * k3, x4_x = 1.0 + dt * k3_x, x4_u = dt * k3_u;
  const double k4 = f(x4), k4_x = fx(x4) * x4_x, k4_u = fx(x4) * x4_u + fu(x4);

  const double next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  const double clamped = clamp_share(next);
  if (clamped != next) return {clamped, 0.0, 0.0};
  return {next, 1.0 + dt / 6.0 * (k1_x + 2.0 * k2_x + 2.0 * k3_x + k4_x),
          dt / 6.0 * (k1_u + 2.0 * k2_u + 2.0 * k3_u + k4_u)};
}

}  // namespace detail

/// Cost of a piecewise-constant control: sum_k dt [C u_k^2 - alpha u_k (x_k + x_{k+1}) / 2].
inline double evaluate_transcription(std::span<const double> controls, double x0, const ModelParams& params,
                                     const TimeGrid& grid, std::vector<double>* states_out = nullptr) {
  if (controls.size() != grid.n_steps()) throw std::invalid_argument("evaluate_transcription: wrong control count");
  detail::require_share(x0, "evaluate_transcription");
  const double dt = grid.dt();
  std::vector<double> x(grid.n_points());
  x[0] = x0;
  double j = 0.0;
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    const double u = controls[k];
    x[k + 1] = clamp_share(rk4_step(x[k], dt, u, u, u, params));
    j += dt * (params.cost_c * u * u - params.alpha * u * 0.5 * (x[k] + x[k + 1]));
  }
  if (states_out) *states_out = std::move(x);
  return j;
}

/// Objective and per-unit-time gradient dJ/du_k / dt via the discrete adjoint.
inline double transcription_gradient(std::span<const double> controls, double x0, const ModelParams& params,
                                     const TimeGrid& grid, std::vector<double>& gradient) {
  std::vector<double> x;
  const double j = evaluate_transcription(controls, x0, params, grid, &x);
  const std::size_t n = grid.n_steps();
  const double dt = grid.dt();
  gradient.assign(n, 0.0);
  // mu = dJ/dx_{k+1}, total derivative through the remaining steps.
  double mu = -params.alpha * controls[n - 1] * 0.5 * dt;
  for (std::size_t k = n; k-- > 0;) {
    const double u = controls[k];
    const auto jac = detail::rk4_step_jacobian(x[k], u, dt, params);
    gradient[k] = (dt * (2.0 * params.cost_c * u - params.alpha * 0.5 * (x[k] + x[k + 1])) + mu * jac.d_u) / dt;
    if (k > 0) mu = -params.alpha * 0.5 * dt * (u + controls[k - 1]) + mu * jac.d_x;
  }
  return j;
}

/// Projected gradient descent from a given piecewise-constant control.
inline TranscriptionSolution refine_transcription(std::vector<double> initial, double x0, const ModelParams& params,
                                                  const TimeGrid& grid, bool enforce_nonneg,
                                                  const TranscriptionConfig& config = {}) {
  if (!(x0 > 0.0 && x0 < 1.0)) throw std::domain_error("solve_transcription: x0 must lie in (0,1)");
  params.validate();
  const std::size_t n = grid.n_steps();
  if (initial.size() != n) throw std::invalid_argument("refine_transcription: wrong control count");
  const double dt = grid.dt();
  auto project = [&](double u) { return enforce_nonneg ? std::max(0.0, u) : u; };
  for (double& u : initial) u = project(u);

  TranscriptionSolution sol{grid, std::move(initial), {}, 0.0, false, 0, 0.0, false};
  std::vector<double> grad, trial(n);
  double j = transcription_gradient(sol.controls, x0, params, grid, grad);
  // Newton step for the C u^2 term.
  const double base_step = 1.0 / (2.0 * params.cost_c);
  const double roundoff = 8.0 * std::numeric_limits<double>::epsilon();
  std::size_t flat_steps = 0;

  for (;;) {
    double pg = 0.0;
    for (std::size_t k = 0; k < n; ++k) pg = std::max(pg, std::abs(sol.controls[k] - project(sol.controls[k] - grad[k])));
    sol.grad_norm = pg;
    if (pg <= config.grad_tol) {
      sol.converged = true;
      break;
    }
    if (flat_steps >= 3) {
      sol.stalled = true;
      sol.converged = pg <= config.stall_grad_tol;
      break;
    }
    if (sol.iterations >= config.max_iters) break;

    double step = base_step;
    bool accepted = false;
    double trial_j = 0.0;
    while (step > 1e-16) {
      double decrease = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        trial[k] = project(sol.controls[k] - step * grad[k]);
        decrease += grad[k] * (sol.controls[k] - trial[k]) * dt;
      }
      trial_j = evaluate_transcription(trial, x0, params, grid);
      if (trial_j <= j - config.armijo_c1 * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      sol.stalled = true;
      sol.converged = pg <= config.stall_grad_tol;
      break;
    }
    flat_steps = (j - trial_j <= roundoff * std::abs(j)) ? flat_steps + 1 : 0;
    sol.controls.swap(trial);
    j = transcription_gradient(sol.controls, x0, params, grid, grad);
    ++sol.iterations;
  }
  sol.objective = evaluate_transcription(sol.controls, x0, params, grid, &sol.states);
  return sol;
}

/// Best of the multi-start projected gradient runs.
inline TranscriptionSolution solve_transcription(double x0, const ModelParams& params, const TimeGrid& grid,
                                                 bool enforce_nonneg = false, const TranscriptionConfig& config = {}) {
  if (config.start_levels.empty()) throw std::invalid_argument("solve_transcription: no start levels");
  const double unit = params.alpha / (2.0 * params.cost_c);
  std::optional<TranscriptionSolution> best;
  for (double level : config.start_levels) {
    auto sol = refine_transcription(std::vector<double>(grid.n_steps(), level * unit), x0, params, grid,
                                    enforce_nonneg, config);
    if (!best || sol.objective < best->objective) best = std::move(sol);
  }
  return *best;
}

struct PmpResidual {
  double projected = 0.0;    // |u - max(0, u_stat)|
  double unprojected = 0.0;  // |u - u_stat|

  double value(bool nonneg) const { return nonneg ? projected : unprojected; }
};

/// Effort on step k at local fraction tau in [0, 1].
using StepControl = std::function<double(std::size_t, double)>;

/// Integrates the state forward and the costate backward (RK4, Hermite
/// interpolation to midpoints), then measures the stationarity defect at the
/// midpoint of every step.
inline PmpResidual pmp_residual(const StepControl& control, double x0, const ModelParams& params, const TimeGrid& grid) {
  detail::require_share(x0, "pmp_residual");
  const std::size_t n = grid.n_steps();
  const double dt = grid.dt();
  std::vector<double> x(n + 1), x_mid(n), lambda(n + 1, 0.0);
  x[0] = x0;
  for (std::size_t k = 0; k < n; ++k) {
    x[k + 1] = clamp_share(rk4_step(x[k], dt, control(k, 0.0), control(k, 0.5), control(k, 1.0), params));
    x_mid[k] = clamp_share(rk4_step(x[k], 0.5 * dt, control(k, 0.0), control(k, 0.25), control(k, 0.5), params));
  }

  auto costate_rate = [&](double lam, double s, double u) {
    return params.alpha * u - lam * (1.0 - 2.0 * s) * (params.beta * u - params.xi_cost);
  };
  for (std::size_t k = n; k-- > 0;) {
    const double h = -dt;
    const double u_end = control(k, 1.0), u_mid = control(k, 0.5), u_start = control(k, 0.0);
    const double l = lambda[k + 1];
    const double k1 = costate_rate(l, x[k + 1], u_end);
    const double k2 = costate_rate(l + 0.5 * h * k1, x_mid[k], u_mid);
    const double k3 = costate_rate(l + 0.5 * h * k2, x_mid[k], u_mid);
    const double k4 = costate_rate(l + h * k3, x[k], u_start);
    lambda[k] = l + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  PmpResidual r;
  for (std::size_t k = 0; k < n; ++k) {
    const double rate_start = costate_rate(lambda[k], x[k], control(k, 0.0));
    const double rate_end = costate_rate(lambda[k + 1], x[k + 1], control(k, 1.0));
    const double lam_mid = 0.5 * (lambda[k] + lambda[k + 1]) + dt * (rate_start - rate_end) / 8.0;
    const double s = x_mid[k];
    const double u_stat = (params.alpha * s - lam_mid * params.beta * s * (1.0 - s)) / (2.0 * params.cost_c);
    const double u = control(k, 0.5);
    r.unprojected = std::max(r.unprojected, std::abs(u - u_stat));
    r.projected = std::max(r.projected, std::abs(u - std::max(0.0, u_stat)));
  }
  return r;
}

inline PmpResidual pmp_residual(const TranscriptionSolution& solution, double x0, const ModelParams& params) {
  const auto& u = solution.controls;
  return pmp_residual([&u](std::size_t k, double) { return u[k]; }, x0, params, solution.grid);
}

inline PmpResidual pmp_residual(const TimeProfile& control, double x0, const ModelParams& params, const TimeGrid& grid) {
  const double dt = grid.dt();
  return pmp_residual([&](std::size_t k, double tau) { return control(std::min(grid.t(k) + tau * dt, grid.t_end())); },
                      x0, params, grid);
}

}  // namespace bassctl
