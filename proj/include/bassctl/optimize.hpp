#pragma once

// Gradient descent on the flattened cosine coefficients.
//
// Gradients come from forward sensitivities s_k = d phi / d a_k, integrated by
// the same RK4 stages as phi:
//   s_k' = (1 - 2 phi)(beta u - xi) s_k + beta phi (1 - phi) b_k(t, x0),  s_k(0) = 0,
// so they are the exact derivatives of the discrete trajectory, and
//   dJ/da_k = int [2 C u b_k - alpha (phi b_k + s_k u)] dt
// under the same trapezoid rule as J.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bassctl/control.hpp"
#include "bassctl/integrate.hpp"
#include "bassctl/model.hpp"
#include "bassctl/objective.hpp"

namespace bassctl {

enum class GradientMethod { sensitivity, finite_difference };

struct OptimizerConfig {
  double step_size = 0.1;
  std::size_t max_iters = 5000;
  double grad_tol = 1e-6;
  double rel_obj_tol = 1e-10;
  GradientMethod grad_method = GradientMethod::sensitivity;
  double fd_epsilon = 1e-5;
  double armijo_c1 = 1e-4;

  void validate() const {
    if (!(step_size > 0.0)) throw std::invalid_argument("OptimizerConfig: step_size must be > 0");
    if (!(grad_tol > 0.0) || !(rel_obj_tol > 0.0)) {
      throw std::invalid_argument("OptimizerConfig: tolerances must be > 0");
    }
    if (!(fd_epsilon > 0.0)) throw std::invalid_argument("OptimizerConfig: fd_epsilon must be > 0");
    if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0)) throw std::invalid_argument("OptimizerConfig: armijo_c1 in (0,1)");
  }
};

struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> gradient;
};

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// J(a; x0) and its gradient with respect to the flattened coefficients.
inline ValueAndGradient value_and_gradient(const FourierSurface& surface, double x0, const ModelParams& params,
                                           const TimeGrid& grid, const ObjectiveOptions& options = {}) {
  detail::check_horizons(surface.shape(), params, grid);
  const SurfaceShape& shape = surface.shape();
  const TimeProfile control = surface.slice(x0);
  const auto xm = x0_modes(shape, x0);
  const std::size_t n_coeffs = shape.size();
  const double dt = grid.dt();

  auto basis_at = [&](double t, std::vector<double>& out) {
    const auto tm = time_modes(shape, t);
    for (std::size_t m = 0; m < shape.rows(); ++m) {
      for (std::size_t n = 0; n < shape.cols(); ++n) out[shape.index(m, n)] = tm[m] * xm[n];
    }
  };
  auto dfdx = [&](double x, double u) { return (1.0 - 2.0 * x) * (params.beta * u - params.xi_cost); };
  auto dfdu = [&](double x) { return params.beta * x * (1.0 - x); };

  std::vector<double> b_start(n_coeffs), b_mid(n_coeffs), b_end(n_coeffs);
  std::vector<double> sens(n_coeffs, 0.0), stage(n_coeffs), k1(n_coeffs), k2(n_coeffs), k3(n_coeffs), k4(n_coeffs);

  ValueAndGradient out{0.0, std::vector<double>(n_coeffs, 0.0)};
  double x = x0;
  auto accumulate = [&](double weight, double u, const std::vector<double>& b) {
    const double shortfall = std::max(0.0, -u);
    out.value += weight * (params.cost_c * u * u - params.alpha * x * u + options.nonneg_penalty * shortfall * shortfall);
    const double db = 2.0 * params.cost_c * u - params.alpha * x - 2.0 * options.nonneg_penalty * shortfall;
    for (std::size_t j = 0; j < n_coeffs; ++j) out.gradient[j] += weight * (db * b[j] - params.alpha * sens[j] * u);
  };

  basis_at(0.0, b_start);
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    const double t0 = grid.t(k);
    const double t1 = grid.t(k + 1);
    const double tmid = t0 + 0.5 * dt;
    const double u0 = control(t0), um = control(tmid), u1 = control(t1);
    basis_at(tmid, b_mid);
    basis_at(t1, b_end);

    accumulate(k == 0 ? 0.5 * dt : dt, u0, b_start);

    const double x1 = x;
    const double f1 = drift(x1, u0, params);
    for (std::size_t j = 0; j < n_coeffs; ++j) k1[j] = dfdx(x1, u0) * sens[j] + dfdu(x1) * b_start[j];

    const double x2 = x + 0.5 * dt * f1;
    const double f2 = drift(x2, um, params);
    for (std::size_t j = 0; j < n_coeffs; ++j) {
      stage[j] = sens[j] + 0.5 * dt * k1[j];
      k2[j] = dfdx(x2, um) * stage[j] + dfdu(x2) * b_mid[j];
    }

    const double x3 = x + 0.5 * dt * f2;
    const double f3 = drift(x3, um, params);
    for (std::size_t j = 0; j < n_coeffs; ++j) {
      stage[j] = sens[j] + 0.5 * dt * k2[j];
      k3[j] = dfdx(x3, um) * stage[j] + dfdu(x3) * b_mid[j];
    }

    const double x4 = x + dt * f3;
    const double f4 = drift(x4, u1, params);
    for (std::size_t j = 0; j < n_coeffs; ++j) {
      stage[j] = sens[j] + dt * k3[j];
      k4[j] = dfdx(x4, u1) * stage[j] + dfdu(x4) * b_end[j];
    }

    const double next = x + dt / 6.0 * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
    x = clamp_share(next);
    if (next != x) {
      std::fill(sens.begin(), sens.end(), 0.0);  // clamp is active, flat in a
    } else {
      for (std::size_t j = 0; j < n_coeffs; ++j) sens[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    std::swap(b_start, b_end);
  }
  accumulate(0.5 * dt, control(grid.t_end()), b_start);
  return out;
}

inline std::vector<double> gradient_sensitivity(const FourierSurface& surface, double x0, const ModelParams& params,
                                                const TimeGrid& grid, const ObjectiveOptions& options = {}) {
  return value_and_gradient(surface, x0, params, grid, options).gradient;
}

/// Aggregate value and sensitivity gradient, summed in ascending x0 order.
inline ValueAndGradient aggregate_value_and_gradient(const FourierSurface& surface, const X0Grid& x0grid,
                                                     const ModelParams& params, const TimeGrid& grid,
                                                     const ObjectiveOptions& options = {}) {
  ValueAndGradient total{0.0, std::vector<double>(surface.shape().size(), 0.0)};
  for (double x0 : x0grid.points()) {
    const auto vg = value_and_gradient(surface, x0, params, grid, options);
    total.value += vg.value;
    for (std::size_t j = 0; j < total.gradient.size(); ++j) total.gradient[j] += vg.gradient[j];
  }
  return total;
}

/// Central differences of the aggregate objective, one coefficient at a time.
inline std::vector<double> gradient_fd(const FourierSurface& surface, const X0Grid& x0grid, const ModelParams& params,
                                       const TimeGrid& grid, double fd_epsilon, const ObjectiveOptions& options = {}) {
  if (!(fd_epsilon > 0.0)) throw std::invalid_argument("gradient_fd: fd_epsilon must be > 0");
  std::vector<double> a = flatten(surface);
  std::vector<double> g(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double saved = a[j];
    a[j] = saved + fd_epsilon;
    const double plus = objective_aggregate(unflatten(a, surface.shape()), x0grid, params, grid, options).value;
    a[j] = saved - fd_epsilon;
    const double minus = objective_aggregate(unflatten(a, surface.shape()), x0grid, params, grid, options).value;
    a[j] = saved;
    g[j] = (plus - minus) / (2.0 * fd_epsilon);
  }
  return g;
}

struct SolveReport {
  FourierSurface final_surface;
  std::vector<double> objective_history;  // iterations_used + 1 entries
  std::vector<double> grad_norm_history;  // same length
  std::vector<std::pair<double, double>> per_x0_objectives;
  std::size_t iterations_used = 0;
  bool converged = false;
  std::string stop_reason;

  double final_objective() const { return objective_history.back(); }
};

/// Steepest descent with Armijo backtracking (step halving) on the aggregate
/// objective. Never throws on non-convergence; see `converged`.
inline SolveReport solve(const FourierSurface& initial_surface, const X0Grid& x0grid, const ModelParams& params,
                         const TimeGrid& grid, const OptimizerConfig& config, const ObjectiveOptions& options = {}) {
  config.validate();
  const SurfaceShape shape = initial_surface.shape();

  auto evaluate = [&](const std::vector<double>& a) {
    const FourierSurface s = unflatten(a, shape);
    if (config.grad_method == GradientMethod::sensitivity) {
      return aggregate_value_and_gradient(s, x0grid, params, grid, options);
    }
    return ValueAndGradient{objective_aggregate(s, x0grid, params, grid, options).value,
                            gradient_fd(s, x0grid, params, grid, config.fd_epsilon, options)};
  };
  auto value_only = [&](const std::vector<double>& a) {
    return objective_aggregate(unflatten(a, shape), x0grid, params, grid, options).value;
  };

  SolveReport report{initial_surface, {}, {}, {}, 0, false, "max_iters"};
  std::vector<double> a = flatten(initial_surface);
  ValueAndGradient current = evaluate(a);
  std::vector<double> trial(a.size());

  while (true) {
    const double gnorm = l2_norm(current.gradient);
    report.objective_history.push_back(current.value);
    report.grad_norm_history.push_back(gnorm);
    if (!std::isfinite(current.value) || !std::isfinite(gnorm)) {
      report.stop_reason = "non_finite";
      break;
    }
    if (gnorm < config.grad_tol) {
      report.converged = true;
      report.stop_reason = "grad_tol";
      break;
    }
    if (report.iterations_used >= config.max_iters) break;

    double step = config.step_size;
    double trial_value = std::numeric_limits<double>::infinity();
    bool accepted = false;
    while (step > 1e-20) {
      for (std::size_t j = 0; j < a.size(); ++j) trial[j] = a[j] - step * current.gradient[j];
      trial_value = value_only(trial);
      if (trial_value <= current.value - config.armijo_c1 * step * gnorm * gnorm) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      report.stop_reason = "line_search_failed";
      break;
    }

    const double previous = current.value;
    a = trial;
    current = evaluate(a);
    ++report.iterations_used;
    const double rel_decrease = (previous - current.value) / std::max(std::abs(previous), 1e-300);
    if (rel_decrease < config.rel_obj_tol) {
      report.objective_history.push_back(current.value);
      report.grad_norm_history.push_back(l2_norm(current.gradient));
      report.converged = true;
      report.stop_reason = "rel_obj_tol";
      break;
    }
  }

  report.final_surface = unflatten(a, shape);
  for (double x0 : x0grid.points()) {
    report.per_x0_objectives.emplace_back(x0, objective_deterministic(report.final_surface, x0, params, grid, options).value);
  }
  return report;
}

}  // namespace bassctl
