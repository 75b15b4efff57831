#pragma once

// Problem constants and right-hand sides of the controlled Bass dynamics.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace bassctl {

/// Scalar constants of the optimal control problem
///   min  int_0^T (C u^2 - alpha u x) dt
///   s.t. dx = x (1 - x) (beta u - xi) dt + sigma dW.
/// `xi_cost` is the next-best-alternative rate; it is the same constant in the
/// deterministic and in the stochastic drift.
struct ModelParams {
  double alpha = 2.0;
  double cost_c = 1.0;
  double beta = 0.5;
  double xi_cost = 0.25;
  double sigma = 0.1;
  double horizon_t = 10.0;

  void validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(alpha) || !finite(cost_c) || !finite(beta) || !finite(xi_cost) ||
        !finite(sigma) || !finite(horizon_t)) {
      throw std::invalid_argument("ModelParams: all fields must be finite");
    }
    if (cost_c <= 0.0) throw std::invalid_argument("ModelParams: cost_c must be > 0");
    if (horizon_t <= 0.0) throw std::invalid_argument("ModelParams: horizon_t must be > 0");
    if (sigma < 0.0) throw std::invalid_argument("ModelParams: sigma must be >= 0");
    if (beta <= 0.0) throw std::invalid_argument("ModelParams: beta must be > 0");
    if (xi_cost < 0.0) throw std::invalid_argument("ModelParams: xi_cost must be >= 0");
  }

  bool operator==(const ModelParams&) const = default;
};

/// Two-strategy replicator with skew-symmetric payoff [[0, -rho], [rho, 0]].
struct ReplicatorParams {
  double rho = 1.0;
};

struct BassParams {
  double p_innovation = 0.0;
  double q_imitation = 0.0;

  void validate() const {
    if (!(p_innovation >= 0.0) || !(q_imitation >= 0.0)) {
      throw std::invalid_argument("BassParams: coefficients must be >= 0");
    }
  }
};

namespace detail {

inline void require_share(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw std::domain_error(std::string(what) + ": share fraction outside [0,1]: " +
                            std::to_string(x));
  }
}

}  // namespace detail

/// Rates (dx1/dt, dx2/dt) of the replicator dynamics.
inline std::pair<double, double> replicator_rhs(double x1, double x2,
                                                const ReplicatorParams& params) {
  detail::require_share(x1, "replicator_rhs");
  detail::require_share(x2, "replicator_rhs");
  const double flow = params.rho * x1 * x2;
  return {-flow, flow};
}

inline double bass_rhs(double x, const BassParams& params) {
  detail::require_share(x, "bass_rhs");
  return params.p_innovation * (1.0 - x) + params.q_imitation * (1.0 - x) * x;
}

/// Unchecked drift x (1 - x) (beta u - xi). Used on hot paths where the caller
/// already guarantees x in [0,1].
inline double drift(double x, double u, const ModelParams& params) noexcept {
  return x * (1.0 - x) * (params.beta * u - params.xi_cost);
}

inline double controlled_rhs(double x, double u, const ModelParams& params) {
  detail::require_share(x, "controlled_rhs");
  if (!std::isfinite(u)) throw std::domain_error("controlled_rhs: effort must be finite");
  return drift(x, u, params);
}

}  // namespace bassctl
