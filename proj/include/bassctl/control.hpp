#pragma once

// Two-variable cosine series for the control surface
//   u(t, x0) = sum_{m<=M} sum_{n<=N} a_mn cos(m pi t / T) cos(n pi (x0 - lo) / L),
// with L = hi - lo the width of the initial-condition interval.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bassctl {

/// Orders, horizon and initial-condition interval of a cosine surface.
struct SurfaceShape {
  std::size_t order_m = 0;
  std::size_t order_n = 0;
  double horizon_t = 10.0;
  double x0_lo = 0.05;
  double x0_hi = 0.95;

  std::size_t rows() const noexcept { return order_m + 1; }
  std::size_t cols() const noexcept { return order_n + 1; }
  std::size_t size() const noexcept { return rows() * cols(); }
  double x0_range() const noexcept { return x0_hi - x0_lo; }
  // Row-major, m outer.
  std::size_t index(std::size_t m, std::size_t n) const noexcept { return m * cols() + n; }

  void validate() const {
    if (!(horizon_t > 0.0) || !std::isfinite(horizon_t)) {
      throw std::invalid_argument("SurfaceShape: horizon_t must be positive and finite");
    }
    if (!(x0_hi > x0_lo) || !std::isfinite(x0_lo) || !std::isfinite(x0_hi)) {
      throw std::invalid_argument("SurfaceShape: x0 interval must have positive width");
    }
  }

  void check_point(double t, double x0) const {
    if (!(t >= 0.0 && t <= horizon_t)) {
      throw std::domain_error("FourierSurface: t outside [0, T]: " + std::to_string(t));
    }
    if (!(x0 >= x0_lo && x0 <= x0_hi)) {
      throw std::domain_error("FourierSurface: x0 outside initial-condition interval: " +
                              std::to_string(x0));
    }
  }

  bool operator==(const SurfaceShape&) const = default;
};

/// cos(m pi t / T) for m = 0..M.
inline std::vector<double> time_modes(const SurfaceShape& shape, double t) {
  std::vector<double> modes(shape.rows());
  const double phase = std::numbers::pi * t / shape.horizon_t;
  for (std::size_t m = 0; m < modes.size(); ++m) modes[m] = std::cos(static_cast<double>(m) * phase);
  return modes;
}

/// cos(n pi (x0 - lo) / L) for n = 0..N.
inline std::vector<double> x0_modes(const SurfaceShape& shape, double x0) {
  std::vector<double> modes(shape.cols());
  const double phase = std::numbers::pi * (x0 - shape.x0_lo) / shape.x0_range();
  for (std::size_t n = 0; n < modes.size(); ++n) modes[n] = std::cos(static_cast<double>(n) * phase);
  return modes;
}

/// Basis matrix (row-major) with entry (m, n) = d u / d a_mn at (t, x0).
inline std::vector<double> basis(const SurfaceShape& shape, double t, double x0) {
  shape.check_point(t, x0);
  const auto tm = time_modes(shape, t);
  const auto xm = x0_modes(shape, x0);
  std::vector<double> out(shape.size());
  for (std::size_t m = 0; m < shape.rows(); ++m) {
    for (std::size_t n = 0; n < shape.cols(); ++n) out[shape.index(m, n)] = tm[m] * xm[n];
  }
  return out;
}

/// The control restricted to one initial condition: u(t) = sum_m c_m cos(m pi t / T).
class TimeProfile {
 public:
  TimeProfile(std::vector<double> weights, double horizon_t)
      : weights_(std::move(weights)), horizon_t_(horizon_t) {}

  double operator()(double t) const {
    const double phase = std::numbers::pi * t / horizon_t_;
    double u = 0.0;
    for (std::size_t m = 0; m < weights_.size(); ++m) {
      u += weights_[m] * std::cos(static_cast<double>(m) * phase);
    }
    return u;
  }

  std::span<const double> weights() const noexcept { return weights_; }

 private:
  std::vector<double> weights_;
  double horizon_t_;
};

class FourierSurface {
 public:
  explicit FourierSurface(SurfaceShape shape)
      : shape_(shape), coeffs_(shape.size(), 0.0) {
    shape_.validate();
  }

  FourierSurface(SurfaceShape shape, std::vector<double> coeffs)
      : shape_(shape), coeffs_(std::move(coeffs)) {
    shape_.validate();
    if (coeffs_.size() != shape_.size()) {
      throw std::invalid_argument("FourierSurface: expected " + std::to_string(shape_.size()) +
                                  " coefficients, got " + std::to_string(coeffs_.size()));
    }
  }

  const SurfaceShape& shape() const noexcept { return shape_; }
  std::size_t order_m() const noexcept { return shape_.order_m; }
  std::size_t order_n() const noexcept { return shape_.order_n; }
  double horizon_t() const noexcept { return shape_.horizon_t; }
  double x0_range() const noexcept { return shape_.x0_range(); }

  double coeff(std::size_t m, std::size_t n) const { return coeffs_.at(shape_.index(m, n)); }
  double& coeff(std::size_t m, std::size_t n) { return coeffs_.at(shape_.index(m, n)); }
  std::span<const double> coeffs() const noexcept { return coeffs_; }

  double evaluate(double t, double x0) const {
    shape_.check_point(t, x0);
    return slice_unchecked(x0)(t);
  }

  /// Control as a function of time for a fixed initial condition.
  TimeProfile slice(double x0) const {
    shape_.check_point(0.0, x0);
    return slice_unchecked(x0);
  }

  /// Same surface with orders raised to (m, n); new coefficients are zero.
  FourierSurface padded(std::size_t order_m, std::size_t order_n) const {
    if (order_m < shape_.order_m || order_n < shape_.order_n) {
      throw std::invalid_argument("FourierSurface::padded: orders can only grow");
    }
    SurfaceShape bigger = shape_;
    bigger.order_m = order_m;
    bigger.order_n = order_n;
    FourierSurface out(bigger);
    for (std::size_t m = 0; m < shape_.rows(); ++m) {
      for (std::size_t n = 0; n < shape_.cols(); ++n) out.coeff(m, n) = coeff(m, n);
    }
    return out;
  }

  FourierSurface& operator+=(const FourierSurface& other) {
    if (!(shape_ == other.shape_)) throw std::invalid_argument("FourierSurface: shape mismatch");
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
    return *this;
  }

  FourierSurface& operator*=(double scale) {
    for (double& a : coeffs_) a *= scale;
    return *this;
  }

  friend FourierSurface operator+(FourierSurface lhs, const FourierSurface& rhs) { return lhs += rhs; }
  friend FourierSurface operator*(double scale, FourierSurface s) { return s *= scale; }

  bool operator==(const FourierSurface&) const = default;

 private:
  TimeProfile slice_unchecked(double x0) const {
    const auto xm = x0_modes(shape_, x0);
    std::vector<double> weights(shape_.rows(), 0.0);
    for (std::size_t m = 0; m < shape_.rows(); ++m) {
      for (std::size_t n = 0; n < shape_.cols(); ++n) weights[m] += coeffs_[shape_.index(m, n)] * xm[n];
    }
    return TimeProfile(std::move(weights), shape_.horizon_t);
  }

  SurfaceShape shape_;
  std::vector<double> coeffs_;
};

inline std::vector<double> flatten(const FourierSurface& surface) {
  return {surface.coeffs().begin(), surface.coeffs().end()};
}

inline FourierSurface unflatten(std::span<const double> values, const SurfaceShape& shape) {
  if (values.size() != shape.size()) {
    throw std::invalid_argument("unflatten: vector length " + std::to_string(values.size()) +
                                " does not match (M+1)(N+1) = " + std::to_string(shape.size()));
  }
  return FourierSurface(shape, std::vector<double>(values.begin(), values.end()));
}

}  // namespace bassctl
