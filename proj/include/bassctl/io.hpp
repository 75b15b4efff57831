#pragma once

// JSON and CSV serialization for parameters, coefficient files, reports and
// trajectories.

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "bassctl/control.hpp"
#include "bassctl/integrate.hpp"
#include "bassctl/model.hpp"
#include "bassctl/objective.hpp"
#include "bassctl/optimize.hpp"
#include "bassctl/oracle.hpp"

namespace bassctl {

using json = nlohmann::ordered_json;

/// Malformed or inconsistent input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const char* what) {
  if (!j.is_object()) throw FormatError(std::string(what) + ": expected a JSON object");
  for (const auto& item : j.items()) {
    if (!allowed.contains(item.key())) {
      throw FormatError(std::string(what) + ": unknown key '" + item.key() + "'");
    }
  }
}

template <typename T>
T required(const json& j, const char* key, const char* what) {
  if (!j.contains(key)) throw FormatError(std::string(what) + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string(what) + ": bad value for '" + key + "': " + e.what());
  }
}

}  // namespace detail

inline json to_json(const ModelParams& p) {
  return json{{"alpha", p.alpha}, {"cost_c", p.cost_c}, {"beta", p.beta},
              {"xi_cost", p.xi_cost}, {"sigma", p.sigma}, {"horizon_t", p.horizon_t}};
}

/// Flat object with exactly the six ModelParams fields.
inline ModelParams model_params_from_json(const json& j) {
  constexpr const char* what = "ModelParams";
  detail::reject_unknown_keys(j, {"alpha", "cost_c", "beta", "xi_cost", "sigma", "horizon_t"}, what);
  ModelParams p{detail::required<double>(j, "alpha", what),     detail::required<double>(j, "cost_c", what),
                detail::required<double>(j, "beta", what),      detail::required<double>(j, "xi_cost", what),
                detail::required<double>(j, "sigma", what),     detail::required<double>(j, "horizon_t", what)};
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  return p;
}

/// Coefficient file: {M, N, T, x0_lo, x0_hi, coeffs} with coeffs row-major.
inline json to_json(const FourierSurface& s) {
  return json{{"M", s.order_m()},         {"N", s.order_n()},         {"T", s.horizon_t()},
              {"x0_lo", s.shape().x0_lo}, {"x0_hi", s.shape().x0_hi}, {"coeffs", flatten(s)}};
}

inline FourierSurface surface_from_json(const json& j) {
  constexpr const char* what = "coefficient file";
  detail::reject_unknown_keys(j, {"M", "N", "T", "x0_lo", "x0_hi", "coeffs"}, what);
  SurfaceShape shape{detail::required<std::size_t>(j, "M", what), detail::required<std::size_t>(j, "N", what),
                     detail::required<double>(j, "T", what), detail::required<double>(j, "x0_lo", what),
                     detail::required<double>(j, "x0_hi", what)};
  const auto coeffs = detail::required<std::vector<double>>(j, "coeffs", what);
  try {
    return FourierSurface(shape, coeffs);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline void write_json_file(const std::string& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

inline FourierSurface load_surface(const std::string& path) { return surface_from_json(read_json_file(path)); }

inline json to_json(const SolveReport& r) {
  json per_x0 = json::array();
  for (const auto& [x0, value] : r.per_x0_objectives) per_x0.push_back({{"x0", x0}, {"J", value}});
  return json{{"converged", r.converged},
              {"stop_reason", r.stop_reason},
              {"iterations_used", r.iterations_used},
              {"final_objective", r.final_objective()},
              {"per_x0_objectives", per_x0},
              {"objective_history", r.objective_history},
              {"grad_norm_history", r.grad_norm_history},
              {"final_surface", to_json(r.final_surface)}};
}

inline json to_json(const MonteCarloEstimate& e) {
  return json{{"model", std::string(to_string(e.model))},
              {"n_paths", e.n_paths},
              {"base_seed", e.base_seed},
              {"mean", e.mean},
              {"std_error", e.std_error},
              {"j_det", e.j_det}};
}

inline json to_json(const NonnegativityReport& r) {
  return json{{"max_violation", r.max_violation}, {"measure_fraction", r.measure_fraction}};
}

/// 17 significant digits, enough to round-trip a double.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Key used for per-x0 JSON maps.
inline std::string x0_key(double x0) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x0);
  return buf;
}

/// Comma-separated table with a leading `#schema=` comment line.
class CsvWriter {
 public:
  CsvWriter(std::string schema, std::vector<std::string> columns) : columns_(columns.size()) {
    out_ << "#schema=" << schema << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
  }

  void row(const std::vector<double>& values) {
    if (values.size() != columns_) throw std::logic_error("CsvWriter: row width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_number(values[i]);
    out_ << "\n";
    ++rows_;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
  std::size_t columns_;
  std::size_t rows_ = 0;
};

/// `t,x` or, with an observation, `t,x,y`.
inline std::string trajectory_csv(const Trajectory& x, const Trajectory* y = nullptr) {
  if (y && y->states.size() != x.states.size()) throw std::invalid_argument("trajectory_csv: length mismatch");
  CsvWriter csv("bassctl.trajectory.v1", y ? std::vector<std::string>{"t", "x", "y"} : std::vector<std::string>{"t", "x"});
  for (std::size_t k = 0; k < x.states.size(); ++k) {
    if (y) {
      csv.row({x.grid.t(k), x.states[k], y->states[k]});
    } else {
      csv.row({x.grid.t(k), x.states[k]});
    }
  }
  return csv.str();
}

}  // namespace bassctl
