#include <gtest/gtest.h>

#include <sstream>

#include "bassctl/experiment.hpp"
#include "bassctl/io.hpp"

namespace bassctl {
namespace {

TEST(ModelParamsJson, RoundTripAndStrictKeys) {
  ModelParams p;
  p.alpha = 1.5;
  p.sigma = 0.0;
  EXPECT_EQ(model_params_from_json(to_json(p)), p);

  auto j = to_json(p);
  j["eta"] = 0.25;
  EXPECT_THROW(model_params_from_json(j), FormatError);

  j = to_json(p);
  j.erase("beta");
  EXPECT_THROW(model_params_from_json(j), FormatError);

  j = to_json(p);
  j["cost_c"] = -1.0;
  EXPECT_THROW(model_params_from_json(j), FormatError);

  j = to_json(p);
  j["alpha"] = "two";
  EXPECT_THROW(model_params_from_json(j), FormatError);
}

TEST(CoefficientFile, RoundTripAndValidation) {
  FourierSurface s(SurfaceShape{2, 1, 8.0, 0.1, 0.9});
  s.coeff(1, 1) = 0.125;
  s.coeff(2, 0) = -3.0;
  const json j = to_json(s);
  EXPECT_EQ(j["coeffs"].size(), 6u);
  EXPECT_EQ(j["coeffs"][3], 0.125);  // row-major: (1,1) -> 1*2+1
  EXPECT_EQ(surface_from_json(j), s);

  json bad = j;
  bad["coeffs"].push_back(1.0);
  EXPECT_THROW(surface_from_json(bad), FormatError);
  bad = j;
  bad["extra"] = 1;
  EXPECT_THROW(surface_from_json(bad), FormatError);
  bad = j;
  bad["x0_hi"] = 0.05;
  EXPECT_THROW(surface_from_json(bad), FormatError);
}

TEST(Csv, SchemaLineAndFullPrecision) {
  CsvWriter csv("demo.v1", {"a", "b"});
  csv.row({0.1, 1.0 / 3.0});
  EXPECT_EQ(csv.str(), "#schema=demo.v1\na,b\n0.10000000000000001,0.33333333333333331\n");
  EXPECT_THROW(csv.row({1.0}), std::logic_error);

  const TimeGrid g(2, 1.0);
  const Trajectory x{g, {0.5, 0.25, 0.125}};
  const Trajectory y{g, {0.6, 0.2, 0.1}};
  EXPECT_EQ(trajectory_csv(x), "#schema=bassctl.trajectory.v1\nt,x\n0,0.5\n0.5,0.25\n1,0.125\n");
  EXPECT_NE(trajectory_csv(x, &y).find("t,x,y\n0,0.5,0.59999999999999998\n"), std::string::npos);
}

TEST(Presets, DefaultParameterValues) {
  const auto cfg = preset("paper-m3");
  EXPECT_EQ(cfg.params.alpha, 2.0);
  EXPECT_EQ(cfg.params.cost_c, 1.0);
  EXPECT_EQ(cfg.params.beta, 0.5);
  EXPECT_EQ(cfg.params.xi_cost, 0.25);
  EXPECT_EQ(cfg.params.sigma, 0.1);
  EXPECT_EQ(cfg.params.horizon_t, 10.0);
  EXPECT_EQ(cfg.order_m, 3u);
  const auto m5 = preset("paper-m5");
  EXPECT_EQ(m5.order_m, 5u);
  ASSERT_TRUE(m5.warm_start_orders.has_value());
  EXPECT_EQ(m5.warm_start_orders->first, 3u);
  EXPECT_EQ(preset("noiseless").params.sigma, 0.0);
  EXPECT_EQ(preset("alpha0").params.alpha, 0.0);
  EXPECT_THROW(preset("nope"), std::invalid_argument);
}

TEST(ConfigOverrides, PartialAndStrict) {
  const json j = json::parse(R"({"params": {"sigma": 0.2}, "M": 2, "N": 4, "optimizer": {"grad_method": "finite_difference"},
                                 "noise_model": "observer", "warm_start_orders": null})");
  const auto cfg = apply_overrides(preset("paper-m5"), j);
  EXPECT_EQ(cfg.params.sigma, 0.2);
  EXPECT_EQ(cfg.params.alpha, 2.0);
  EXPECT_EQ(cfg.order_m, 2u);
  EXPECT_EQ(cfg.order_n, 4u);
  EXPECT_FALSE(cfg.warm_start_orders.has_value());
  EXPECT_EQ(cfg.optimizer.grad_method, GradientMethod::finite_difference);
  EXPECT_EQ(cfg.noise_model, NoiseModel::observer);

  EXPECT_THROW(apply_overrides(cfg, json::parse(R"({"colour": 1})")), FormatError);
  EXPECT_THROW(apply_overrides(cfg, json::parse(R"({"params": {"eta": 1}})")), FormatError);
  EXPECT_THROW(apply_overrides(cfg, json::parse(R"({"noise_model": "loud"})")), std::invalid_argument);
  EXPECT_THROW(apply_overrides(cfg, json::parse(R"({"M": "three"})")), FormatError);
  // Round trip through the config serializer.
  const auto again = apply_overrides(ExperimentConfig{}, to_json(cfg));
  EXPECT_EQ(to_json(again), to_json(cfg));
}

TEST(Commands, SurfaceLatticeContract) {
  const ModelParams p;
  const FourierSurface zero(SurfaceShape{5, 5, 10.0, 0.05, 0.95});
  const std::string csv = run_surface(zero, p, {101, 19}, 500);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "#schema=bassctl.surface.v1");
  std::getline(in, line);
  EXPECT_EQ(line, "t,x0,u,x_det");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    double t, x0, u, x;
    char c;
    std::istringstream row(line);
    row >> t >> c >> x0 >> c >> u >> c >> x;
    EXPECT_EQ(u, 0.0);
    if (t == 0.0) EXPECT_EQ(x, x0);
    ++rows;
  }
  EXPECT_EQ(rows, 1919u);
}

TEST(Commands, SurfaceWithSampleColumnIsSeeded) {
  const ModelParams p;
  FourierSurface s(SurfaceShape{1, 1, 10.0, 0.05, 0.95});
  s.coeff(0, 0) = 0.7;
  const auto a = run_surface(s, p, {11, 3}, 500, NoiseModel::dynamics, 4);
  const auto b = run_surface(s, p, {11, 3}, 500, NoiseModel::dynamics, 4);
  const auto c = run_surface(s, p, {11, 3}, 500, NoiseModel::dynamics, 5);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_NE(a.find("t,x0,u,x_det,x_sample\n"), std::string::npos);
}

TEST(Commands, PathsWithoutNoiseCollapseToOnePath) {
  ModelParams p;
  p.sigma = 0.0;
  FourierSurface s(SurfaceShape{1, 1, 10.0, 0.05, 0.95});
  s.coeff(0, 0) = 0.9;
  const std::string csv = run_paths(s, p, 0.75, 5, 3, NoiseModel::dynamics, 500);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  EXPECT_EQ(line, "t,x_det,sample_1,sample_2,sample_3,sample_4,sample_5");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    ASSERT_EQ(cells.size(), 7u);
    // Samples use Euler-Maruyama, x_det uses RK4.
    for (std::size_t i = 3; i < cells.size(); ++i) EXPECT_EQ(cells[i], cells[2]);
    EXPECT_NEAR(std::stod(cells[2]), std::stod(cells[1]), 2e-3);
    ++rows;
  }
  EXPECT_EQ(rows, 501u);
}

TEST(Commands, PathsFluctuateWithNoise) {
  const ModelParams p;
  FourierSurface s(SurfaceShape{1, 1, 10.0, 0.05, 0.95});
  s.coeff(0, 0) = 0.9;
  const auto a = run_paths(s, p, 0.75, 5, 3, NoiseModel::dynamics, 500);
  EXPECT_EQ(a, run_paths(s, p, 0.75, 5, 3, NoiseModel::dynamics, 500));
  EXPECT_NE(a, run_paths(s, p, 0.75, 5, 3, NoiseModel::observer, 500));
  EXPECT_THROW(run_paths(s, p, 0.99, 5, 3, NoiseModel::dynamics, 500), std::domain_error);
}

TEST(Commands, SolveAlphaZeroGivesZeroSurface) {
  auto cfg = preset("alpha0");
  const auto out = run_solve(cfg);
  EXPECT_TRUE(out.report.converged);
  EXPECT_NEAR(out.report.final_objective(), 0.0, 1e-12);
  for (double a : out.report.final_surface.coeffs()) EXPECT_NEAR(a, 0.0, 1e-9);
  EXPECT_EQ(out.report_json["converged"], true);
  EXPECT_EQ(out.coefficients_json["M"], 3);
}

TEST(Commands, StagedSolveRecordsWarmStart) {
  auto cfg = preset("paper-m5");
  cfg.x0_count = 7;
  const auto out = run_solve(cfg);
  ASSERT_TRUE(out.warm_start.has_value());
  EXPECT_LE(out.report.final_objective(), out.warm_start->final_objective() + 1e-9);
  EXPECT_EQ(out.report_json["warm_start"]["M"], 3);
  EXPECT_EQ(run_solve(cfg).report_json.dump(), out.report_json.dump());
}

TEST(Commands, VerifyWithoutNoisePassesNoiseChecks) {
  auto cfg = preset("noiseless");
  cfg.order_m = cfg.order_n = 2;
  cfg.warm_start_orders.reset();
  cfg.x0_lo = 0.4;
  cfg.x0_hi = 0.9;
  cfg.x0_count = 6;
  cfg.mc_x0 = {0.5, 0.75};
  cfg.gradient_checks = 1;
  cfg.n_paths = 10;
  const auto surface = run_solve(cfg).report.final_surface;
  const auto out = run_verify(cfg, surface);
  for (const auto& check : out.report["checks"]) {
    const auto name = check["name"].get<std::string>();
    if (name.rfind("noise_equivalence", 0) == 0 || name == "gradient_cross_check" || name == "oracle_lower_bound" ||
        name == "pmp_residual") {
      EXPECT_TRUE(check["passed"].get<bool>()) << name;
    }
  }
  EXPECT_EQ(run_verify(cfg, surface).report.dump(), out.report.dump());
}

}  // namespace
}  // namespace bassctl
