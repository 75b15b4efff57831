// bassctl: cosine-series control surfaces for the controlled Bass model.
//
//   bassctl solve   --preset paper-m3 --out runs/
//   bassctl surface --coefficients runs/coefficients_m3n3.json --nt 101 --nx0 19
//   bassctl paths   --coefficients runs/coefficients_m5n5.json --x0 0.75 --samples 5 --seed 7
//   bassctl verify  --preset paper --out runs/
//
// Exit codes: 0 success, 1 invalid input, 2 verification failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "bassctl/experiment.hpp"

namespace fs = std::filesystem;
using namespace bassctl;

namespace {

constexpr int kExitInvalid = 1;
constexpr int kExitVerifyFailed = 2;

struct CommonOptions {
  std::string preset = "paper-m3";
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string noise_model;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--preset", opts.preset, "Parameter preset")->check(CLI::IsMember(preset_names()));
  cmd->add_option("--config", opts.config_path, "JSON file overriding preset fields")->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out_dir, "Output directory (default: $BASSCTL_OUT_DIR or .)");
  cmd->add_option("--seed", opts.seed, "Base RNG seed");
  cmd->add_option("--noise-model", opts.noise_model, "dynamics | observer | none")
      ->check(CLI::IsMember({"dynamics", "observer", "none"}));
}

ExperimentConfig load_config(const CommonOptions& opts) {
  ExperimentConfig cfg = preset(opts.preset);
  if (!opts.config_path.empty()) cfg = apply_overrides(cfg, read_json_file(opts.config_path));
  if (opts.seed) cfg.base_seed = *opts.seed;
  if (!opts.noise_model.empty()) cfg.noise_model = parse_noise_model(opts.noise_model);
  cfg.validate();
  return cfg;
}

fs::path output_dir(const CommonOptions& opts) {
  fs::path dir = ".";
  if (!opts.out_dir.empty()) {
    dir = opts.out_dir;
  } else if (const char* env = std::getenv("BASSCTL_OUT_DIR"); env && *env) {
    dir = env;
  }
  fs::create_directories(dir);
  return dir;
}

/// Coefficient file horizon must agree with the model horizon.
ModelParams params_for(const ExperimentConfig& cfg, const FourierSurface& surface) {
  ModelParams p = cfg.params;
  if (p.horizon_t != surface.horizon_t()) {
    throw std::invalid_argument("coefficient file horizon T=" + format_number(surface.horizon_t()) +
                                " differs from the configured horizon_t=" + format_number(p.horizon_t));
  }
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fourier-series optimal control surfaces for the stochastic Bass model"};
  app.require_subcommand(1);

  CommonOptions solve_opts, surface_opts, paths_opts, verify_opts;
  std::string warm_start;
  auto* solve_cmd = app.add_subcommand("solve", "Gradient descent on the aggregate objective");
  add_common(solve_cmd, solve_opts);
  solve_cmd->add_option("--warm-start", warm_start, "Coefficient file to pad and start from")->check(CLI::ExistingFile);

  std::string surface_coeffs, surface_name = "surface.csv";
  LatticeSpec lattice;
  auto* surface_cmd = app.add_subcommand("surface", "Control and state surfaces on a (t, x0) lattice");
  add_common(surface_cmd, surface_opts);
  surface_cmd->add_option("--coefficients", surface_coeffs, "Coefficient file")->required()->check(CLI::ExistingFile);
  surface_cmd->add_option("--nt", lattice.n_t, "Lattice points in t");
  surface_cmd->add_option("--nx0", lattice.n_x0, "Lattice points in x0");
  surface_cmd->add_option("--name", surface_name, "Output file name");

  std::string paths_coeffs;
  double paths_x0 = 0.75;
  std::size_t paths_samples = 5;
  auto* paths_cmd = app.add_subcommand("paths", "Deterministic path and stochastic samples from one x0");
  add_common(paths_cmd, paths_opts);
  paths_cmd->add_option("--coefficients", paths_coeffs, "Coefficient file")->required()->check(CLI::ExistingFile);
  paths_cmd->add_option("--x0", paths_x0, "Initial condition");
  paths_cmd->add_option("--samples", paths_samples, "Number of sample paths");

  std::string verify_coeffs;
  auto* verify_cmd = app.add_subcommand("verify", "Noise-equivalence, gradient and oracle checks");
  add_common(verify_cmd, verify_opts);
  verify_cmd->add_option("--coefficients", verify_coeffs, "Verify this surface instead of solving")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    if (*solve_cmd) {
      const auto cfg = load_config(solve_opts);
      std::optional<FourierSurface> initial;
      if (!warm_start.empty()) initial = load_surface(warm_start);
      const auto outcome = run_solve(cfg, initial);
      const fs::path dir = output_dir(solve_opts);
      write_json_file((dir / ("solve_report_" + cfg.tag() + ".json")).string(), outcome.report_json);
      write_json_file((dir / ("coefficients_" + cfg.tag() + ".json")).string(), outcome.coefficients_json);
      std::cout << "M=" << cfg.order_m << " N=" << cfg.order_n << " J=" << format_number(outcome.report.final_objective())
                << " iterations=" << outcome.report.iterations_used
                << " converged=" << (outcome.report.converged ? "true" : "false") << " (" << outcome.report.stop_reason
                << ")\n";
      if (outcome.nonneg.max_violation > 0.0) {
        std::cout << "note: u < 0 on " << format_number(outcome.nonneg.measure_fraction)
                  << " of the lattice, max violation " << format_number(outcome.nonneg.max_violation) << "\n";
      }
      return 0;
    }

    if (*surface_cmd) {
      const auto cfg = load_config(surface_opts);
      const auto surface = load_surface(surface_coeffs);
      std::optional<NoiseModel> model;
      if (!surface_opts.noise_model.empty() && cfg.noise_model != NoiseModel::none) model = cfg.noise_model;
      const std::string csv =
          run_surface(surface, params_for(cfg, surface), lattice, cfg.n_steps, model, cfg.base_seed);
      const fs::path path = output_dir(surface_opts) / surface_name;
      write_text_file(path.string(), csv);
      std::cout << "wrote " << path.string() << "\n";
      return 0;
    }

    if (*paths_cmd) {
      const auto cfg = load_config(paths_opts);
      const auto surface = load_surface(paths_coeffs);
      const std::string csv = run_paths(surface, params_for(cfg, surface), paths_x0, paths_samples, cfg.base_seed,
                                        cfg.noise_model, cfg.n_steps);
      const fs::path path = output_dir(paths_opts) / ("paths_x0_" + x0_key(paths_x0) + ".csv");
      write_text_file(path.string(), csv);
      std::cout << "wrote " << path.string() << "\n";
      return 0;
    }

    if (*verify_cmd) {
      const auto cfg = load_config(verify_opts);
      const FourierSurface surface =
          verify_coeffs.empty() ? run_solve(cfg).report.final_surface : load_surface(verify_coeffs);
      params_for(cfg, surface);
      const auto outcome = run_verify(cfg, surface);
      const fs::path path = output_dir(verify_opts) / "verify_report.json";
      write_json_file(path.string(), outcome.report);
      for (const auto& check : outcome.report["checks"]) {
        std::cout << (check["passed"].get<bool>() ? "PASS " : "FAIL ") << check["name"].get<std::string>() << "\n";
      }
      std::cout << "wrote " << path.string() << "\n";
      return outcome.all_passed ? 0 : kExitVerifyFailed;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return 0;
}
