// chstep <experiment> --config <path> [--seed S] [--out DIR] [--grid M] [--energy-safe]

#include <cstring>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chstep/errors.hpp"
#include "chstep/experiments.hpp"

namespace {

chstep::ExperimentKind peek_experiment(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (argv[i][0] != '-') return chstep::parse_experiment(argv[i]);
    // Skip the value of options that take one.
    if (std::strchr(argv[i], '=') == nullptr && i + 1 < argc && argv[i + 1][0] != '-' &&
        std::strcmp(argv[i], "--energy-safe") != 0 && std::strcmp(argv[i], "--adaptive-reference") != 0) {
      ++i;
    }
  }
  return chstep::ExperimentKind::coarsen;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace chstep;
  ExperimentConfig cfg;
  try {
    cfg = ExperimentConfig::defaults(peek_experiment(argc, argv));
  } catch (const std::invalid_argument& e) {
    std::cerr << "chstep: " << e.what() << "\n";
    return 64;
  }

  CLI::App app{"Variable-step BDF2 experiments for the periodic Cahn-Hilliard equation"};
  app.set_config("--config", "", "key = value configuration file (TOML/INI)");
  app.allow_config_extras(false);

  std::string experiment, mesh{to_string(cfg.mesh)}, scheme{to_string(cfg.scheme)},
      starter{to_string(cfg.starter)}, out = cfg.out_dir.string();
  std::vector<std::string> schemes, mesh_files;
  for (auto s : cfg.schemes) schemes.emplace_back(to_string(s));

  app.add_option("experiment", experiment, "accuracy | compare | adaptive | coarsen | certify")
      ->required()
      ->check(CLI::IsMember({"accuracy", "compare", "adaptive", "coarsen", "certify"}));
  app.add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  app.add_option("--out", out, "output directory")->capture_default_str();
  app.add_option("--grid", cfg.model.points, "grid points per direction (even)")->capture_default_str();
  app.add_flag("--energy-safe,--energy_safe", cfg.energy_safe, "cap adaptive steps by the energy-stability bound");

  app.add_option("--kappa", cfg.model.kappa)->capture_default_str();
  app.add_option("--epsilon", cfg.model.epsilon)->capture_default_str();
  app.add_option("--length", cfg.model.length, "side of the periodic square")->capture_default_str();
  app.add_option("--mesh", mesh, "uniform | random | adaptive")->capture_default_str();
  app.add_option("--scheme", scheme, "bdf2 | cn | cncs")->capture_default_str();
  app.add_option("--starter", starter, "tr_bdf2 | sdirk2 | bdf1")->capture_default_str();
  app.add_option("--tol", cfg.solver.tol, "fixed-point increment tolerance")->capture_default_str();
  app.add_option("--max-iters,--max_iters", cfg.solver.max_iters)->capture_default_str();
  app.add_option("--stabilization", cfg.solver.stabilization, "fixed-point stabilizer S (0 = plain splitting)")
      ->capture_default_str();
  app.add_option("--final-time,--final_time", cfg.final_time)->capture_default_str();
  app.add_option("--step", cfg.step, "uniform step for coarsen runs")->capture_default_str();
  app.add_option("--step-counts,--step_counts", cfg.step_counts, "accuracy refinements")->delimiter(',')->capture_default_str();
  app.add_option("--step-sizes,--step_sizes", cfg.step_sizes, "compare step sizes")->delimiter(',')->capture_default_str();
  app.add_option("--schemes", schemes, "compare schemes")->delimiter(',')->capture_default_str();
  app.add_option("--reference-step,--reference_step", cfg.reference_step)->capture_default_str();
  app.add_option("--adaptive-reference,--adaptive_reference", cfg.adaptive_reference, "run the uniform reference in adaptive")
      ->capture_default_str();
  app.add_option("--tau-min,--tau_min", cfg.adaptive.tau_min)->capture_default_str();
  app.add_option("--tau-max,--tau_max", cfg.adaptive.tau_max)->capture_default_str();
  app.add_option("--beta", cfg.adaptive.beta, "controller sensitivity for coarsen")->capture_default_str();
  app.add_option("--r-user,--r_user", cfg.adaptive.r_user, "step-ratio cap")->capture_default_str();
  app.add_option("--betas", cfg.betas, "adaptive sensitivities")->delimiter(',')->capture_default_str();
  app.add_option("--max-rejections,--max_rejections", cfg.max_rejections)->capture_default_str();
  app.add_option("--snapshot-times,--snapshot_times", cfg.snapshot_times)->delimiter(',')->capture_default_str();
  app.add_option("--fit-t-lo,--fit_t_lo", cfg.fit_t_lo)->capture_default_str();
  app.add_option("--fit-t-hi,--fit_t_hi", cfg.fit_t_hi)->capture_default_str();
  app.add_option("--certify-meshes,--certify_meshes", cfg.certify_meshes)->capture_default_str();
  app.add_option("--certify-steps,--certify_steps", cfg.certify_steps)->capture_default_str();
  app.add_option("--certify-max-ratio,--certify_max_ratio", cfg.certify_max_ratio)->capture_default_str();
  app.add_option("--certify-probe-trials,--certify_probe_trials", cfg.certify_probe_trials)->capture_default_str();
  app.add_option("--mesh-file,--mesh_file", mesh_files, "certify these mesh CSVs")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.kind = parse_experiment(experiment);
    cfg.mesh = parse_mesh(mesh);
    cfg.scheme = parse_scheme(scheme);
    cfg.starter = parse_starter(starter);
    cfg.schemes.clear();
    for (const auto& s : schemes) cfg.schemes.push_back(parse_scheme(s));
    cfg.mesh_files.assign(mesh_files.begin(), mesh_files.end());
    cfg.out_dir = out;
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    std::cerr << "chstep: " << e.what() << "\n";
    return 64;
  }

  try {
    return run_experiment(cfg);
  } catch (const chstep::Error& e) {
    std::cerr << "chstep: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "chstep: unexpected failure: " << e.what() << "\n";
    return 1;
  }
}
