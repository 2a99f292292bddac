#include "riskbo/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

using namespace riskbo;

int main(int argc, char** argv) {
  CLI::App app{"Value-at-risk Bayesian optimization benchmark runner"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "execute an experiment spec");
  std::string spec_path;
  run->add_option("spec", spec_path, "JSON experiment spec (optional)");
  std::map<std::string, std::string> overrides;
  auto add_flag = [&](const std::string& cli, const std::string& key,
                      const std::string& help) {
    run->add_option_function<std::string>(
        cli, [&overrides, key](const std::string& v) { overrides[key] = v; },
        help);
  };
  add_flag("--problem", "problem", "branin|goldstein-price|hartmann-1-2|hartmann-2-1");
  add_flag("--z-mode", "z_mode", "discrete|continuous");
  add_flag("--alpha", "alpha", "risk level in (0,1)");
  add_flag("--T", "T", "iterations per run");
  add_flag("--repeats", "repeats", "seeded repetitions");
  add_flag("--master-seed", "master_seed", "master seed for stream fan-out");
  add_flag("--algorithms", "algorithms", "comma-separated algorithm list");
  add_flag("--acq", "acq", "vucb|stableopt|random|env-sampled");
  add_flag("--lv-mode", "lv_mode", "uniform|max-mass (with --acq vucb)");
  add_flag("--beta", "beta", "practical|theoretical");
  add_flag("--beta-B", "beta_B", "RKHS norm bound (theoretical beta)");
  add_flag("--beta-delta", "beta_delta", "failure probability (theoretical beta)");
  add_flag("--n-init", "n_init", "initial design size");
  add_flag("--refit-every", "refit_every", "hyperparameter refit cadence");
  add_flag("--recommend", "recommend", "mean-var|lcb-max");
  add_flag("--workers", "workers", "worker pool size");
  add_flag("--out", "out_dir", "output directory");
  add_flag("--pinball-iters", "pinball.iters", "pinball sgd iterations");
  add_flag("--pinball-batch", "pinball.batch", "pinball sgd batch size");
  add_flag("--lnso-radius", "lnso.radius", "surrogate ball radius");
  add_flag("--lnso-x-steps", "lnso.x_steps", "surrogate ascent steps");
  add_flag("--lnso-train-steps", "lnso.train_steps", "surrogate sgd steps");
  add_flag("--lnso-nz", "lnso.n_z", "env samples per surrogate batch");
  add_flag("--lnso-nx", "lnso.n_x", "ball samples per surrogate batch");

  // summarize / plotdata
  auto* summ = app.add_subcommand("summarize", "rebuild summary.csv from traces");
  std::string summ_dir;
  summ->add_option("dir", summ_dir, "experiment output directory")->required();
  auto* plot = app.add_subcommand("plotdata", "emit plot-ready CSV");
  std::string plot_dir;
  plot->add_option("dir", plot_dir, "experiment output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      ExperimentSpec spec;
      if (!spec_path.empty()) spec = parse_spec_file(spec_path);
      apply_overrides(spec, overrides);
      if (spec.out_dir.empty()) {
        const char* root = std::getenv("RISKBO_OUT");
        const std::filesystem::path base = root ? root : "riskbo_out";
        spec.out_dir = (base / (spec.problem + "_" +
                                std::to_string(spec.master_seed)))
                           .string();
      }
      const ExperimentResult res = run_experiment(spec);
      std::cout << "wrote " << res.runs.size() << " traces to " << spec.out_dir
                << "\n";
      if (res.failures > 0) {
        std::cerr << res.failures << " run(s) failed; see manifest.json\n";
        return 1;
      }
    } else if (summ->parsed()) {
      summarize_dir(summ_dir);
      std::cout << "rebuilt " << summ_dir << "/summary.csv\n";
    } else if (plot->parsed()) {
      emit_plotdata(plot_dir);
      std::cout << "wrote " << plot_dir << "/plotdata.csv\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
