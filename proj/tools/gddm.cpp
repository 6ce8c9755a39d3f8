// gddm: command-line front end for the experiments.
#include <CLI11.hpp>
#include <iostream>

#include "gddm/cli.hpp"
#include "gddm/error.hpp"

namespace {

using gddm::cli::ExperimentConfig;

// Flags bound to a scratch config; only those actually given override the
// defaults and the config file.
struct FlagSet {
  ExperimentConfig v;
  std::vector<std::pair<CLI::Option*, std::function<void(ExperimentConfig&)>>> opts;

  template <class T>
  void add(CLI::App* app, const std::string& flag, T ExperimentConfig::*field, const std::string& help) {
    CLI::Option* o = app->add_option(flag, v.*field, help);
    opts.emplace_back(o, [this, field](ExperimentConfig& c) { c.*field = v.*field; });
  }
  void add_flag(CLI::App* app, const std::string& flag, bool ExperimentConfig::*field, const std::string& help) {
    CLI::Option* o = app->add_flag(flag, v.*field, help);
    opts.emplace_back(o, [this, field](ExperimentConfig& c) { c.*field = v.*field; });
  }
  void apply(ExperimentConfig& c) const {
    for (const auto& [o, set] : opts) {
      if (o->count() > 0) set(c);
    }
  }
};

void add_common(CLI::App* app, FlagSet& f, std::string& config_path) {
  app->add_option("--config", config_path, "JSON config file; flags given explicitly take precedence");
  f.add(app, "--seed", &ExperimentConfig::seed, "RNG seed");
  f.add(app, "--schedule", &ExperimentConfig::schedule, "linear | constant");
  f.add(app, "--T", &ExperimentConfig::T, "number of diffusion steps");
  f.add(app, "--beta-start", &ExperimentConfig::beta_start, "first beta (the constant beta for 'constant')");
  f.add(app, "--beta-end", &ExperimentConfig::beta_end, "last beta of the linear schedule");
  f.add(app, "--domain", &ExperimentConfig::domain, "image | gradient | laplacian");
  f.add(app, "--bins", &ExperimentConfig::bins, "histogram bins");
  f.add(app, "--tol", &ExperimentConfig::tol, "JSD convergence tolerance");
  f.add(app, "--lambda", &ExperimentConfig::lambda, "weight of the guided penalty");
  f.add(app, "--steps", &ExperimentConfig::steps, "training steps");
  f.add(app, "--lr", &ExperimentConfig::lr, "SGD learning rate");
  f.add(app, "--out", &ExperimentConfig::out, "output root directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion in image, gradient and Laplacian domains"};
  app.require_subcommand(1);

  std::string config_path;
  FlagSet flags;

  auto* var = app.add_subcommand("variance-check", "Noise variance of the differential operators");
  add_common(var, flags, config_path);
  flags.add(var, "--sigma", &ExperimentConfig::sigma, "noise standard deviation");
  flags.add(var, "--height", &ExperimentConfig::height, "field height");
  flags.add(var, "--width", &ExperimentConfig::width, "field width");
  flags.add(var, "--repetitions", &ExperimentConfig::repetitions, "independent fields to pool");

  auto* conv = app.add_subcommand("converge", "Forward-process convergence in all domains");
  add_common(conv, flags, config_path);
  flags.add(conv, "--input", &ExperimentConfig::input, "PGM/PPM input (default: bundled image)");
  flags.add(conv, "--timesteps", &ExperimentConfig::timesteps, "timesteps to snapshot");
  flags.add(conv, "--write-matrices", &ExperimentConfig::write_matrices, "write full JSD matrices");

  auto* pois = app.add_subcommand("poisson-roundtrip", "Poisson reconstruction checks");
  add_common(pois, flags, config_path);
  flags.add(pois, "--input", &ExperimentConfig::input, "PGM/PPM input (default: bundled image)");
  flags.add(pois, "--cg-tol", &ExperimentConfig::cg_tol, "CG relative tolerance");
  flags.add(pois, "--max-iter", &ExperimentConfig::max_iter, "CG iteration cap");

  auto* ts = app.add_subcommand("train-sample", "Train the noise predictor, sample and reconstruct");
  add_common(ts, flags, config_path);
  flags.add(ts, "--dataset", &ExperimentConfig::dataset, "directory of PGM/PPM images (default: blobs)");
  flags.add(ts, "--dataset-size", &ExperimentConfig::dataset_size, "synthetic dataset size");
  flags.add(ts, "--image-size", &ExperimentConfig::image_size, "synthetic image size");
  flags.add(ts, "--batch", &ExperimentConfig::batch, "batch size");
  flags.add(ts, "--net-width", &ExperimentConfig::net_width, "hidden channels");
  flags.add(ts, "--penalty", &ExperimentConfig::penalty, "gradient | laplacian");
  flags.add(ts, "--grad-clip", &ExperimentConfig::grad_clip, "gradient norm clip, 0 disables");
  flags.add(ts, "--samples", &ExperimentConfig::samples, "samples to draw");
  flags.add(ts, "--eval-draws", &ExperimentConfig::eval_draws, "evaluation draws per field");
  flags.add_flag(ts, "--learned-reconstructor", &ExperimentConfig::learned_reconstructor,
                 "also train a learned reconstructor");
  flags.add(ts, "--reconstructor-steps", &ExperimentConfig::reconstructor_steps, "reconstructor training steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = gddm::cli::load_config_file(config_path, cfg);
    flags.apply(cfg);
    std::cout << gddm::cli::to_json(cfg).dump(2) << std::endl;

    gddm::cli::CommandResult res;
    if (var->parsed()) res = gddm::cli::cmd_variance_check(cfg);
    else if (conv->parsed()) res = gddm::cli::cmd_converge(cfg);
    else if (pois->parsed()) res = gddm::cli::cmd_poisson_roundtrip(cfg);
    else res = gddm::cli::cmd_train_sample(cfg);
    std::cout << res.report.dump(2) << std::endl;
    std::cerr << "run directory: " << res.run_dir.string() << '\n';
    return res.exit_code;
  } catch (const gddm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
