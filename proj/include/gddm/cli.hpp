#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

namespace gddm::cli {

/// Fully resolved parameters of one command run. Every field round-trips
/// through JSON under the same key as its command-line flag.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string schedule = "linear";
  int T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::string domain = "laplacian";
  std::size_t bins = 128;
  double tol = 0.01;
  double lambda = 0.0;
  long steps = 2000;
  double lr = 0.05;
  std::string out = "runs";

  // converge / poisson-roundtrip
  std::string input;  // empty: bundled image
  std::vector<int> timesteps = {0, 100, 250, 500, 1000};
  bool write_matrices = true;
  double cg_tol = 1e-10;
  std::size_t max_iter = 5000;

  // variance-check
  double sigma = 1.0;
  std::size_t height = 1026;
  std::size_t width = 1026;
  std::size_t repetitions = 1;

  // train-sample
  std::string dataset;  // directory of PGM/PPM images; empty: synthetic blobs
  std::size_t dataset_size = 64;
  std::size_t image_size = 16;
  std::size_t batch = 8;
  std::size_t net_width = 16;
  std::string penalty = "gradient";
  double grad_clip = 1.0;  // 0 disables
  std::size_t samples = 4;
  std::size_t eval_draws = 32;
  bool learned_reconstructor = false;
  long reconstructor_steps = 1000;
};

nlohmann::ordered_json to_json(const ExperimentConfig& cfg);
/// Overlays the keys present in `j` onto `base`; unknown keys raise ConfigError.
ExperimentConfig merge_json(ExperimentConfig base, const nlohmann::json& j);
ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base = {});

struct CommandResult {
  int exit_code = 0;
  nlohmann::ordered_json report;
  std::filesystem::path run_dir;
};

/// <out>/<command>_seed<seed>, created on demand; config.json is written there.
std::filesystem::path prepare_run_dir(const std::string& command, const ExperimentConfig& cfg);

/// Interior variance ratios of grad(eps) and laplacian_fe(eps) to eps.
CommandResult cmd_variance_check(const ExperimentConfig& cfg);
/// Forward trajectories in all three domains with a shared seed; JSD
/// curves, matrices, convergence summary and snapshots.
CommandResult cmd_converge(const ExperimentConfig& cfg);
/// Spectral and CG reconstruction of the input image, uniqueness witness,
/// non-integrable and divergence-free gradient cases.
CommandResult cmd_poisson_roundtrip(const ExperimentConfig& cfg);
/// Trains TinyConvNet in cfg.domain, samples, reconstructs images.
CommandResult cmd_train_sample(const ExperimentConfig& cfg);

}  // namespace gddm::cli
