#include <doctest.h>

#include <fstream>
#include <sstream>

#include "gddm/cli.hpp"
#include "gddm/error.hpp"
#include "gddm/image_io.hpp"
#include "gddm/diffusion.hpp"
#include "gddm/assets.hpp"
#include "helpers.hpp"

using namespace gddm;
using namespace gddm::cli;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config JSON round trip and precedence") {
    ExperimentConfig cfg;
    cfg.seed = 42;
    cfg.domain = "gradient";
    cfg.timesteps = {0, 7};
    const auto j = to_json(cfg);
    const ExperimentConfig back = merge_json(ExperimentConfig{}, nlohmann::json::parse(j.dump()));
    CHECK(to_json(back) == j);

    const auto dir = test::scratch_dir("cli_config");
    {
      std::ofstream out(dir / "c.json");
      out << R"({"seed": 5, "lr": 0.01})";
    }
    ExperimentConfig loaded = load_config_file(dir / "c.json");
    CHECK(loaded.seed == 5);
    CHECK(loaded.lr == 0.01);
    CHECK(loaded.T == 1000);

    CHECK_THROWS_AS(merge_json(ExperimentConfig{}, nlohmann::json::parse(R"({"sead": 1})")), ConfigError);
    CHECK_THROWS_AS(merge_json(ExperimentConfig{}, nlohmann::json::parse(R"({"seed": "x"})")), ConfigError);
    CHECK_THROWS_AS(load_config_file(dir / "missing.json"), IoError);
  }

  TEST_CASE("variance-check is scale free") {
    ExperimentConfig cfg;
    cfg.out = test::scratch_dir("cli_var").string();
    auto r = cmd_variance_check(cfg);
    CHECK(r.exit_code == 0);
    CHECK(std::abs(r.report["measured_gradient_ratio"].get<double>() - 2.0) <= 0.04);
    CHECK(std::abs(r.report["measured_laplacian_ratio"].get<double>() - 1.25) <= 0.025);
    CHECK(std::filesystem::exists(r.run_dir / "config.json"));

    cfg.sigma = 3.0;
    r = cmd_variance_check(cfg);
    CHECK(r.exit_code == 0);

    cfg.sigma = 1.0;
    cfg.height = cfg.width = 4;
    cfg.repetitions = 1000000;
    r = cmd_variance_check(cfg);
    CHECK(r.exit_code == 0);
  }

  TEST_CASE("rerunning from the echoed config reproduces the outputs") {
    ExperimentConfig cfg;
    cfg.height = cfg.width = 128;
    cfg.seed = 9;
    cfg.out = test::scratch_dir("cli_rerun_a").string();
    const auto a = cmd_variance_check(cfg);
    ExperimentConfig again = load_config_file(a.run_dir / "config.json");
    again.out = test::scratch_dir("cli_rerun_b").string();
    const auto b = cmd_variance_check(again);
    CHECK(a.report.dump() == b.report.dump());
    CHECK(slurp(a.run_dir / "config.json").size() > 0);
    CHECK(to_json(again).dump() != to_json(cfg).dump());  // only out differs
    again.out = cfg.out;
    CHECK(to_json(again).dump() == to_json(cfg).dump());
  }

  TEST_CASE("converge writes deterministic artifacts") {
    ExperimentConfig cfg;
    cfg.T = 100;
    cfg.beta_start = 1e-3;
    cfg.beta_end = 0.1;
    cfg.timesteps = {0, 50};
    cfg.out = test::scratch_dir("cli_converge_a").string();
    const auto a = cmd_converge(cfg);
    cfg.out = test::scratch_dir("cli_converge_b").string();
    const auto b = cmd_converge(cfg);
    for (const char* d : {"image", "gradient", "laplacian"}) {
      const std::string f = std::string("jsd_to_terminal_") + d + ".csv";
      CHECK(slurp(a.run_dir / f) == slurp(b.run_dir / f));
      CHECK(std::filesystem::exists(a.run_dir / (std::string("jsd_matrix_") + d + ".csv")));
    }
    CHECK(std::filesystem::exists(a.run_dir / "summary.json"));
    CHECK(std::filesystem::exists(a.run_dir / "trajectory_manifest.json"));
    const Field img = read_pnm(bundled_image_path());
    CHECK(read_raw_field(a.run_dir / "snapshot_laplacian_t0.gdlf") == to_domain(img, DomainKind::Laplacian));
    CHECK(read_raw_field(a.run_dir / "snapshot_gradient_t0.gdlf") == to_domain(img, DomainKind::Gradient));
    CHECK(a.report["t_converge"]["image"].get<int>() <= 100);

    cfg.timesteps = {101};
    CHECK_THROWS_AS(cmd_converge(cfg), IndexError);
  }

  TEST_CASE("poisson-roundtrip on the bundled and a constant image") {
    ExperimentConfig cfg;
    cfg.out = test::scratch_dir("cli_poisson").string();
    auto r = cmd_poisson_roundtrip(cfg);
    CHECK(r.exit_code == 0);
    CHECK(r.report["spectral"]["relative_error"].get<double>() <= 1e-8);
    CHECK(r.report["divergence_free"]["max_deviation_from_anchor"].get<double>() <= 1e-8);

    const auto dir = test::scratch_dir("cli_poisson_const");
    write_pnm(dir / "c.pgm", new_field(16, 16, 1, 100.0 / 255.0));
    cfg.input = (dir / "c.pgm").string();
    cfg.out = (dir / "runs").string();
    r = cmd_poisson_roundtrip(cfg);
    // Exact up to the rounding of the anchoring mean.
    CHECK(r.report["spectral"]["relative_error"].get<double>() <= 1e-14);
    CHECK(r.report["cg"]["relative_error"].get<double>() <= 1e-14);
    CHECK(r.report["cg"]["iterations"].get<int>() == 0);
  }

  TEST_CASE("train-sample smoke run emits its artifacts") {
    ExperimentConfig cfg;
    cfg.steps = 20;
    cfg.T = 50;
    cfg.dataset_size = 4;
    cfg.image_size = 8;
    cfg.samples = 2;
    cfg.eval_draws = 2;
    cfg.net_width = 4;
    cfg.learned_reconstructor = true;
    cfg.reconstructor_steps = 5;
    for (double lambda : {0.0, 0.1}) {
      cfg.lambda = lambda;
      cfg.out = test::scratch_dir(lambda == 0.0 ? "cli_train_plain" : "cli_train_guided").string();
      const auto r = cmd_train_sample(cfg);
      CHECK(r.report["diverged"].get<bool>() == false);
      for (const char* f : {"config.json", "loss_curve.csv", "checkpoint.bin", "checkpoint.json", "report.json",
                            "sample_0_image.pgm", "sample_1_laplacian.gdlf", "sample_0_learned.pgm",
                            "reconstructor.bin"}) {
        CHECK_MESSAGE(std::filesystem::exists(r.run_dir / f), f);
      }
      const double pen = r.report["final_penalty_term"].get<double>();
      CHECK(std::isfinite(pen));
      if (lambda > 0.0) CHECK(pen > 0.0);
      else CHECK(pen == 0.0);
    }
    cfg.penalty = "curl";
    CHECK_THROWS_AS(cmd_train_sample(cfg), ParameterError);
  }
}
