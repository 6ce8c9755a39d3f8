#include "gddm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "gddm/analysis.hpp"
#include "gddm/assets.hpp"
#include "gddm/diffops.hpp"
#include "gddm/diffusion.hpp"
#include "gddm/error.hpp"
#include "gddm/image_io.hpp"
#include "gddm/model.hpp"
#include "gddm/poisson.hpp"
#include "gddm/schedule.hpp"

namespace gddm::cli {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

#define GDDM_CONFIG_FIELDS(X)                                                                     \
  X(seed) X(schedule) X(T) X(beta_start) X(beta_end) X(domain) X(bins) X(tol) X(lambda) X(steps) \
  X(lr) X(out) X(input) X(timesteps) X(write_matrices) X(cg_tol) X(max_iter) X(sigma) X(height) \
  X(width) X(repetitions) X(dataset) X(dataset_size) X(image_size) X(batch) X(net_width)         \
  X(penalty) X(grad_clip) X(samples) X(eval_draws) X(learned_reconstructor) X(reconstructor_steps)

ordered_json to_json(const ExperimentConfig& cfg) {
  ordered_json j;
#define GDDM_TO_JSON(name) j[#name] = cfg.name;
  GDDM_CONFIG_FIELDS(GDDM_TO_JSON)
#undef GDDM_TO_JSON
  return j;
}

ExperimentConfig merge_json(ExperimentConfig base, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
#define GDDM_NAME(name) #name,
      GDDM_CONFIG_FIELDS(GDDM_NAME)
#undef GDDM_NAME
  };
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  try {
#define GDDM_FROM_JSON(name) \
  if (j.contains(#name)) j.at(#name).get_to(base.name);
    GDDM_CONFIG_FIELDS(GDDM_FROM_JSON)
#undef GDDM_FROM_JSON
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return base;
}

ExperimentConfig load_config_file(const fs::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return merge_json(std::move(base), j);
}

namespace {

void write_json(const fs::path& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out << j.dump(2) << '\n';
}

Schedule schedule_of(const ExperimentConfig& cfg) {
  return make_schedule(parse_schedule_kind(cfg.schedule), cfg.T, cfg.beta_start, cfg.beta_end);
}

Field load_input(const ExperimentConfig& cfg) {
  return read_pnm(cfg.input.empty() ? bundled_image_path() : fs::path(cfg.input));
}

// Writes a domain field for viewing: one PGM per channel unless it is a
// plain 1- or 3-channel image.
void write_display(const fs::path& stem, const Field& x) {
  if (x.channels() == 1 || x.channels() == 3) {
    write_pnm(stem.string() + ".pgm", normalize_for_display(x));
    return;
  }
  for (std::size_t c = 0; c < x.channels(); ++c) {
    write_pnm(stem.string() + "_c" + std::to_string(c) + ".pgm", normalize_for_display(channel(x, c)));
  }
}

struct RunningMoments {
  double sum = 0.0;
  double sumsq = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    sumsq += v * v;
    ++n;
  }
  double variance() const {
    const double m = sum / static_cast<double>(n);
    return (sumsq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
  }
};

ordered_json domain_map(const std::vector<int>& values) {
  ordered_json j;
  for (std::size_t i = 0; i < 3; ++i) j[to_string(kAllDomains[i])] = values[i];
  return j;
}

}  // namespace

fs::path prepare_run_dir(const std::string& command, const ExperimentConfig& cfg) {
  const fs::path dir = fs::path(cfg.out) / (command + "_seed" + std::to_string(cfg.seed));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
  write_json(dir / "config.json", to_json(cfg));
  return dir;
}

CommandResult cmd_variance_check(const ExperimentConfig& cfg) {
  if (cfg.height < 3 || cfg.width < 3) throw ParameterError("variance-check needs fields of at least 3x3");
  if (cfg.repetitions < 1) throw ParameterError("variance-check needs repetitions >= 1");
  CommandResult res;
  res.run_dir = prepare_run_dir("variance-check", cfg);
  Rng rng(cfg.seed);
  const Shape shape{cfg.height, cfg.width, 1};
  RunningMoments eps_m, grad_m, lap_m;
  for (std::size_t r = 0; r < cfg.repetitions; ++r) {
    const Field eps = sample_gaussian(shape, cfg.sigma, rng);
    const GradientField g = forward_gradient(eps);
    const Field lap = laplacian_fe(eps);
    for (std::size_t u = 0; u < cfg.height; ++u) {
      for (std::size_t v = 0; v < cfg.width; ++v) {
        eps_m.add(eps(u, v));
        if (u + 1 < cfg.height) grad_m.add(g.gu(u, v));
        if (v + 1 < cfg.width) grad_m.add(g.gv(u, v));
        if (u > 0 && v > 0 && u + 1 < cfg.height && v + 1 < cfg.width) lap_m.add(lap(u, v));
      }
    }
  }
  const double ratio_g = grad_m.variance() / eps_m.variance();
  const double ratio_l = lap_m.variance() / eps_m.variance();
  const bool ok_g = std::abs(ratio_g / 2.0 - 1.0) <= 0.02;
  const bool ok_l = std::abs(ratio_l / 1.25 - 1.0) <= 0.02;
  res.report = {{"measured_gradient_ratio", ratio_g},
                {"measured_laplacian_ratio", ratio_l},
                {"expected", {2.0, 1.25}},
                {"noise_variance", eps_m.variance()},
                {"gradient_samples", grad_m.n},
                {"laplacian_interior_pixels", lap_m.n},
                {"tolerance", 0.02},
                {"pass", ok_g && ok_l}};
  write_json(res.run_dir / "report.json", res.report);
  res.exit_code = (ok_g && ok_l) ? 0 : 1;
  return res;
}

CommandResult cmd_converge(const ExperimentConfig& cfg) {
  const Field image = load_input(cfg);
  const Schedule s = schedule_of(cfg);
  if (cfg.bins < 2) throw ParameterError("bins must be >= 2");
  for (int t : cfg.timesteps) check_timestep(s, t);

  CommandResult res;
  res.run_dir = prepare_run_dir("converge", cfg);
  const std::set<int> snap_at(cfg.timesteps.begin(), cfg.timesteps.end());

  std::vector<int> tc(3), tc2(3);
  ordered_json isotonic, manifests;
  for (std::size_t di = 0; di < 3; ++di) {
    const DomainKind d = kAllDomains[di];
    const std::string name = to_string(d);
    const Field x0 = to_domain(image, d);
    const auto [lo, hi] = default_histogram_range(d);
    std::vector<Histogram> h1, h2;
    h1.reserve(static_cast<std::size_t>(s.steps()) + 1);
    h2.reserve(static_cast<std::size_t>(s.steps()) + 1);
    Rng rng(cfg.seed);  // shared across domains
    forward_iterative_visit(x0, s, rng, d, [&](int t, const Field& x) {
      h1.push_back(histogram(x, cfg.bins, lo, hi));
      h2.push_back(histogram(x, 2 * cfg.bins, lo, hi));
      if (snap_at.contains(t)) {
        const std::string stem = "snapshot_" + name + "_t" + std::to_string(t);
        write_raw_field(res.run_dir / (stem + ".gdlf"), x);
        write_display(res.run_dir / stem, x);
      }
    });
    manifests[name] = {{"domain", name},
                       {"T", s.steps()},
                       {"schedule",
                        {{"kind", cfg.schedule}, {"T", cfg.T}, {"beta_start", cfg.beta_start},
                         {"beta_end", cfg.beta_end}}},
                       {"seed", cfg.seed},
                       {"timesteps", std::vector<int>(snap_at.begin(), snap_at.end())}};

    const auto rep = convergence_report(h1, d, cfg.tol);
    const auto rep2 = convergence_report(h2, d, cfg.tol);
    tc[di] = rep.t_converge;
    tc2[di] = rep2.t_converge;
    write_series_csv(res.run_dir / ("jsd_to_terminal_" + name + ".csv"), rep.jsd_to_terminal, "jsd");
    if (cfg.write_matrices) {
      const auto m = jsd_matrix(h1, d);
      write_matrix_csv(res.run_dir / ("jsd_matrix_" + name + ".csv"), m);
      std::vector<double> first_row(m.values.begin(), m.values.begin() + static_cast<long>(m.size));
      isotonic[name] = isotonic_violation(first_row);
    }
  }
  write_json(res.run_dir / "trajectory_manifest.json", manifests);

  const bool ordered = tc[2] < tc[1] && tc[1] < tc[0];
  const bool ordered2 = tc2[2] < tc2[1] && tc2[1] < tc2[0];
  int shift = 0;
  for (std::size_t i = 0; i < 3; ++i) shift = std::max(shift, std::abs(tc[i] - tc2[i]));
  const bool binning_stable = shift <= s.steps() / 10;
  res.report = {{"tol", cfg.tol},
                {"bins", cfg.bins},
                {"t_converge", domain_map(tc)},
                {"t_converge_doubled_bins", domain_map(tc2)},
                {"ordering_laplacian_gradient_image", ordered},
                {"ordering_stable_under_doubled_bins", ordered2},
                {"max_binning_shift", shift},
                {"binning_shift_within_10pct_of_T", binning_stable},
                {"first_row_isotonic_violation", isotonic},
                {"pass", ordered && ordered2}};
  write_json(res.run_dir / "summary.json", res.report);
  res.exit_code = (ordered && ordered2) ? 0 : 1;
  return res;
}

CommandResult cmd_poisson_roundtrip(const ExperimentConfig& cfg) {
  const Field x = load_input(cfg);
  CommandResult res;
  res.run_dir = prepare_run_dir("poisson-roundtrip", cfg);
  const double anchor = mean(x);

  const PoissonSolution spectral = solve_poisson_neumann(laplacian_fe(x), anchor);
  const double rel_err = norm2(spectral.image - x) / norm2(x);

  const CgOptions opts{cfg.cg_tol, cfg.max_iter, false};
  const PoissonSolution cg = reconstruct_from_gradient(forward_gradient(x), anchor, opts);
  const double cg_err = norm2(cg.image - x) / norm2(x);
  const double witness = greens_identity_check(spectral.image, cg.image) / max_abs(spectral.image);
  const double shift_witness = greens_identity_check(spectral.image, spectral.image + Field(x.shape(), 5.0));

  // Non-integrable input: the true gradient plus seeded white noise.
  Rng rng(cfg.seed);
  GradientField noisy = forward_gradient(x);
  noisy.gu += sample_gaussian(x.shape(), 0.05, rng);
  noisy.gv += sample_gaussian(x.shape(), 0.05, rng);
  const PoissonSolution ls = reconstruct_from_gradient(noisy, anchor, opts);
  const double misfit = std::sqrt(2.0 * gradient_energy(ls.image, noisy)) /
                        std::sqrt(dot(noisy.gu, noisy.gu) + dot(noisy.gv, noisy.gv));

  // Divergence-free input reconstructs to a constant.
  const GradientField curl = curl_adjoint(sample_gaussian(x.shape(), 1.0, rng));
  const double curl_div = max_abs(divergence_adjoint(curl));
  const PoissonSolution flat = reconstruct_from_gradient(curl, anchor, opts);
  const double flat_dev = max_abs(flat.image - Field(x.shape(), anchor));

  const bool ok = rel_err <= 1e-8 && cg.converged && witness <= 1e-6 && shift_witness <= 1e-12 &&
                  ls.converged && flat_dev <= 1e-8;
  res.report = {
      {"spectral", {{"relative_error", rel_err}, {"residual_l2", spectral.residual_l2},
                    {"compatibility_projected", spectral.compatibility_projected}}},
      {"cg", {{"relative_error", cg_err}, {"iterations", cg.iterations}, {"converged", cg.converged},
              {"residual_l2", cg.residual_l2}, {"tol", cfg.cg_tol}}},
      {"greens_identity_witness_relative", witness},
      {"constant_shift_witness", shift_witness},
      {"non_integrable", {{"normal_equation_residual", ls.residual_l2}, {"iterations", ls.iterations},
                          {"converged", ls.converged}, {"relative_gradient_misfit", misfit}}},
      {"divergence_free", {{"max_abs_divergence", curl_div}, {"max_deviation_from_anchor", flat_dev},
                           {"iterations", flat.iterations}}},
      {"pass", ok}};
  write_json(res.run_dir / "report.json", res.report);
  write_pnm(res.run_dir / "spectral.pgm", spectral.image.channels() == 2 ? channel(spectral.image, 0)
                                                                          : spectral.image);
  res.exit_code = ok ? 0 : 1;
  return res;
}

namespace {

std::vector<Field> load_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.empty()) {
    Rng rng = Rng(cfg.seed).derive(1);
    return make_blob_dataset(cfg.dataset_size, cfg.image_size, rng);
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(cfg.dataset)) {
    const auto ext = e.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no PGM/PPM images in " + cfg.dataset);
  std::vector<Field> out;
  for (const auto& f : files) {
    out.push_back(read_pnm(f));
    if (out.back().shape() != out.front().shape()) throw ShapeError("dataset images differ in shape");
  }
  return out;
}

void write_curve_csv(const fs::path& path, const TrainReport& rep) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out << "step,loss,noise_term,penalty_term\n";
  char buf[128];
  for (std::size_t i = 0; i < rep.loss_curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g\n", rep.logged_steps[i], rep.loss_curve[i],
                  rep.noise_curve[i], rep.penalty_curve[i]);
    out << buf;
  }
}

}  // namespace

CommandResult cmd_train_sample(const ExperimentConfig& cfg) {
  const DomainKind d = parse_domain(cfg.domain);
  const Schedule s = schedule_of(cfg);
  LossConfig lcfg;
  lcfg.lambda = cfg.lambda;
  lcfg.penalty = parse_penalty_kind(cfg.penalty);
  lcfg.batch_size = cfg.batch;
  lcfg.grad_clip = cfg.grad_clip;
  const std::vector<Field> images = load_dataset(cfg);

  CommandResult res;
  res.run_dir = prepare_run_dir("train-sample", cfg);

  std::vector<Field> data;
  double data_mean = 0.0;
  for (const auto& img : images) {
    data.push_back(to_domain(img, d));
    data_mean += mean(img);
  }
  data_mean /= static_cast<double>(images.size());

  TinyConvNetConfig ncfg;
  ncfg.data_channels = data.front().channels();
  ncfg.width = cfg.net_width;
  ncfg.seed = cfg.seed;
  TinyConvNet net(ncfg);
  const PoissonReconstructor direct;
  Rng train_rng = Rng(cfg.seed).derive(2);

  TrainReport rep;
  try {
    rep = train(net, data, s, d, lcfg, cfg.lr, cfg.steps, train_rng, &direct);
  } catch (const TrainingDiverged& e) {
    write_curve_csv(res.run_dir / "loss_curve.csv", e.report());
    res.report = {{"diverged", true}, {"step", e.step()}, {"last_finite_loss", e.last_finite_loss()},
                  {"pass", false}};
    write_json(res.run_dir / "report.json", res.report);
    res.exit_code = 3;
    return res;
  }
  write_curve_csv(res.run_dir / "loss_curve.csv", rep);
  save_checkpoint(net, res.run_dir / "checkpoint", rep.steps);

  // Same (t, eps) draws for the trained net and the zero-noise baseline.
  LossConfig ecfg = lcfg;
  ecfg.draws_per_field = std::max<std::size_t>(1, cfg.eval_draws);
  Rng eval_a = Rng(cfg.seed).derive(3);
  Rng eval_b = Rng(cfg.seed).derive(3);
  const LossValue trained = loss_eval(net, data, s, d, eval_a, ecfg, &direct);
  const LossValue baseline = loss_eval(ZeroPredictor{}, data, s, d, eval_b, ecfg, &direct);
  const double ratio = trained.total / baseline.total;

  std::unique_ptr<TinyConvNet> learned;
  ordered_json learned_report = nullptr;
  if (cfg.learned_reconstructor && d != DomainKind::Image) {
    TinyConvNetConfig rcfg;
    rcfg.data_channels = data.front().channels();
    rcfg.out_channels = images.front().channels();
    rcfg.width = cfg.net_width;
    rcfg.time_conditioning = false;
    rcfg.seed = cfg.seed + 1;
    learned = std::make_unique<TinyConvNet>(rcfg);
    Rng rrng = Rng(cfg.seed).derive(5);
    const std::vector<double> levels{0.0, 0.02};
    const auto rrep = train_reconstructor(*learned, images, d, levels, rrng, cfg.lr, cfg.reconstructor_steps,
                                          cfg.batch);
    save_checkpoint(*learned, res.run_dir / "reconstructor", rrep.steps);
    Rng mrng = Rng(cfg.seed).derive(6);
    learned_report = {{"final_loss", rrep.final_loss},
                      {"mse_clean", reconstructor_mse(*learned, images, d, 0.0, mrng)}};
  }

  Rng sample_rng = Rng(cfg.seed).derive(4);
  const Shape shape = data.front().shape();
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    const Field field = sample(net, s, shape, d, true, sample_rng);
    const std::string stem = "sample_" + std::to_string(i);
    write_raw_field(res.run_dir / (stem + "_" + cfg.domain + ".gdlf"), field);
    const Field img = direct.reconstruct(field, d, data_mean);
    write_raw_field(res.run_dir / (stem + "_image.gdlf"), img);
    write_pnm(res.run_dir / (stem + "_image.pgm"), img);
    if (learned) {
      Field limg = reconstructor_predict(*learned, field);
      limg = anchor_channel_means(std::move(limg), data_mean);
      write_pnm(res.run_dir / (stem + "_learned.pgm"), limg);
    }
  }

  const bool ok = ratio <= 0.7;
  res.report = {{"domain", cfg.domain},
                {"steps", rep.steps},
                {"final_training_loss", rep.final_loss},
                {"final_penalty_term", rep.penalty_curve.back()},
                {"eval_loss", trained.total},
                {"eval_noise_term", trained.noise},
                {"eval_penalty_term", trained.penalty},
                {"baseline_loss", baseline.total},
                {"loss_ratio", ratio},
                {"threshold", 0.7},
                {"learned_reconstructor", learned_report},
                {"samples", cfg.samples},
                {"diverged", false},
                {"pass", ok}};
  write_json(res.run_dir / "report.json", res.report);
  res.exit_code = ok ? 0 : 1;
  return res;
}

}  // namespace gddm::cli
