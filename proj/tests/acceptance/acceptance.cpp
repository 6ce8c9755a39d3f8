// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// pass criterion numbers as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gddm/analysis.hpp"
#include "gddm/assets.hpp"
#include "gddm/cli.hpp"
#include "gddm/diffops.hpp"
#include "gddm/diffusion.hpp"
#include "gddm/image_io.hpp"
#include "gddm/model.hpp"
#include "gddm/poisson.hpp"
#include "gddm/schedule.hpp"

using namespace gddm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::filesystem::path scratch(const std::string& name) {
  const char* env = std::getenv("GDDM_ACCEPTANCE_TMP");
  const auto root = env != nullptr ? std::filesystem::path(env)
                                   : std::filesystem::temp_directory_path() / "gddm_acceptance";
  const auto dir = root / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct Moments {
  double sum = 0.0, sumsq = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    sumsq += v * v;
    ++n;
  }
  double mean() const { return sum / static_cast<double>(n); }
  double variance() const {
    const double m = mean();
    return (sumsq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
  }
};

// 1. Interior noise variance ratios of the gradient and FE Laplacian.
Outcome variance_constants() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = 1026;  // 1024^2 interior pixels
  Rng rng(0);
  const Field eps = sample_gaussian(Shape{n, n, 1}, 1.0, rng);
  const GradientField g = forward_gradient(eps);
  const Field lap = laplacian_fe(eps);
  Moments e, gu, gv, l;
  for (std::size_t u = 1; u + 1 < n; ++u) {
    for (std::size_t v = 1; v + 1 < n; ++v) {
      e.add(eps(u, v));
      gu.add(g.gu(u, v));
      gv.add(g.gv(u, v));
      l.add(lap(u, v));
    }
  }
  const double rg = 0.5 * (gu.variance() + gv.variance()) / e.variance();
  const double rl = l.variance() / e.variance();
  const double secs = seconds_since(t0);
  const bool ok = std::abs(rg / 2.0 - 1.0) <= 0.02 && std::abs(rl / 1.25 - 1.0) <= 0.02 && l.n >= 1000000 &&
                  secs < 10.0;
  return {ok, fmt("gradient %.4f (want 2 +-2%%), laplacian %.4f (want 1.25 +-2%%), %zu interior px, %.2f s", rg,
                  rl, l.n, secs)};
}

Field smooth_256() {
  Rng rng(0);
  return make_smooth_field(256, 256, rng);
}

// 2. Spectral and CG round trips on a smooth 256x256 field.
Outcome poisson_round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  const Field x = smooth_256();
  const auto spectral = solve_poisson_neumann(laplacian_fe(x), mean(x));
  const double err = norm2(spectral.image - x) / norm2(x);
  const auto cg = reconstruct_from_gradient(forward_gradient(x), mean(x), 1e-8, 2000);
  const double secs = seconds_since(t0);
  const bool ok = err <= 1e-8 && cg.converged && cg.iterations <= 2000 && secs < 30.0;
  return {ok, fmt("spectral rel err %.2e (<= 1e-8), CG converged=%d in %zu it (tol 1e-8, cap 2000), %.2f s", err,
                  cg.converged ? 1 : 0, cg.iterations, secs)};
}

// 3. Green's identity witness between independent solvers, and for a shift.
Outcome uniqueness() {
  const Field x = smooth_256();
  const auto spectral = solve_poisson_neumann(laplacian_fe(x), 0.0);
  const auto cg = reconstruct_from_gradient(forward_gradient(x), 1.0, 1e-8, 2000);
  const double rel = greens_identity_check(spectral.image, cg.image) / max_abs(spectral.image);
  const double shift = greens_identity_check(spectral.image, spectral.image + Field(x.shape(), 5.0));
  const bool ok = rel <= 1e-6 && shift <= 1e-12;
  return {ok, fmt("spectral vs CG witness %.2e relative (<= 1e-6), constant shift %.2e (<= 1e-12)", rel, shift)};
}

// 4. <grad x, g> = <x, div g> over seeded pairs of random shape.
Outcome adjointness() {
  Rng rng(0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Shape sh{rng.uniform_int(1, 48), rng.uniform_int(1, 48), rng.uniform_int(1, 3)};
    const Field x = sample_gaussian(sh, 1.0, rng);
    const GradientField g{sample_gaussian(sh, 1.0, rng), sample_gaussian(sh, 1.0, rng)};
    const auto gx = forward_gradient(x);
    const double lhs = dot(gx.gu, g.gu) + dot(gx.gv, g.gv);
    const double rhs = dot(x, divergence_adjoint(g));
    const double gnorm = std::sqrt(dot(g.gu, g.gu) + dot(g.gv, g.gv));
    worst = std::max(worst, std::abs(lhs - rhs) / (norm2(x) * gnorm + 1.0));
  }
  return {worst <= 1e-10, fmt("max |<Dx,g> - <x,D'g>| / (|x||g| + 1) = %.2e over 100 pairs (<= 1e-10)", worst)};
}

// 5. Terminal moments of the step-by-step forward process against the
// closed-form marginal N(sqrt(g) x0, s^2 (1 - g)), pooled over pixels.
Outcome forward_consistency() {
  const auto t0 = std::chrono::steady_clock::now();
  const Schedule s = default_schedule();
  const int T = s.steps();
  const double g = s.gamma(T);
  Rng img_rng(0);
  const Field img = make_smooth_field(64, 64, img_rng);
  bool ok = true;
  std::string detail;
  for (DomainKind d : kAllDomains) {
    const Field x0 = to_domain(img, d);
    const double sd = noise_scale(d) * std::sqrt(1.0 - g);
    Moments iter, closed;
    for (std::uint64_t k = 0; k < 200; ++k) {
      Rng rng = Rng(k).derive(static_cast<std::uint64_t>(d) + 1);
      forward_iterative_visit(x0, s, rng, d, [&](int t, const Field& x) {
        if (t != T) return;
        for (std::size_t i = 0; i < x.size(); ++i) iter.add((x[i] - std::sqrt(g) * x0[i]) / sd);
      });
      const Field eps = sample_gaussian(x0.shape(), 1.0, rng);
      const Field xc = forward_closed_form(x0, T, eps, s, d);
      for (std::size_t i = 0; i < xc.size(); ++i) closed.add((xc[i] - std::sqrt(g) * x0[i]) / sd);
    }
    // Standardized residuals: mean 0 with SE 1/sqrt(n), variance 1.
    const double se = 1.0 / std::sqrt(static_cast<double>(iter.n));
    const bool dom_ok = std::abs(iter.mean()) <= 3 * se && std::abs(iter.variance() - 1.0) <= 0.03 &&
                        std::abs(closed.mean()) <= 3 * se && std::abs(closed.variance() - 1.0) <= 0.03;
    ok = ok && dom_ok;
    detail += fmt("%s z-mean %+.2f SE var ratio %.4f (closed form %+.2f SE, %.4f); ", to_string(d).c_str(),
                  iter.mean() / se, iter.variance(), closed.mean() / se, closed.variance());
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 60.0;
  return {ok, detail + fmt("limits 3 SE / 3%%, %.1f s", secs)};
}

// 6. JSD convergence times on the bundled image.
Outcome convergence_ordering() {
  const Field img = read_pnm(bundled_image_path());
  const Schedule s = default_schedule();
  int tc[3], tc2[3];
  for (std::size_t i = 0; i < 3; ++i) {
    const DomainKind d = kAllDomains[i];
    const auto [lo, hi] = default_histogram_range(d);
    std::vector<Histogram> h1, h2;
    Rng rng(0);
    forward_iterative_visit(to_domain(img, d), s, rng, d, [&](int, const Field& x) {
      h1.push_back(histogram(x, 128, lo, hi));
      h2.push_back(histogram(x, 256, lo, hi));
    });
    tc[i] = convergence_report(h1, d, 0.01).t_converge;
    tc2[i] = convergence_report(h2, d, 0.01).t_converge;
  }
  const bool ord = tc[2] < tc[1] && tc[1] < tc[0];
  const bool ord2 = tc2[2] < tc2[1] && tc2[1] < tc2[0];
  return {ord && ord2, fmt("t_converge laplacian/gradient/image = %d/%d/%d at 128 bins, %d/%d/%d at 256 bins "
                           "(need laplacian < gradient < image at both)",
                           tc[2], tc[1], tc[0], tc2[2], tc2[1], tc2[0])};
}

class TrueNoise final : public NoisePredictor {
 public:
  explicit TrueNoise(const Field& eps) : eps_(eps) {}
  Field predict(const Field&, int, const Schedule&, DomainKind) const override { return eps_; }

 private:
  const Field& eps_;
};

// 7. reverse_step(t = 1) with the injected noise recovers x0.
Outcome one_step_inversion() {
  const Field img = read_pnm(bundled_image_path());
  const Schedule s = default_schedule();
  double worst = 0.0;
  for (DomainKind d : kAllDomains) {
    const Field x0 = to_domain(img, d);
    Rng rng(7);
    const Field eps = sample_gaussian(x0.shape(), 1.0, rng);
    const Field x1 = forward_closed_form(x0, 1, eps, s, d);
    const Field back = reverse_step(x1, 1, TrueNoise(eps), s, d, true, rng);
    worst = std::max(worst, max_abs(back - x0));
  }
  return {worst <= 1e-12, fmt("max |x0_rec - x0| = %.2e over all domains (<= 1e-12)", worst)};
}

// 8. Backprop against central differences for every parameter.
Outcome backprop() {
  const Schedule s = default_schedule();
  TinyConvNet net(TinyConvNetConfig{});
  Rng prng(8);
  for (double& p : net.parameters()) p = prng.uniform() - 0.5;
  const Field x = sample_gaussian(Shape{8, 8, 1}, 1.0, prng);
  const Field up = sample_gaussian(Shape{8, 8, 1}, 1.0, prng);
  const int t = 400;
  const ParameterGradients grads = net_backward(net, x, t, s, up);
  const double h = 1e-5;
  auto params = net.parameters();
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double lp = dot(net_forward(net, x, t, s), up);
    params[i] = keep - h;
    const double lm = dot(net_forward(net, x, t, s), up);
    params[i] = keep;
    const double fd = (lp - lm) / (2 * h);
    worst = std::max(worst, std::abs(fd - grads[i]) / std::max({std::abs(fd), std::abs(grads[i]), 1e-6}));
  }
  return {worst <= 1e-4, fmt("%zu parameters, worst relative error %.2e (<= 1e-4, step 1e-5)", params.size(), worst)};
}

// 9. Ancestral sampling with the analytic oracle reproduces the data law.
Outcome oracle_sampling() {
  const auto t0 = std::chrono::steady_clock::now();
  const Schedule s = default_schedule();
  const double mu = 0.3, var0 = 0.5;
  const int n_samples = 10000;

  // Image domain, i.i.d. N(mu, var0) pixels on 4x4 images.
  const AnalyticGaussianOracle oracle(mu, var0);
  Rng rng(9);
  Moments img;
  for (int i = 0; i < n_samples; ++i) {
    const Field x = sample(oracle, s, Shape{4, 4, 1}, DomainKind::Image, true, rng);
    for (double v : x.data()) img.add(v);
  }
  const double se = std::sqrt(var0 / static_cast<double>(img.n));
  const bool img_ok = std::abs(img.mean() - mu) <= 3 * se && std::abs(img.variance() / var0 - 1.0) <= 0.05;

  // Gradient domain on 1x2 images: the one forward difference is
  // N(0, 2 var0); CG reconstruction anchored at mu gives pixels
  // mu -+ diff / 2, whose variance about mu is var0 / 2.
  const AnalyticGaussianOracle grad_oracle(0.0, 2.0 * var0);
  Rng grng(10);
  Moments rec;
  for (int i = 0; i < n_samples; ++i) {
    const Field g = sample(grad_oracle, s, Shape{1, 2, 2}, DomainKind::Gradient, true, grng);
    const auto sol = reconstruct_from_gradient(unpack_gradient(g), mu, 1e-12, 10);
    for (double v : sol.image.data()) rec.add(v);
  }
  const double want = var0 / 2.0;
  const bool grad_ok = std::abs(rec.variance() / want - 1.0) <= 0.07 && std::abs(rec.mean() - mu) <= 1e-9;
  const double secs = seconds_since(t0);
  return {img_ok && grad_ok && secs < 300.0,
          fmt("image: mean %.4f (%.2f SE from %.2f), var %.4f (want %.2f +-5%%); gradient+CG: var %.4f "
              "(want %.3f +-7%%); %.1f s",
              img.mean(), (img.mean() - mu) / se, mu, img.variance(), var0, rec.variance(), want, secs)};
}

// 10. Training on blobs beats the zero predictor; the guided run stays finite.
Outcome training_progress() {
  const auto root = scratch("training");
  bool ok = true;
  std::string detail;
  for (DomainKind d : kAllDomains) {
    for (double lambda : {0.0, 0.1}) {
      const auto t0 = std::chrono::steady_clock::now();
      cli::ExperimentConfig cfg;
      cfg.domain = to_string(d);
      cfg.lambda = lambda;
      cfg.samples = 1;
      cfg.out = (root / (cfg.domain + (lambda > 0 ? "_guided" : "_plain"))).string();
      const auto r = cli::cmd_train_sample(cfg);
      const double secs = seconds_since(t0);
      const bool diverged = r.report.value("diverged", true);
      if (lambda == 0.0) {
        const double ratio = r.report["loss_ratio"].get<double>();
        ok = ok && !diverged && ratio <= 0.7 && secs < 600.0;
        detail += fmt("%s loss/baseline %.3f (<= 0.7) %.0f s; ", cfg.domain.c_str(), ratio, secs);
      } else {
        const double pen = diverged ? NAN : r.report["final_penalty_term"].get<double>();
        ok = ok && !diverged && std::isfinite(pen) && secs < 600.0;
        detail += fmt("%s guided penalty %.3g %.0f s; ", cfg.domain.c_str(), pen, secs);
      }
    }
  }
  return {ok, detail};
}

// 11. The Laplacian of the bundled image is sparser and heavier tailed.
Outcome sparsity() {
  const Field img = read_pnm(bundled_image_path());
  std::vector<double> v(img.data().begin(), img.data().end());
  std::sort(v.begin(), v.end());
  const double med = 0.5 * (v[(v.size() - 1) / 2] + v[v.size() / 2]);
  Field centred = img;
  for (auto& x : centred.data()) x -= med;
  const auto lap = sparsity_metrics(laplacian_fe(img), 0.02);
  const auto raw = sparsity_metrics(centred, 0.02);
  const bool ok = lap.fraction_near_zero > raw.fraction_near_zero && lap.excess_kurtosis > raw.excess_kurtosis;
  return {ok, fmt("near-zero fraction %.3f vs %.3f, excess kurtosis %.2f vs %.2f (laplacian vs image)",
                  lap.fraction_near_zero, raw.fraction_near_zero, lap.excess_kurtosis, raw.excess_kurtosis)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "variance constants", variance_constants},
      {2, "poisson round trip", poisson_round_trip},
      {3, "uniqueness witness", uniqueness},
      {4, "gradient adjointness", adjointness},
      {5, "closed-form vs iterative forward", forward_consistency},
      {6, "convergence ordering", convergence_ordering},
      {7, "one-step inversion", one_step_inversion},
      {8, "backprop vs finite differences", backprop},
      {9, "oracle ancestral sampling", oracle_sampling},
      {10, "training progress", training_progress},
      {11, "laplacian sparsity", sparsity},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

  int failed = 0, ran = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    ++ran;
    if (!o.pass) ++failed;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
