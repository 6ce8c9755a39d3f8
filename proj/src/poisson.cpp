#include "gddm/poisson.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "gddm/error.hpp"

namespace gddm {
namespace {

// FFTW's planner is not re-entrant; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class R2RPlan {
 public:
  R2RPlan(int rows, int cols, double* in, double* out, fftw_r2r_kind kind) {
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_r2r_2d(rows, cols, in, out, kind, kind, FFTW_ESTIMATE);
    if (plan_ == nullptr) throw Error("FFTW failed to create a DCT plan");
  }
  R2RPlan(const R2RPlan&) = delete;
  R2RPlan& operator=(const R2RPlan&) = delete;
  ~R2RPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  void execute() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_;
};

std::vector<double> per_channel_means(const Field& x) {
  std::vector<double> m(x.channels(), 0.0);
  const std::size_t nc = x.channels();
  for (std::size_t p = 0; p < x.shape().pixels(); ++p) {
    for (std::size_t c = 0; c < nc; ++c) m[c] += x[p * nc + c];
  }
  for (auto& v : m) v /= static_cast<double>(x.shape().pixels());
  return m;
}

}  // namespace

Field anchor_channel_means(Field x, double target) {
  const auto means = per_channel_means(x);
  const std::size_t nc = x.channels();
  for (std::size_t p = 0; p < x.shape().pixels(); ++p) {
    for (std::size_t c = 0; c < nc; ++c) x[p * nc + c] += target - means[c];
  }
  return x;
}

PoissonSolution solve_poisson_neumann(const Field& y, double anchor_mean) {
  if (y.empty()) throw DimensionError("solve_poisson_neumann: empty right-hand side");
  if (!all_finite(y)) throw InputError("solve_poisson_neumann: non-finite right-hand side");
  if (!std::isfinite(anchor_mean)) throw InputError("solve_poisson_neumann: non-finite anchor");

  PoissonSolution sol;
  sol.anchored_mean = anchor_mean;

  const std::size_t h = y.height(), w = y.width(), nc = y.channels();
  const auto means = per_channel_means(y);
  const double peak = max_abs(y);
  Field rhs = y;
  for (std::size_t c = 0; c < nc; ++c) {
    sol.rhs_mean_removed = std::max(sol.rhs_mean_removed, std::abs(means[c]));
    if (std::abs(means[c]) > 1e-8 * peak) sol.compatibility_projected = true;
  }
  // Always remove the mean: even a compatible rhs carries rounding residue in
  // the zero-frequency mode, which the solve must discard.
  for (std::size_t p = 0; p < h * w; ++p) {
    for (std::size_t c = 0; c < nc; ++c) rhs[p * nc + c] -= means[c];
  }

  // Eigenvalues of the replicate-boundary FE Laplacian in the DCT-II basis.
  std::vector<double> row_eig(h), col_eig(w);
  for (std::size_t k = 0; k < h; ++k) {
    row_eig[k] = 0.25 * (2.0 * std::cos(std::numbers::pi * static_cast<double>(k) / h) - 2.0);
  }
  for (std::size_t l = 0; l < w; ++l) {
    col_eig[l] = 0.25 * (2.0 * std::cos(std::numbers::pi * static_cast<double>(l) / w) - 2.0);
  }

  std::vector<double> buf(h * w), coef(h * w);
  R2RPlan forward(static_cast<int>(h), static_cast<int>(w), buf.data(), coef.data(), FFTW_REDFT10);
  R2RPlan inverse(static_cast<int>(h), static_cast<int>(w), coef.data(), buf.data(), FFTW_REDFT01);
  const double norm = 1.0 / (4.0 * static_cast<double>(h) * static_cast<double>(w));

  sol.image = Field(y.shape());
  for (std::size_t c = 0; c < nc; ++c) {
    for (std::size_t p = 0; p < h * w; ++p) buf[p] = rhs[p * nc + c];
    forward.execute();
    for (std::size_t k = 0; k < h; ++k) {
      for (std::size_t l = 0; l < w; ++l) {
        const double lambda = row_eig[k] + col_eig[l];
        coef[k * w + l] = (k == 0 && l == 0) ? 0.0 : coef[k * w + l] / lambda;
      }
    }
    inverse.execute();
    for (std::size_t p = 0; p < h * w; ++p) sol.image[p * nc + c] = buf[p] * norm;
  }
  sol.image = anchor_channel_means(std::move(sol.image), anchor_mean);

  const double rhs_norm = norm2(rhs);
  sol.residual_l2 = rhs_norm > 0.0 ? norm2(laplacian_fe(sol.image) - rhs) / rhs_norm : 0.0;
  return sol;
}

double gradient_energy(const Field& x, const GradientField& g) {
  const GradientField gx = forward_gradient(x);
  const double du = norm2(gx.gu - g.gu);
  const double dv = norm2(gx.gv - g.gv);
  return 0.5 * (du * du + dv * dv);
}

PoissonSolution reconstruct_from_gradient(const GradientField& g, double anchor_mean,
                                          const CgOptions& options) {
  require_same_shape(g.gu, g.gv, "reconstruct_from_gradient");
  if (!(options.tol > 0.0)) throw ParameterError("reconstruct_from_gradient: tol must be positive");
  if (!all_finite(g.gu) || !all_finite(g.gv)) {
    throw InputError("reconstruct_from_gradient: non-finite gradient field");
  }

  PoissonSolution sol;
  sol.anchored_mean = anchor_mean;
  sol.image = Field(g.gu.shape(), anchor_mean);

  // The divergence always sums to zero per channel; remove the rounding
  // residue so b stays in the range of the operator.
  Field b = divergence_adjoint(g);
  b = anchor_channel_means(std::move(b), 0.0);
  const double b_norm = norm2(b);
  // Below this the divergence is rounding noise (e.g. a divergence-free field).
  const double floor = 1e-13 * std::sqrt(dot(g.gu, g.gu) + dot(g.gv, g.gv));
  if (options.track_energy) sol.energy_history.push_back(gradient_energy(sol.image, g));
  if (b_norm <= floor) {
    sol.residual_l2 = 0.0;
    sol.converged = true;
    return sol;
  }

  // The initial guess is constant, so the initial residual is b itself.
  Field r = b;
  Field p = r;
  double rr = dot(r, r);
  const double target = std::max(options.tol * b_norm, floor);
  sol.converged = false;

  while (sol.iterations < options.max_iter) {
    const Field q = laplacian_lsq(p);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) break;
    const double alpha = rr / pq;
    for (std::size_t i = 0; i < r.size(); ++i) {
      sol.image[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    ++sol.iterations;
    if (options.track_energy) sol.energy_history.push_back(gradient_energy(sol.image, g));

    const double rr_new = dot(r, r);
    if (std::sqrt(rr_new) <= target) {
      // Confirm against the true residual; recurrence drift triggers a restart.
      r = b - laplacian_lsq(sol.image);
      rr = dot(r, r);
      if (std::sqrt(rr) <= target) {
        sol.converged = true;
        break;
      }
      p = r;
      continue;
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
  }

  sol.image = anchor_channel_means(std::move(sol.image), anchor_mean);
  sol.residual_l2 = norm2(laplacian_lsq(sol.image) - b) / b_norm;
  sol.converged = sol.converged || sol.residual_l2 * b_norm <= target;
  return sol;
}

PoissonSolution reconstruct_from_gradient(const GradientField& g, double anchor_mean, double tol,
                                          std::size_t max_iter) {
  return reconstruct_from_gradient(g, anchor_mean, CgOptions{tol, max_iter, false});
}

double greens_identity_check(const Field& x1, const Field& x2) {
  require_same_shape(x1, x2, "greens_identity_check");
  const Field d = x1 - x2;
  const auto means = per_channel_means(d);
  const std::size_t nc = d.channels();
  double worst = 0.0;
  for (std::size_t p = 0; p < d.shape().pixels(); ++p) {
    for (std::size_t c = 0; c < nc; ++c) worst = std::max(worst, std::abs(d[p * nc + c] - means[c]));
  }
  return worst;
}

}  // namespace gddm
