#pragma once

#include <cstddef>
#include <vector>

#include "gddm/diffops.hpp"
#include "gddm/field.hpp"

namespace gddm {

/// Image recovered from a Laplacian or gradient field.
///
/// Neumann problems fix the solution only up to an additive constant, so
/// every solution is pinned to an explicit per-channel mean.
struct PoissonSolution {
  Field image;
  /// ||op(image) - rhs|| / ||rhs||, 0 when rhs vanishes.
  double residual_l2 = 0.0;
  double anchored_mean = 0.0;
  /// CG iterations; always 0 for the spectral solve.
  std::size_t iterations = 0;
  bool converged = true;
  /// Set when the right-hand side violated the compatibility condition
  /// (nonzero mean) and its mean was projected out.
  bool compatibility_projected = false;
  /// Largest per-channel mean removed from the right-hand side.
  double rhs_mean_removed = 0.0;
  /// Gradient-matching energy 1/2 ||grad(x) - g||^2 per CG iterate, the
  /// initial guess first. Only filled when requested.
  std::vector<double> energy_history;
};

/// Solves laplacian_fe(x) = y with replicate (Neumann) boundaries by
/// diagonalizing the operator with the 2-D DCT-II. Each channel is solved
/// independently and anchored so mean(x_c) = anchor_mean.
///
/// A right-hand side whose mean exceeds 1e-8 * max|y| is incompatible with
/// the boundary condition; its mean is removed and the event is reported.
/// Throws InputError on non-finite input.
PoissonSolution solve_poisson_neumann(const Field& y, double anchor_mean);

struct CgOptions {
  double tol = 1e-8;
  std::size_t max_iter = 2000;
  bool track_energy = false;
};

/// Least-squares integration of a (possibly non-integrable) gradient field:
/// minimizes 1/2 ||forward_gradient(x) - g||^2 by conjugate gradients on
/// laplacian_lsq(x) = divergence_adjoint(g), starting from the constant
/// anchor_mean field. Converged when the relative normal-equation residual
/// drops to tol; otherwise the last iterate is returned with
/// converged = false. A divergence below 1e-13 * ||g|| is treated as zero
/// (the field is curl-only) and yields the constant anchor field.
PoissonSolution reconstruct_from_gradient(const GradientField& g, double anchor_mean,
                                          const CgOptions& options);
PoissonSolution reconstruct_from_gradient(const GradientField& g, double anchor_mean, double tol,
                                          std::size_t max_iter);

/// 1/2 ||forward_gradient(x) - g||^2.
double gradient_energy(const Field& x, const GradientField& g);

/// max |(x1 - x2) - mean(x1 - x2)| taken per channel: how far the difference
/// of two Neumann solutions is from a constant.
double greens_identity_check(const Field& x1, const Field& x2);

/// Shifts each channel so its mean equals `target`.
Field anchor_channel_means(Field x, double target);

}  // namespace gddm
