#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "gddm/diffusion.hpp"
#include "gddm/field.hpp"

namespace gddm {

/// Uniform histogram over [lo, hi) normalized by the total count. Values
/// outside the range (and non-finite values) go to out_of_range_mass.
struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> bin_edges;  // bins + 1 entries
  std::vector<double> mass;       // bins entries
  double out_of_range_mass = 0.0;

  std::size_t bins() const noexcept { return mass.size(); }
};

/// Throws ParameterError for bins < 2 or lo >= hi, DimensionError for an
/// empty field.
Histogram histogram(const Field& x, std::size_t bins, double lo, double hi);
Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi);

/// Base-2 Jensen-Shannon divergence with 0 log 0 = 0; the out-of-range mass
/// acts as one extra shared bin. Result lies in [0, 1]. Throws ShapeError
/// when the binnings differ.
double jsd(const Histogram& p, const Histogram& q);

/// Default histogram range for a domain: +-4 noise_scale(d).
std::pair<double, double> default_histogram_range(DomainKind d);
inline constexpr std::size_t kDefaultBins = 128;

/// Pairwise JSD between per-timestep histograms, (T+1) x (T+1), row-major.
struct JsdMatrix {
  DomainKind domain = DomainKind::Image;
  std::size_t size = 0;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const noexcept { return values[i * size + j]; }
};

JsdMatrix jsd_matrix(std::span<const Histogram> hists, DomainKind domain);
JsdMatrix jsd_matrix(const Trajectory& traj, std::size_t bins, double lo, double hi);

struct ConvergenceReport {
  DomainKind domain = DomainKind::Image;
  /// Smallest t such that every t' >= t is within tol of the terminal state.
  int t_converge = 0;
  double tol = 0.0;
  std::vector<double> jsd_to_terminal;  // T + 1 entries
};

/// Throws ParameterError unless 0 < tol <= 1 (tol = 1 is accepted as the
/// trivially satisfied bound).
ConvergenceReport convergence_report(std::span<const Histogram> hists, DomainKind domain, double tol);
ConvergenceReport convergence_report(const Trajectory& traj, double tol, std::size_t bins, double lo,
                                     double hi);

/// Histogram of every state of a forward_iterative run, computed on the fly.
std::vector<Histogram> trajectory_histograms(const Field& x0, const Schedule& s, Rng& rng, DomainKind d,
                                             std::size_t bins, double lo, double hi);

struct SparsityMetrics {
  double fraction_near_zero = 0.0;
  double excess_kurtosis = 0.0;
};

/// Fraction of entries with |x| <= tau and the excess kurtosis of x.
SparsityMetrics sparsity_metrics(const Field& x, double tau);

/// Largest absolute deviation of a sequence from its least-squares
/// non-decreasing fit (pool-adjacent-violators).
double isotonic_violation(std::span<const double> seq);

/// (t, value) rows with a header line.
void write_series_csv(const std::filesystem::path& path, std::span<const double> values,
                      const char* value_name = "value");
/// Dense matrix, one row per line.
void write_matrix_csv(const std::filesystem::path& path, const JsdMatrix& m);

}  // namespace gddm
