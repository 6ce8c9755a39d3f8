#include "gddm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "gddm/error.hpp"

namespace gddm {
namespace {

// p log2(p / m), with 0 log 0 = 0.
inline double kl_term(double p, double m) { return p > 0.0 ? p * std::log2(p / m) : 0.0; }

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  return out;
}

// Shortest decimal form that round-trips, so CSV output is byte-stable.
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
  if (bins < 2) throw ParameterError("histogram needs at least 2 bins");
  if (!(lo < hi)) throw ParameterError("histogram needs lo < hi");
  if (values.empty()) throw DimensionError("histogram of empty field");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.bin_edges.resize(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) h.bin_edges[i] = lo + width * static_cast<double>(i);
  h.bin_edges[bins] = hi;

  std::vector<std::size_t> counts(bins, 0);
  std::size_t outside = 0;
  const double inv_width = static_cast<double>(bins) / (hi - lo);
  for (double v : values) {
    if (!(v >= lo && v < hi)) {
      ++outside;
      continue;
    }
    auto k = static_cast<std::size_t>((v - lo) * inv_width);
    k = std::min(k, bins - 1);
    // Snap to the stored edges so membership matches [edge_k, edge_k+1).
    if (v < h.bin_edges[k] && k > 0) --k;
    if (v >= h.bin_edges[k + 1] && k + 1 < bins) ++k;
    ++counts[k];
  }
  const double n = static_cast<double>(values.size());
  h.mass.resize(bins);
  for (std::size_t i = 0; i < bins; ++i) h.mass[i] = static_cast<double>(counts[i]) / n;
  h.out_of_range_mass = static_cast<double>(outside) / n;
  return h;
}

Histogram histogram(const Field& x, std::size_t bins, double lo, double hi) {
  if (x.empty()) throw DimensionError("histogram of empty field");
  return histogram(x.data(), bins, lo, hi);
}

double jsd(const Histogram& p, const Histogram& q) {
  if (p.bins() != q.bins() || p.lo != q.lo || p.hi != q.hi) {
    throw ShapeError("jsd: histograms use different binnings");
  }
  double s = 0.0;
  for (std::size_t i = 0; i <= p.bins(); ++i) {
    const double a = i < p.bins() ? p.mass[i] : p.out_of_range_mass;
    const double b = i < q.bins() ? q.mass[i] : q.out_of_range_mass;
    const double m = 0.5 * (a + b);
    s += kl_term(a, m) + kl_term(b, m);
  }
  return std::clamp(0.5 * s, 0.0, 1.0);
}

std::pair<double, double> default_histogram_range(DomainKind d) {
  const double s = noise_scale(d);
  return {-4.0 * s, 4.0 * s};
}

JsdMatrix jsd_matrix(std::span<const Histogram> hists, DomainKind domain) {
  if (hists.empty()) throw DimensionError("jsd_matrix: empty trajectory");
  JsdMatrix m;
  m.domain = domain;
  m.size = hists.size();
  m.values.assign(m.size * m.size, 0.0);
  for (std::size_t i = 0; i < m.size; ++i) {
    for (std::size_t j = i + 1; j < m.size; ++j) {
      const double v = jsd(hists[i], hists[j]);
      m.values[i * m.size + j] = v;
      m.values[j * m.size + i] = v;
    }
  }
  return m;
}

JsdMatrix jsd_matrix(const Trajectory& traj, std::size_t bins, double lo, double hi) {
  std::vector<Histogram> hists;
  hists.reserve(traj.states.size());
  for (const auto& x : traj.states) hists.push_back(histogram(x, bins, lo, hi));
  return jsd_matrix(hists, traj.domain);
}

ConvergenceReport convergence_report(std::span<const Histogram> hists, DomainKind domain, double tol) {
  if (!(tol > 0.0 && tol <= 1.0)) throw ParameterError("convergence tolerance must lie in (0, 1]");
  if (hists.empty()) throw DimensionError("convergence_report: empty trajectory");
  ConvergenceReport rep;
  rep.domain = domain;
  rep.tol = tol;
  const Histogram& terminal = hists.back();
  rep.jsd_to_terminal.resize(hists.size());
  for (std::size_t t = 0; t + 1 < hists.size(); ++t) rep.jsd_to_terminal[t] = jsd(hists[t], terminal);
  rep.jsd_to_terminal.back() = 0.0;

  std::size_t tc = hists.size() - 1;
  while (tc > 0 && rep.jsd_to_terminal[tc - 1] <= tol) --tc;
  rep.t_converge = static_cast<int>(tc);
  return rep;
}

ConvergenceReport convergence_report(const Trajectory& traj, double tol, std::size_t bins, double lo,
                                     double hi) {
  std::vector<Histogram> hists;
  hists.reserve(traj.states.size());
  for (const auto& x : traj.states) hists.push_back(histogram(x, bins, lo, hi));
  return convergence_report(hists, traj.domain, tol);
}

std::vector<Histogram> trajectory_histograms(const Field& x0, const Schedule& s, Rng& rng, DomainKind d,
                                             std::size_t bins, double lo, double hi) {
  std::vector<Histogram> hists;
  hists.reserve(static_cast<std::size_t>(s.steps()) + 1);
  forward_iterative_visit(x0, s, rng, d,
                          [&](int, const Field& x) { hists.push_back(histogram(x, bins, lo, hi)); });
  return hists;
}

SparsityMetrics sparsity_metrics(const Field& x, double tau) {
  if (!(tau > 0.0)) throw ParameterError("sparsity tau must be positive");
  const auto near = std::count_if(x.data().begin(), x.data().end(),
                                  [tau](double v) { return std::abs(v) <= tau; });
  const FieldStats st = field_stats(x);
  return {static_cast<double>(near) / static_cast<double>(x.size()), st.excess_kurtosis};
}

double isotonic_violation(std::span<const double> seq) {
  // Pool-adjacent-violators: blocks of (sum, count) with non-decreasing means.
  struct Block {
    double sum;
    std::size_t count;
    double mean() const { return sum / static_cast<double>(count); }
  };
  std::vector<Block> blocks;
  for (double v : seq) {
    blocks.push_back({v, 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      const Block top = blocks.back();
      blocks.pop_back();
      blocks.back().sum += top.sum;
      blocks.back().count += top.count;
    }
  }
  double worst = 0.0;
  std::size_t i = 0;
  for (const auto& b : blocks) {
    for (std::size_t k = 0; k < b.count; ++k, ++i) worst = std::max(worst, std::abs(seq[i] - b.mean()));
  }
  return worst;
}

void write_series_csv(const std::filesystem::path& path, std::span<const double> values,
                      const char* value_name) {
  auto out = open_csv(path);
  out << "t," << value_name << '\n';
  for (std::size_t t = 0; t < values.size(); ++t) out << t << ',' << fmt(values[t]) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

void write_matrix_csv(const std::filesystem::path& path, const JsdMatrix& m) {
  auto out = open_csv(path);
  std::string line;
  for (std::size_t i = 0; i < m.size; ++i) {
    line.clear();
    for (std::size_t j = 0; j < m.size; ++j) {
      if (j > 0) line.push_back(',');
      line += fmt(m.at(i, j));
    }
    line.push_back('\n');
    out << line;
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace gddm
