#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gddm {

enum class ScheduleKind { Linear, Constant };

std::string to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(const std::string& name);

/// Noise schedule beta_t for t = 1..T with alpha_t = 1 - beta_t and the
/// running product gamma_t = alpha_1 * ... * alpha_t (gamma_0 = 1).
/// Immutable after construction.
class Schedule {
 public:
  ScheduleKind kind() const noexcept { return kind_; }
  int steps() const noexcept { return static_cast<int>(beta_.size()); }
  double beta_start() const noexcept { return beta_start_; }
  double beta_end() const noexcept { return beta_end_; }

  /// 1 <= t <= T; unchecked.
  double beta(int t) const noexcept { return beta_[static_cast<std::size_t>(t - 1)]; }
  double alpha(int t) const noexcept { return alpha_[static_cast<std::size_t>(t - 1)]; }
  /// 0 <= t <= T; unchecked.
  double gamma(int t) const noexcept { return gamma_[static_cast<std::size_t>(t)]; }

  /// gamma_0..gamma_T (T + 1 entries).
  std::span<const double> gammas() const noexcept { return gamma_; }
  std::span<const double> betas() const noexcept { return beta_; }

  friend Schedule make_schedule(ScheduleKind, int, double, double);

 private:
  Schedule() = default;
  ScheduleKind kind_ = ScheduleKind::Linear;
  double beta_start_ = 0.0;
  double beta_end_ = 0.0;
  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> gamma_;
};

/// Linear: beta interpolates beta_start..beta_end inclusively over T steps.
/// Constant: beta_t = beta_start (beta_end is ignored).
/// Throws ParameterError for T < 1, betas outside (0, 1), beta_start >
/// beta_end (linear), or a product that underflows to zero.
Schedule make_schedule(ScheduleKind kind, int steps, double beta_start, double beta_end);

/// The default schedule: linear, T = 1000, beta from 1e-4 to 0.02.
Schedule default_schedule();

/// gamma_t with bounds checking (IndexError outside 0..T).
double gamma_at(const Schedule& s, int t);

/// Throws IndexError unless lo <= t <= T.
void check_timestep(const Schedule& s, int t, int lo = 0);

}  // namespace gddm
