#include "gddm/schedule.hpp"

#include <cmath>

#include "gddm/error.hpp"

namespace gddm {

std::string to_string(ScheduleKind kind) { return kind == ScheduleKind::Linear ? "linear" : "constant"; }

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "linear") return ScheduleKind::Linear;
  if (name == "constant") return ScheduleKind::Constant;
  throw ParameterError("unknown schedule kind '" + name + "' (expected linear|constant)");
}

Schedule make_schedule(ScheduleKind kind, int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ParameterError("schedule needs T >= 1");
  auto in_open_unit = [](double b) { return b > 0.0 && b < 1.0; };
  if (!in_open_unit(beta_start)) throw ParameterError("beta_start must lie in (0, 1)");
  if (kind == ScheduleKind::Linear) {
    if (!in_open_unit(beta_end)) throw ParameterError("beta_end must lie in (0, 1)");
    if (beta_start > beta_end) throw ParameterError("beta_start must not exceed beta_end");
  }

  Schedule s;
  s.kind_ = kind;
  s.beta_start_ = beta_start;
  s.beta_end_ = kind == ScheduleKind::Linear ? beta_end : beta_start;
  const auto n = static_cast<std::size_t>(steps);
  s.beta_.resize(n);
  s.alpha_.resize(n);
  s.gamma_.resize(n + 1);
  s.gamma_[0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    double b = beta_start;
    if (kind == ScheduleKind::Linear && n > 1) {
      b = beta_start + (beta_end - beta_start) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    s.beta_[i] = b;
    s.alpha_[i] = 1.0 - b;
    s.gamma_[i + 1] = s.gamma_[i] * s.alpha_[i];
  }
  if (!(s.gamma_[n] > 0.0)) throw ParameterError("schedule product gamma_T underflows to zero");
  return s;
}

Schedule default_schedule() { return make_schedule(ScheduleKind::Linear, 1000, 1e-4, 0.02); }

void check_timestep(const Schedule& s, int t, int lo) {
  if (t < lo || t > s.steps()) {
    throw IndexError("timestep " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                     std::to_string(s.steps()) + "]");
  }
}

double gamma_at(const Schedule& s, int t) {
  check_timestep(s, t);
  return s.gamma(t);
}

}  // namespace gddm
