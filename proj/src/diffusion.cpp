#include "gddm/diffusion.hpp"

#include <cmath>

#include "gddm/diffops.hpp"
#include "gddm/error.hpp"

namespace gddm {

std::string to_string(DomainKind d) {
  switch (d) {
    case DomainKind::Image:
      return "image";
    case DomainKind::Gradient:
      return "gradient";
    case DomainKind::Laplacian:
      return "laplacian";
  }
  return "unknown";
}

DomainKind parse_domain(const std::string& name) {
  if (name == "image") return DomainKind::Image;
  if (name == "gradient") return DomainKind::Gradient;
  if (name == "laplacian") return DomainKind::Laplacian;
  throw ParameterError("unknown domain '" + name + "' (expected image|gradient|laplacian)");
}

double noise_scale(DomainKind d) {
  switch (d) {
    case DomainKind::Image:
      return 1.0;
    case DomainKind::Gradient:
      return std::sqrt(2.0);
    case DomainKind::Laplacian:
      return std::sqrt(5.0) / 2.0;
  }
  return 1.0;
}

Field to_domain(const Field& image, DomainKind d) {
  switch (d) {
    case DomainKind::Image:
      return image;
    case DomainKind::Gradient:
      return pack_gradient(forward_gradient(image));
    case DomainKind::Laplacian:
      return laplacian_fe(image);
  }
  return image;
}

std::size_t domain_channels(DomainKind d, std::size_t image_channels) {
  return d == DomainKind::Gradient ? 2 * image_channels : image_channels;
}

Field forward_closed_form(const Field& x0, int t, const Field& eps, const Schedule& s, DomainKind d) {
  require_same_shape(x0, eps, "forward_closed_form");
  check_timestep(s, t);
  const double g = s.gamma(t);
  const double signal = std::sqrt(g);
  const double noise = noise_scale(d) * std::sqrt(1.0 - g);
  Field out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = signal * x0[i] + noise * eps[i];
  return out;
}

Field predicted_clean(const Field& xt, const Field& eps_hat, int t, const Schedule& s, DomainKind d) {
  require_same_shape(xt, eps_hat, "predicted_clean");
  check_timestep(s, t);
  const double g = s.gamma(t);
  const double inv_signal = 1.0 / std::sqrt(g);
  const double noise = noise_scale(d) * std::sqrt(1.0 - g);
  Field out(xt.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (xt[i] - noise * eps_hat[i]) * inv_signal;
  return out;
}

void forward_iterative_visit(const Field& x0, const Schedule& s, Rng& rng, DomainKind d,
                             const std::function<void(int, const Field&)>& visit) {
  const double scale = noise_scale(d);
  Field x = x0;
  Field eps(x0.shape());
  visit(0, x);
  for (int t = 1; t <= s.steps(); ++t) {
    const double keep = std::sqrt(s.alpha(t));
    const double add = scale * std::sqrt(s.beta(t));
    rng.fill_normal(eps.data());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = keep * x[i] + add * eps[i];
    visit(t, x);
  }
}

Trajectory forward_iterative(const Field& x0, const Schedule& s, Rng& rng, DomainKind d) {
  Trajectory traj{d, s, {}};
  traj.states.reserve(static_cast<std::size_t>(s.steps()) + 1);
  forward_iterative_visit(x0, s, rng, d, [&](int, const Field& x) { traj.states.push_back(x); });
  return traj;
}

Field reverse_step(const Field& xt, int t, const NoisePredictor& predictor, const Schedule& s,
                   DomainKind d, bool stochastic, Rng& rng) {
  check_timestep(s, t, 1);
  const Field eps_hat = predictor.predict(xt, t, s, d);
  require_same_shape(xt, eps_hat, "reverse_step predictor output");
  const double scale = noise_scale(d);
  const double beta = s.beta(t);
  const double inv_keep = 1.0 / std::sqrt(s.alpha(t));
  const double coef = beta / std::sqrt(1.0 - s.gamma(t)) * scale;
  Field out(xt.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = inv_keep * (xt[i] - coef * eps_hat[i]);
  if (stochastic && t > 1) {
    Field z(xt.shape());
    rng.fill_normal(z.data(), scale * std::sqrt(beta));
    out += z;
  }
  return out;
}

Field sample(const NoisePredictor& predictor, const Schedule& s, const Shape& shape, DomainKind d,
             bool stochastic, Rng& rng) {
  Field x = sample_gaussian(shape, noise_scale(d), rng);
  for (int t = s.steps(); t >= 1; --t) x = reverse_step(x, t, predictor, s, d, stochastic, rng);
  return x;
}

}  // namespace gddm
