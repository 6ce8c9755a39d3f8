#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gddm/field.hpp"
#include "gddm/rng.hpp"
#include "gddm/schedule.hpp"

namespace gddm {

/// Representation the diffusion runs in.
enum class DomainKind { Image, Gradient, Laplacian };

std::string to_string(DomainKind d);
DomainKind parse_domain(const std::string& name);
inline constexpr DomainKind kAllDomains[] = {DomainKind::Image, DomainKind::Gradient,
                                             DomainKind::Laplacian};

/// Per-pixel standard deviation of unit white noise mapped into the domain:
/// 1 for images, sqrt(2) for forward differences, sqrt(5)/2 for the FE
/// Laplacian.
double noise_scale(DomainKind d);

/// Maps an image into domain d: identity, packed forward gradient (2C
/// channels) or laplacian_fe.
Field to_domain(const Field& image, DomainKind d);

/// Channel count of a domain field built from an image with `image_channels`.
std::size_t domain_channels(DomainKind d, std::size_t image_channels);

/// Noise predictor eps(x_t, t). Implementations must be safe for concurrent
/// read-only calls.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  virtual Field predict(const Field& xt, int t, const Schedule& s, DomainKind d) const = 0;
};

/// Always predicts zero noise.
class ZeroPredictor final : public NoisePredictor {
 public:
  Field predict(const Field& xt, int, const Schedule&, DomainKind) const override {
    return Field(xt.shape(), 0.0);
  }
};

/// sqrt(gamma_t) * x0 + noise_scale(d) * sqrt(1 - gamma_t) * eps.
Field forward_closed_form(const Field& x0, int t, const Field& eps, const Schedule& s, DomainKind d);

/// Clean-field estimate implied by a noise prediction:
/// (x_t - noise_scale(d) * sqrt(1 - gamma_t) * eps_hat) / sqrt(gamma_t).
Field predicted_clean(const Field& xt, const Field& eps_hat, int t, const Schedule& s, DomainKind d);

struct Trajectory {
  DomainKind domain = DomainKind::Image;
  Schedule schedule;
  std::vector<Field> states;  // t = 0..T
};

/// Runs the one-step recursion
///   x_t = sqrt(1 - beta_t) x_{t-1} + noise_scale(d) sqrt(beta_t) eps_{t-1}
/// with fresh unit noise each step, calling visit(t, x_t) for t = 0..T.
/// Nothing but the current state is kept in memory.
void forward_iterative_visit(const Field& x0, const Schedule& s, Rng& rng, DomainKind d,
                             const std::function<void(int, const Field&)>& visit);

/// Full trajectory of the recursion above; states[0] is x0 bit-exact.
Trajectory forward_iterative(const Field& x0, const Schedule& s, Rng& rng, DomainKind d);

/// One ancestral step x_t -> x_{t-1}:
///   (x_t - beta_t / sqrt(1 - gamma_t) * scale * eps_hat) / sqrt(alpha_t)
/// plus scale * sqrt(beta_t) * z when stochastic and t > 1. Throws
/// IndexError for t < 1.
Field reverse_step(const Field& xt, int t, const NoisePredictor& predictor, const Schedule& s,
                   DomainKind d, bool stochastic, Rng& rng);

/// Starts from N(0, noise_scale(d)^2) and applies reverse_step for t = T..1.
/// The result lives in domain d.
Field sample(const NoisePredictor& predictor, const Schedule& s, const Shape& shape, DomainKind d,
             bool stochastic, Rng& rng);

}  // namespace gddm
