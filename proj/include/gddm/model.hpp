#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gddm/diffusion.hpp"
#include "gddm/error.hpp"
#include "gddm/field.hpp"
#include "gddm/rng.hpp"
#include "gddm/schedule.hpp"

namespace gddm {

/// Exact posterior mean of the injected unit noise when every clean entry
/// is i.i.d. N(mu, var0) in the working domain:
///
///   eps_hat = scale * sqrt(1 - g) * (x_t - sqrt(g) * mu) / (g * var0 + scale^2 * (1 - g))
///
/// with g = gamma_t and scale = noise_scale(d).
class AnalyticGaussianOracle final : public NoisePredictor {
 public:
  AnalyticGaussianOracle(double mu, double var0);
  double mu() const noexcept { return mu_; }
  double var0() const noexcept { return var0_; }
  /// Throws DegenerateError when var0 = 0 and gamma_t = 1.
  Field predict(const Field& xt, int t, const Schedule& s, DomainKind d) const override;

 private:
  double mu_;
  double var0_;
};

inline Field oracle_predict(const AnalyticGaussianOracle& o, const Field& xt, int t, const Schedule& s,
                            DomainKind d) {
  return o.predict(xt, t, s, d);
}

struct TinyConvNetConfig {
  /// Channels of the field fed to the net (excluding conditioning planes).
  std::size_t data_channels = 1;
  /// Output channels; 0 means "same as data_channels".
  std::size_t out_channels = 0;
  std::size_t width = 16;
  /// Append the constant planes sqrt(gamma_t) and sqrt(1 - gamma_t).
  bool time_conditioning = true;
  std::uint64_t seed = 0;
};

/// Three 3x3 convolutions with replicate padding and tanh between them.
///
/// All parameters live in one flat vector, tensor by tensor:
/// w1 b1 w2 b2 w3 b3. Weights are laid out [out][ky][kx][in]. Hidden layers
/// start uniform in +-1/sqrt(fan_in); the last layer starts at zero so an
/// untrained net predicts zero.
class TinyConvNet final : public NoisePredictor {
 public:
  static constexpr const char* kArchitecture = "tinyconv3";
  static constexpr std::size_t kLayers = 3;

  struct Tensor {
    std::string name;
    std::size_t offset;
    std::size_t size;
  };

  explicit TinyConvNet(const TinyConvNetConfig& config);

  const TinyConvNetConfig& config() const noexcept { return config_; }
  std::size_t input_channels() const noexcept;
  std::size_t output_channels() const noexcept;
  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  const std::vector<Tensor>& tensors() const noexcept { return tensors_; }

  Field predict(const Field& xt, int t, const Schedule& s, DomainKind d) const override;

 private:
  TinyConvNetConfig config_;
  std::vector<double> params_;
  std::vector<Tensor> tensors_;
};

/// Per-parameter gradients in the same flat layout as TinyConvNet::parameters().
using ParameterGradients = std::vector<double>;

/// Forward pass with the time-conditioning planes for step t appended.
Field net_forward(const TinyConvNet& net, const Field& xt, int t, const Schedule& s);
/// Exact reverse-mode gradients of <net_forward(xt), upstream> with respect
/// to every parameter.
ParameterGradients net_backward(const TinyConvNet& net, const Field& xt, int t, const Schedule& s,
                                const Field& upstream);

/// Forward/backward on an input that already carries every channel the net
/// expects (no conditioning planes are added).
Field net_forward_input(const TinyConvNet& net, const Field& input);
ParameterGradients net_backward_input(const TinyConvNet& net, const Field& input, const Field& upstream);

/// Direct (linear) map from a domain field to a zero-mean image, together
/// with its adjoint. Laplacian fields go through the spectral Neumann
/// solver; gradient fields through the spectral solve of the normal
/// equations.
class PoissonReconstructor {
 public:
  /// Image whose channel means equal `anchor`.
  Field reconstruct(const Field& domain_field, DomainKind d, double anchor) const;
  /// Linear part R: domain field -> zero-mean image.
  Field apply(const Field& domain_field, DomainKind d) const;
  /// R^T: image-shaped field -> domain field.
  Field apply_adjoint(const Field& image, DomainKind d) const;
};

/// Which differential operator the guided penalty compares reconstructions
/// under: forward gradient (as printed for both models) or the FE Laplacian.
enum class PenaltyKind { Gradient, Laplacian };

std::string to_string(PenaltyKind k);
PenaltyKind parse_penalty_kind(const std::string& name);

struct LossConfig {
  double lambda = 0.0;
  PenaltyKind penalty = PenaltyKind::Gradient;
  std::size_t batch_size = 8;
  std::size_t log_every = 50;
  /// Monte Carlo draws of (t, eps) per batch element in loss_eval.
  std::size_t draws_per_field = 1;
  /// train(): largest global norm of the batch-mean gradient, 0 = no clipping.
  double grad_clip = 0.0;
};

struct LossValue {
  double total = 0.0;
  double noise = 0.0;    // mean squared error between eps and its prediction
  double penalty = 0.0;  // unweighted guided term, 0 when lambda = 0
};

/// Monte Carlo estimate of the denoising loss: per draw t ~ U{1..T},
/// eps ~ N(0, 1), x_t = forward_closed_form(x0, t, eps), error averaged per
/// element. With lambda > 0 adds lambda * mean((D x_rec - D x)^2), where
/// x_rec is the image reconstructed from the predicted clean field and D is
/// the penalty operator. Throws ConfigError when lambda > 0 and no
/// reconstructor is given.
LossValue loss_eval(const NoisePredictor& predictor, std::span<const Field> batch, const Schedule& s,
                    DomainKind d, Rng& rng, const LossConfig& config,
                    const PoissonReconstructor* reconstructor = nullptr);

/// Same estimate with t held fixed (one stratum).
LossValue loss_at_timestep(const NoisePredictor& predictor, std::span<const Field> batch, int t,
                           const Schedule& s, DomainKind d, Rng& rng, const LossConfig& config,
                           const PoissonReconstructor* reconstructor = nullptr);

/// loss_eval for a TinyConvNet together with the exact gradient of the
/// returned total with respect to every parameter. Uses the same draws as
/// loss_eval for an equal rng state.
LossValue loss_gradient(const TinyConvNet& net, std::span<const Field> batch, const Schedule& s, DomainKind d,
                        Rng& rng, const LossConfig& config, ParameterGradients& grads,
                        const PoissonReconstructor* reconstructor = nullptr);

struct TrainReport {
  /// Mean training loss over each logging interval.
  std::vector<double> loss_curve;
  std::vector<double> noise_curve;
  std::vector<double> penalty_curve;
  /// Step count at the end of each logged interval.
  std::vector<long> logged_steps;
  double final_loss = 0.0;
  long steps = 0;
  std::uint64_t seed = 0;
};

/// Training stopped on a non-finite loss; carries everything logged so far.
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& what, long step, double last_finite, TrainReport partial)
      : DivergenceError(what, step, last_finite), report_(std::move(partial)) {}
  const TrainReport& report() const noexcept { return report_; }

 private:
  TrainReport report_;
};

/// Plain SGD on the denoising loss. Every step draws batch_size fields with
/// replacement, one (t, eps) per field, and applies params -= lr * grad.
/// Fully determined by the rng state. Dataset entries must already live in
/// domain d.
TrainReport train(TinyConvNet& net, std::span<const Field> dataset, const Schedule& s, DomainKind d,
                  const LossConfig& config, double lr, long steps, Rng& rng,
                  const PoissonReconstructor* reconstructor = nullptr);

/// Zero-mean image predicted by a reconstructor net from a domain field.
Field reconstructor_predict(const TinyConvNet& net, const Field& domain_field);

/// Supervised training of a net mapping a perturbed differential field
/// (to_domain(image, d) + N(0, level^2), level drawn from noise_levels) to
/// the zero-mean image. The net must be built with data_channels equal to
/// the domain channel count, out_channels equal to the image channels and
/// time_conditioning off.
TrainReport train_reconstructor(TinyConvNet& net, std::span<const Field> images, DomainKind d,
                                std::span<const double> noise_levels, Rng& rng, double lr, long steps,
                                std::size_t batch_size = 8, std::size_t log_every = 50);

/// Mean squared error of the reconstructor against zero-mean targets, with
/// inputs perturbed at `noise_level`.
double reconstructor_mse(const TinyConvNet& net, std::span<const Field> images, DomainKind d,
                         double noise_level, Rng& rng);

/// Writes <stem>.bin (little-endian float64 parameters) and <stem>.json
/// {architecture, channels, out_channels, width, time_conditioning, seed,
/// step, parameter_count}.
void save_checkpoint(const TinyConvNet& net, const std::filesystem::path& stem, long step);
TinyConvNet load_checkpoint(const std::filesystem::path& stem, long* step = nullptr);

}  // namespace gddm
