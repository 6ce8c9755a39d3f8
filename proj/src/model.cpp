#include "gddm/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "gddm/diffops.hpp"
#include "gddm/image_io.hpp"
#include "gddm/poisson.hpp"

namespace gddm {
namespace {

struct ConvView {
  const double* w;
  const double* b;
  std::size_t cin;
  std::size_t cout;
};

struct ConvGrad {
  double* w;
  double* b;
};

inline std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
  if (i < 0) return 0;
  if (static_cast<std::size_t>(i) >= n) return n - 1;
  return static_cast<std::size_t>(i);
}

const double* pixel(const Field& f, std::size_t u, std::size_t v) {
  return f.data().data() + (u * f.width() + v) * f.channels();
}
double* pixel(Field& f, std::size_t u, std::size_t v) {
  return f.data().data() + (u * f.width() + v) * f.channels();
}

void conv3x3(const Field& in, const ConvView& L, Field& out) {
  const std::size_t h = in.height(), w = in.width();
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      double* o = pixel(out, u, v);
      for (std::size_t oc = 0; oc < L.cout; ++oc) o[oc] = L.b[oc];
      for (std::size_t ky = 0; ky < 3; ++ky) {
        const std::size_t uu = clamp_index(static_cast<std::ptrdiff_t>(u + ky) - 1, h);
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const std::size_t vv = clamp_index(static_cast<std::ptrdiff_t>(v + kx) - 1, w);
          const double* x = pixel(in, uu, vv);
          for (std::size_t oc = 0; oc < L.cout; ++oc) {
            const double* wk = L.w + ((oc * 3 + ky) * 3 + kx) * L.cin;
            double s = 0.0;
            for (std::size_t c = 0; c < L.cin; ++c) s += wk[c] * x[c];
            o[oc] += s;
          }
        }
      }
    }
  }
}

// Accumulates parameter gradients into g and, when gin is non-null, the
// gradient with respect to the layer input.
void conv3x3_backward(const Field& in, const ConvView& L, const Field& gout, const ConvGrad& g, Field* gin) {
  const std::size_t h = in.height(), w = in.width();
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      const double* go = pixel(gout, u, v);
      for (std::size_t oc = 0; oc < L.cout; ++oc) g.b[oc] += go[oc];
      for (std::size_t ky = 0; ky < 3; ++ky) {
        const std::size_t uu = clamp_index(static_cast<std::ptrdiff_t>(u + ky) - 1, h);
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const std::size_t vv = clamp_index(static_cast<std::ptrdiff_t>(v + kx) - 1, w);
          const double* x = pixel(in, uu, vv);
          double* gx = gin != nullptr ? pixel(*gin, uu, vv) : nullptr;
          for (std::size_t oc = 0; oc < L.cout; ++oc) {
            const double gval = go[oc];
            const std::size_t off = ((oc * 3 + ky) * 3 + kx) * L.cin;
            double* gwk = g.w + off;
            for (std::size_t c = 0; c < L.cin; ++c) gwk[c] += gval * x[c];
            if (gx != nullptr) {
              const double* wk = L.w + off;
              for (std::size_t c = 0; c < L.cin; ++c) gx[c] += gval * wk[c];
            }
          }
        }
      }
    }
  }
}

struct LayerShape {
  std::size_t cin;
  std::size_t cout;
};

std::array<LayerShape, 3> layer_shapes(const TinyConvNet& net) {
  const std::size_t width = net.config().width;
  return {LayerShape{net.input_channels(), width}, LayerShape{width, width},
          LayerShape{width, net.output_channels()}};
}

ConvView layer_view(const TinyConvNet& net, std::size_t l) {
  const auto shapes = layer_shapes(net);
  const auto& tw = net.tensors()[2 * l];
  const auto& tb = net.tensors()[2 * l + 1];
  const double* p = net.parameters().data();
  return ConvView{p + tw.offset, p + tb.offset, shapes[l].cin, shapes[l].cout};
}

struct ForwardCache {
  Field a0;  // input incl. conditioning
  Field a1;  // tanh(conv1)
  Field a2;  // tanh(conv2)
  Field out;
};

void apply_tanh(Field& x) {
  for (auto& v : x.data()) v = std::tanh(v);
}

ForwardCache forward_cached(const TinyConvNet& net, Field input) {
  if (input.channels() != net.input_channels()) {
    throw ShapeError("TinyConvNet: expected " + std::to_string(net.input_channels()) +
                     " input channels, got " + std::to_string(input.channels()));
  }
  const std::size_t h = input.height(), w = input.width(), width = net.config().width;
  ForwardCache c;
  c.a0 = std::move(input);
  c.a1 = Field(Shape{h, w, width});
  conv3x3(c.a0, layer_view(net, 0), c.a1);
  apply_tanh(c.a1);
  c.a2 = Field(Shape{h, w, width});
  conv3x3(c.a1, layer_view(net, 1), c.a2);
  apply_tanh(c.a2);
  c.out = Field(Shape{h, w, net.output_channels()});
  conv3x3(c.a2, layer_view(net, 2), c.out);
  return c;
}

void backward_cached(const TinyConvNet& net, const ForwardCache& c, const Field& upstream,
                     ParameterGradients& grads) {
  require_same_shape(c.out, upstream, "net_backward upstream");
  const auto& tensors = net.tensors();
  auto grad_of = [&](std::size_t l) {
    return ConvGrad{grads.data() + tensors[2 * l].offset, grads.data() + tensors[2 * l + 1].offset};
  };
  Field g2(c.a2.shape(), 0.0);
  conv3x3_backward(c.a2, layer_view(net, 2), upstream, grad_of(2), &g2);
  for (std::size_t i = 0; i < g2.size(); ++i) g2[i] *= 1.0 - c.a2[i] * c.a2[i];
  Field g1(c.a1.shape(), 0.0);
  conv3x3_backward(c.a1, layer_view(net, 1), g2, grad_of(1), &g1);
  for (std::size_t i = 0; i < g1.size(); ++i) g1[i] *= 1.0 - c.a1[i] * c.a1[i];
  conv3x3_backward(c.a0, layer_view(net, 0), g1, grad_of(0), nullptr);
}

Field conditioned_input(const TinyConvNet& net, const Field& xt, int t, const Schedule& s) {
  if (xt.channels() != net.config().data_channels) {
    throw ShapeError("TinyConvNet: expected " + std::to_string(net.config().data_channels) +
                     " data channels, got " + std::to_string(xt.channels()));
  }
  if (!net.config().time_conditioning) return xt;
  check_timestep(s, t);
  const double g = s.gamma(t);
  const Shape plane{xt.height(), xt.width(), 1};
  const std::array<Field, 3> parts{xt, Field(plane, std::sqrt(g)), Field(plane, std::sqrt(1.0 - g))};
  return stack_channels(parts);
}

Field remove_channel_means(Field x) { return anchor_channel_means(std::move(x), 0.0); }

// Applies the penalty operator D or its adjoint to an image-shaped field.
Field penalty_op(const Field& img, PenaltyKind k) {
  return k == PenaltyKind::Gradient ? pack_gradient(forward_gradient(img)) : laplacian_fe(img);
}

Field penalty_op_adjoint(const Field& p, PenaltyKind k) {
  return k == PenaltyKind::Gradient ? divergence_adjoint(unpack_gradient(p)) : laplacian_fe(p);
}

struct DrawResult {
  LossValue value;
  Field dpred;  // d(total)/d(eps_hat)
};

// Loss of one (x0, t, eps) draw. The guided term uses linearity of the
// reconstruction: with e = eps - eps_hat and k = scale * sqrt(1 - g) / sqrt(g),
// x_rec - x = k * R(e) up to a constant, which D annihilates.
DrawResult evaluate_draw(const Field& eps, const Field& eps_hat, int t, const Schedule& s, DomainKind d,
                         const LossConfig& cfg, const PoissonReconstructor* recon, bool need_grad) {
  DrawResult r;
  const double n = static_cast<double>(eps.size());
  Field e = eps - eps_hat;
  double sq = 0.0;
  for (double v : e.data()) sq += v * v;
  r.value.noise = sq / n;
  if (need_grad) r.dpred = (-2.0 / n) * e;

  if (cfg.lambda > 0.0) {
    const double g = s.gamma(t);
    const double k = noise_scale(d) * std::sqrt(1.0 - g) / std::sqrt(g);
    const Field img_err = recon->apply(e, d);
    const Field p = penalty_op(img_err, cfg.penalty);
    const double m = static_cast<double>(p.size());
    double psq = 0.0;
    for (double v : p.data()) psq += v * v;
    r.value.penalty = k * k * psq / m;
    if (need_grad) {
      Field back = recon->apply_adjoint(penalty_op_adjoint(p, cfg.penalty), d);
      const double coef = -2.0 * k * k / m * cfg.lambda;
      for (std::size_t i = 0; i < back.size(); ++i) r.dpred[i] += coef * back[i];
    }
  }
  r.value.total = r.value.noise + cfg.lambda * r.value.penalty;
  return r;
}

void check_loss_config(const LossConfig& cfg, const PoissonReconstructor* recon) {
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) throw ParameterError("lambda must be >= 0");
  if (!(cfg.grad_clip >= 0.0)) throw ParameterError("grad_clip must be >= 0");
  if (cfg.lambda > 0.0 && recon == nullptr) {
    throw ConfigError("guided loss (lambda > 0) needs a reconstructor");
  }
}

LossValue loss_impl(const NoisePredictor& predictor, std::span<const Field> batch, int fixed_t,
                    const Schedule& s, DomainKind d, Rng& rng, const LossConfig& cfg,
                    const PoissonReconstructor* recon) {
  check_loss_config(cfg, recon);
  if (batch.empty()) throw ParameterError("loss_eval: empty batch");
  const std::size_t draws = std::max<std::size_t>(1, cfg.draws_per_field);
  LossValue acc;
  std::size_t count = 0;
  for (const Field& x0 : batch) {
    for (std::size_t k = 0; k < draws; ++k) {
      const int t = fixed_t > 0 ? fixed_t : static_cast<int>(rng.uniform_int(1, s.steps()));
      const Field eps = sample_gaussian(x0.shape(), 1.0, rng);
      const Field xt = forward_closed_form(x0, t, eps, s, d);
      const Field eps_hat = predictor.predict(xt, t, s, d);
      require_same_shape(eps, eps_hat, "loss_eval predictor output");
      const auto r = evaluate_draw(eps, eps_hat, t, s, d, cfg, recon, false);
      acc.total += r.value.total;
      acc.noise += r.value.noise;
      acc.penalty += r.value.penalty;
      ++count;
    }
  }
  const double inv = 1.0 / static_cast<double>(count);
  return LossValue{acc.total * inv, acc.noise * inv, acc.penalty * inv};
}

struct IntervalLog {
  double total = 0.0, noise = 0.0, penalty = 0.0;
  long n = 0;

  void flush(TrainReport& rep, long step) {
    if (n == 0) return;
    rep.loss_curve.push_back(total / n);
    rep.noise_curve.push_back(noise / n);
    rep.penalty_curve.push_back(penalty / n);
    rep.logged_steps.push_back(step);
    *this = {};
  }
};

void check_train_args(double lr, long steps, std::size_t batch_size) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ParameterError("learning rate must be positive");
  if (steps < 1) throw ParameterError("training needs steps >= 1");
  if (batch_size < 1) throw ParameterError("batch size must be >= 1");
}

// Rescales the step so ||scale * grads|| <= lr * clip when clip > 0.
void sgd_update(TinyConvNet& net, const ParameterGradients& grads, double scale, double lr = 0.0,
                double clip = 0.0) {
  if (clip > 0.0) {
    double sq = 0.0;
    for (double g : grads) sq += g * g;
    const double norm = scale * std::sqrt(sq);
    if (norm > lr * clip) scale *= lr * clip / norm;
  }
  auto p = net.parameters();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= scale * grads[i];
}

}  // namespace

AnalyticGaussianOracle::AnalyticGaussianOracle(double mu, double var0) : mu_(mu), var0_(var0) {
  if (!(var0 >= 0.0) || !std::isfinite(var0) || !std::isfinite(mu)) {
    throw ParameterError("oracle needs finite mu and var0 >= 0");
  }
}

Field AnalyticGaussianOracle::predict(const Field& xt, int t, const Schedule& s, DomainKind d) const {
  check_timestep(s, t);
  const double g = s.gamma(t);
  const double scale = noise_scale(d);
  const double denom = g * var0_ + scale * scale * (1.0 - g);
  if (denom == 0.0) throw DegenerateError("oracle: var0 = 0 at gamma_t = 1 leaves the noise undetermined");
  const double gain = scale * std::sqrt(1.0 - g) / denom;
  const double centre = std::sqrt(g) * mu_;
  Field out(xt.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = gain * (xt[i] - centre);
  return out;
}

TinyConvNet::TinyConvNet(const TinyConvNetConfig& config) : config_(config) {
  if (config_.out_channels == 0) config_.out_channels = config_.data_channels;
  if (config_.data_channels == 0 || config_.width == 0) {
    throw ParameterError("TinyConvNet needs positive channel and width counts");
  }
  const auto shapes = layer_shapes(*this);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < kLayers; ++l) {
    const std::size_t wsize = shapes[l].cout * 9 * shapes[l].cin;
    tensors_.push_back({"w" + std::to_string(l + 1), offset, wsize});
    offset += wsize;
    tensors_.push_back({"b" + std::to_string(l + 1), offset, shapes[l].cout});
    offset += shapes[l].cout;
  }
  params_.assign(offset, 0.0);

  Rng rng(config_.seed);
  for (std::size_t l = 0; l + 1 < kLayers; ++l) {
    const double k = 1.0 / std::sqrt(static_cast<double>(9 * shapes[l].cin));
    for (std::size_t ti = 2 * l; ti <= 2 * l + 1; ++ti) {
      for (std::size_t i = 0; i < tensors_[ti].size; ++i) {
        params_[tensors_[ti].offset + i] = (2.0 * rng.uniform() - 1.0) * k;
      }
    }
  }
}

std::size_t TinyConvNet::input_channels() const noexcept {
  return config_.data_channels + (config_.time_conditioning ? 2 : 0);
}

std::size_t TinyConvNet::output_channels() const noexcept { return config_.out_channels; }

Field TinyConvNet::predict(const Field& xt, int t, const Schedule& s, DomainKind) const {
  return net_forward(*this, xt, t, s);
}

Field net_forward(const TinyConvNet& net, const Field& xt, int t, const Schedule& s) {
  return forward_cached(net, conditioned_input(net, xt, t, s)).out;
}

ParameterGradients net_backward(const TinyConvNet& net, const Field& xt, int t, const Schedule& s,
                                const Field& upstream) {
  const auto cache = forward_cached(net, conditioned_input(net, xt, t, s));
  ParameterGradients grads(net.parameter_count(), 0.0);
  backward_cached(net, cache, upstream, grads);
  return grads;
}

Field net_forward_input(const TinyConvNet& net, const Field& input) {
  return forward_cached(net, input).out;
}

ParameterGradients net_backward_input(const TinyConvNet& net, const Field& input, const Field& upstream) {
  const auto cache = forward_cached(net, input);
  ParameterGradients grads(net.parameter_count(), 0.0);
  backward_cached(net, cache, upstream, grads);
  return grads;
}

Field PoissonReconstructor::apply(const Field& domain_field, DomainKind d) const {
  switch (d) {
    case DomainKind::Image:
      return domain_field;
    case DomainKind::Laplacian:
      return solve_poisson_neumann(domain_field, 0.0).image;
    case DomainKind::Gradient: {
      // Normal equations laplacian_lsq(x) = div(g), with laplacian_lsq = -4 laplacian_fe.
      Field rhs = divergence_adjoint(unpack_gradient(domain_field));
      rhs *= -0.25;
      return solve_poisson_neumann(rhs, 0.0).image;
    }
  }
  return domain_field;
}

Field PoissonReconstructor::apply_adjoint(const Field& image, DomainKind d) const {
  switch (d) {
    case DomainKind::Image:
      return image;
    case DomainKind::Laplacian:
      // The pseudo-inverse of the symmetric FE Laplacian is symmetric.
      return solve_poisson_neumann(image, 0.0).image;
    case DomainKind::Gradient: {
      Field packed = pack_gradient(forward_gradient(solve_poisson_neumann(image, 0.0).image));
      packed *= -0.25;
      return packed;
    }
  }
  return image;
}

Field PoissonReconstructor::reconstruct(const Field& domain_field, DomainKind d, double anchor) const {
  return anchor_channel_means(apply(domain_field, d), anchor);
}

std::string to_string(PenaltyKind k) { return k == PenaltyKind::Gradient ? "gradient" : "laplacian"; }

PenaltyKind parse_penalty_kind(const std::string& name) {
  if (name == "gradient") return PenaltyKind::Gradient;
  if (name == "laplacian") return PenaltyKind::Laplacian;
  throw ParameterError("unknown penalty kind '" + name + "' (expected gradient|laplacian)");
}

LossValue loss_eval(const NoisePredictor& predictor, std::span<const Field> batch, const Schedule& s,
                    DomainKind d, Rng& rng, const LossConfig& config, const PoissonReconstructor* reconstructor) {
  return loss_impl(predictor, batch, 0, s, d, rng, config, reconstructor);
}

LossValue loss_at_timestep(const NoisePredictor& predictor, std::span<const Field> batch, int t,
                           const Schedule& s, DomainKind d, Rng& rng, const LossConfig& config,
                           const PoissonReconstructor* reconstructor) {
  check_timestep(s, t, 1);
  return loss_impl(predictor, batch, t, s, d, rng, config, reconstructor);
}

LossValue loss_gradient(const TinyConvNet& net, std::span<const Field> batch, const Schedule& s, DomainKind d,
                        Rng& rng, const LossConfig& config, ParameterGradients& grads,
                        const PoissonReconstructor* reconstructor) {
  check_loss_config(config, reconstructor);
  if (batch.empty()) throw ParameterError("loss_gradient: empty batch");
  const std::size_t draws = std::max<std::size_t>(1, config.draws_per_field);
  grads.assign(net.parameter_count(), 0.0);
  LossValue acc;
  std::size_t count = 0;
  for (const Field& x0 : batch) {
    for (std::size_t k = 0; k < draws; ++k) {
      const int t = static_cast<int>(rng.uniform_int(1, s.steps()));
      const Field eps = sample_gaussian(x0.shape(), 1.0, rng);
      const Field xt = forward_closed_form(x0, t, eps, s, d);
      const auto cache = forward_cached(net, conditioned_input(net, xt, t, s));
      const auto r = evaluate_draw(eps, cache.out, t, s, d, config, reconstructor, true);
      backward_cached(net, cache, r.dpred, grads);
      acc.total += r.value.total;
      acc.noise += r.value.noise;
      acc.penalty += r.value.penalty;
      ++count;
    }
  }
  const double inv = 1.0 / static_cast<double>(count);
  for (double& g : grads) g *= inv;
  return LossValue{acc.total * inv, acc.noise * inv, acc.penalty * inv};
}

TrainReport train(TinyConvNet& net, std::span<const Field> dataset, const Schedule& s, DomainKind d,
                  const LossConfig& config, double lr, long steps, Rng& rng,
                  const PoissonReconstructor* reconstructor) {
  check_train_args(lr, steps, config.batch_size);
  check_loss_config(config, reconstructor);
  if (dataset.empty()) throw ParameterError("train: empty dataset");

  TrainReport rep;
  rep.seed = rng.seed();
  IntervalLog log;
  double last_finite = 0.0;
  const std::size_t log_every = std::max<std::size_t>(1, config.log_every);
  ParameterGradients grads(net.parameter_count());

  for (long step = 1; step <= steps; ++step) {
    std::fill(grads.begin(), grads.end(), 0.0);
    LossValue batch_loss;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const Field& x0 = dataset[rng.uniform_int(0, dataset.size() - 1)];
      const int t = static_cast<int>(rng.uniform_int(1, s.steps()));
      const Field eps = sample_gaussian(x0.shape(), 1.0, rng);
      const Field xt = forward_closed_form(x0, t, eps, s, d);
      const auto cache = forward_cached(net, conditioned_input(net, xt, t, s));
      const auto r = evaluate_draw(eps, cache.out, t, s, d, config, reconstructor, true);
      backward_cached(net, cache, r.dpred, grads);
      batch_loss.total += r.value.total;
      batch_loss.noise += r.value.noise;
      batch_loss.penalty += r.value.penalty;
    }
    const double inv_b = 1.0 / static_cast<double>(config.batch_size);
    const double loss = batch_loss.total * inv_b;
    if (!std::isfinite(loss)) {
      log.flush(rep, step - 1);
      rep.steps = step - 1;
      rep.final_loss = last_finite;
      throw TrainingDiverged("training diverged at step " + std::to_string(step), step, last_finite,
                             std::move(rep));
    }
    last_finite = loss;
    sgd_update(net, grads, lr * inv_b, lr, config.grad_clip);

    log.total += loss;
    log.noise += batch_loss.noise * inv_b;
    log.penalty += batch_loss.penalty * inv_b;
    ++log.n;
    if (step % static_cast<long>(log_every) == 0 || step == steps) log.flush(rep, step);
  }
  rep.steps = steps;
  rep.final_loss = rep.loss_curve.back();
  return rep;
}

Field reconstructor_predict(const TinyConvNet& net, const Field& domain_field) {
  return remove_channel_means(net_forward_input(net, domain_field));
}

namespace {

void check_reconstructor(const TinyConvNet& net, std::span<const Field> images, DomainKind d) {
  if (images.empty()) throw ParameterError("reconstructor: empty dataset");
  const std::size_t ic = images[0].channels();
  const auto& cfg = net.config();
  if (cfg.time_conditioning || cfg.data_channels != domain_channels(d, ic) || cfg.out_channels != ic) {
    throw ConfigError("reconstructor net must map " + std::to_string(domain_channels(d, ic)) +
                      " domain channels to " + std::to_string(ic) + " image channels without conditioning");
  }
}

Field perturbed_input(const Field& domain_field, double level, Rng& rng) {
  if (level <= 0.0) return domain_field;
  return domain_field + sample_gaussian(domain_field.shape(), level, rng);
}

}  // namespace

TrainReport train_reconstructor(TinyConvNet& net, std::span<const Field> images, DomainKind d,
                                std::span<const double> noise_levels, Rng& rng, double lr, long steps,
                                std::size_t batch_size, std::size_t log_every) {
  check_train_args(lr, steps, batch_size);
  check_reconstructor(net, images, d);
  if (noise_levels.empty()) throw ParameterError("train_reconstructor: no noise levels");
  for (double lv : noise_levels) {
    if (!(lv >= 0.0)) throw ParameterError("noise levels must be >= 0");
  }

  std::vector<Field> inputs, targets;
  for (const auto& img : images) {
    inputs.push_back(to_domain(img, d));
    targets.push_back(remove_channel_means(img));
  }

  TrainReport rep;
  rep.seed = rng.seed();
  IntervalLog log;
  double last_finite = 0.0;
  log_every = std::max<std::size_t>(1, log_every);
  ParameterGradients grads(net.parameter_count());

  for (long step = 1; step <= steps; ++step) {
    std::fill(grads.begin(), grads.end(), 0.0);
    double loss = 0.0;
    for (std::size_t b = 0; b < batch_size; ++b) {
      const std::size_t i = rng.uniform_int(0, images.size() - 1);
      const double level = noise_levels[rng.uniform_int(0, noise_levels.size() - 1)];
      const auto cache = forward_cached(net, perturbed_input(inputs[i], level, rng));
      const Field err = remove_channel_means(cache.out) - targets[i];
      const double n = static_cast<double>(err.size());
      double sq = 0.0;
      for (double v : err.data()) sq += v * v;
      loss += sq / n;
      // Mean removal is an orthogonal projection, hence self-adjoint.
      backward_cached(net, cache, remove_channel_means((2.0 / n) * err), grads);
    }
    loss /= static_cast<double>(batch_size);
    if (!std::isfinite(loss)) {
      log.flush(rep, step - 1);
      rep.steps = step - 1;
      rep.final_loss = last_finite;
      throw TrainingDiverged("reconstructor training diverged at step " + std::to_string(step), step,
                             last_finite, std::move(rep));
    }
    last_finite = loss;
    sgd_update(net, grads, lr / static_cast<double>(batch_size));
    log.total += loss;
    log.noise += loss;
    ++log.n;
    if (step % static_cast<long>(log_every) == 0 || step == steps) log.flush(rep, step);
  }
  rep.steps = steps;
  rep.final_loss = rep.loss_curve.back();
  return rep;
}

double reconstructor_mse(const TinyConvNet& net, std::span<const Field> images, DomainKind d,
                         double noise_level, Rng& rng) {
  check_reconstructor(net, images, d);
  double total = 0.0;
  for (const auto& img : images) {
    const Field pred = reconstructor_predict(net, perturbed_input(to_domain(img, d), noise_level, rng));
    const Field err = pred - remove_channel_means(img);
    total += dot(err, err) / static_cast<double>(err.size());
  }
  return total / static_cast<double>(images.size());
}

void save_checkpoint(const TinyConvNet& net, const std::filesystem::path& stem, long step) {
  auto bin = stem;
  bin += ".bin";
  auto meta_path = stem;
  meta_path += ".json";
  write_f64_le(bin, net.parameters());
  const auto& cfg = net.config();
  nlohmann::ordered_json meta = {{"architecture", TinyConvNet::kArchitecture},
                                 {"channels", cfg.data_channels},
                                 {"out_channels", cfg.out_channels},
                                 {"width", cfg.width},
                                 {"time_conditioning", cfg.time_conditioning},
                                 {"seed", cfg.seed},
                                 {"step", step},
                                 {"parameter_count", net.parameter_count()}};
  std::ofstream out(meta_path);
  if (!out) throw IoError("cannot create " + meta_path.string());
  out << meta.dump(2) << '\n';
}

TinyConvNet load_checkpoint(const std::filesystem::path& stem, long* step) {
  auto bin = stem;
  bin += ".bin";
  auto meta_path = stem;
  meta_path += ".json";
  std::ifstream in(meta_path);
  if (!in) throw IoError("cannot open " + meta_path.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint sidecar " + meta_path.string() + ": " + e.what());
  }
  if (meta.value("architecture", std::string{}) != TinyConvNet::kArchitecture) {
    throw IoError("checkpoint architecture mismatch in " + meta_path.string());
  }
  TinyConvNetConfig cfg;
  cfg.data_channels = meta.at("channels").get<std::size_t>();
  cfg.out_channels = meta.value("out_channels", cfg.data_channels);
  cfg.width = meta.at("width").get<std::size_t>();
  cfg.time_conditioning = meta.value("time_conditioning", true);
  cfg.seed = meta.at("seed").get<std::uint64_t>();
  TinyConvNet net(cfg);
  const auto values = read_f64_le(bin);
  if (values.size() != net.parameter_count()) {
    throw IoError("checkpoint " + bin.string() + " holds " + std::to_string(values.size()) +
                  " parameters, expected " + std::to_string(net.parameter_count()));
  }
  std::copy(values.begin(), values.end(), net.parameters().begin());
  if (step != nullptr) *step = meta.at("step").get<long>();
  return net;
}

}  // namespace gddm
