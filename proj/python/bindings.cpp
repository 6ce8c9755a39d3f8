#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <set>

#include "gddm/analysis.hpp"
#include "gddm/assets.hpp"
#include "gddm/cli.hpp"
#include "gddm/diffops.hpp"
#include "gddm/diffusion.hpp"
#include "gddm/error.hpp"
#include "gddm/image_io.hpp"
#include "gddm/model.hpp"
#include "gddm/poisson.hpp"
#include "gddm/schedule.hpp"

namespace py = pybind11;
using namespace gddm;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (H, W) arrays map to one channel; (H, W, C) arrays keep their channels.
Field to_field(const Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw DimensionError("expected a 2-D or 3-D array");
  const Shape shape{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                    a.ndim() == 3 ? static_cast<std::size_t>(a.shape(2)) : 1};
  checked_size(shape);
  return Field(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Field& f, bool squeeze = true) {
  std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(f.height()), static_cast<py::ssize_t>(f.width())};
  if (!squeeze || f.channels() != 1) shape.push_back(static_cast<py::ssize_t>(f.channels()));
  Array out(shape);
  std::copy(f.data().begin(), f.data().end(), out.mutable_data());
  return out;
}

std::vector<Field> to_fields(const std::vector<Array>& arrays) {
  std::vector<Field> out;
  out.reserve(arrays.size());
  for (const auto& a : arrays) out.push_back(to_field(a));
  return out;
}

py::dict solution_dict(const PoissonSolution& s) {
  py::dict d;
  d["image"] = to_array(s.image);
  d["residual_l2"] = s.residual_l2;
  d["anchored_mean"] = s.anchored_mean;
  d["iterations"] = s.iterations;
  d["converged"] = s.converged;
  d["compatibility_projected"] = s.compatibility_projected;
  d["energy_history"] = s.energy_history;
  return d;
}

py::object json_to_py(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

cli::ExperimentConfig config_from(const py::object& overrides) {
  if (overrides.is_none()) return {};
  const std::string text = py::str(py::module_::import("json").attr("dumps")(overrides));
  return cli::merge_json(cli::ExperimentConfig{}, nlohmann::json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Diffusion in image, gradient and Laplacian domains";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<IndexError>(m, "IndexError", base.ptr());
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DegenerateError>(m, "DegenerateError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def_property_readonly("seed", &Rng::seed)
      .def("uniform", &Rng::uniform)
      .def("normal", &Rng::normal)
      .def("next_u64", [](Rng& r) { return r(); })
      .def("derive", &Rng::derive, py::arg("key"));

  m.def(
      "sample_gaussian",
      [](std::size_t h, std::size_t w, std::size_t c, double sigma, Rng& rng) {
        return to_array(sample_gaussian(Shape{h, w, c}, sigma, rng), c == 1);
      },
      py::arg("height"), py::arg("width"), py::arg("channels") = 1, py::arg("sigma") = 1.0, py::arg("rng"));

  m.def(
      "field_stats",
      [](const Array& a) {
        const auto s = field_stats(to_field(a));
        py::dict d;
        d["mean"] = s.mean;
        d["variance"] = s.variance;
        d["excess_kurtosis"] = s.excess_kurtosis;
        d["min"] = s.min;
        d["max"] = s.max;
        d["count"] = s.count;
        d["degenerate"] = s.degenerate;
        return d;
      },
      py::arg("x"));

  // Differential operators.
  m.def(
      "forward_gradient",
      [](const Array& x) {
        const auto g = forward_gradient(to_field(x));
        const bool sq = x.ndim() == 2;
        return py::make_tuple(to_array(g.gu, sq), to_array(g.gv, sq));
      },
      py::arg("x"));
  m.def(
      "divergence_adjoint",
      [](const Array& gu, const Array& gv) {
        return to_array(divergence_adjoint(GradientField{to_field(gu), to_field(gv)}), gu.ndim() == 2);
      },
      py::arg("gu"), py::arg("gv"));
  m.def("laplacian_fe", [](const Array& x) { return to_array(laplacian_fe(to_field(x)), x.ndim() == 2); },
        py::arg("x"));
  m.def("laplacian_lsq", [](const Array& x) { return to_array(laplacian_lsq(to_field(x)), x.ndim() == 2); },
        py::arg("x"));

  // Poisson reconstruction.
  m.def(
      "solve_poisson_neumann",
      [](const Array& y, double anchor) { return solution_dict(solve_poisson_neumann(to_field(y), anchor)); },
      py::arg("y"), py::arg("anchor_mean") = 0.0);
  m.def(
      "reconstruct_from_gradient",
      [](const Array& gu, const Array& gv, double anchor, double tol, std::size_t max_iter) {
        return solution_dict(
            reconstruct_from_gradient(GradientField{to_field(gu), to_field(gv)}, anchor, tol, max_iter));
      },
      py::arg("gu"), py::arg("gv"), py::arg("anchor_mean") = 0.0, py::arg("tol") = 1e-8,
      py::arg("max_iter") = 2000);
  m.def(
      "greens_identity_check", [](const Array& a, const Array& b) { return greens_identity_check(to_field(a), to_field(b)); },
      py::arg("x1"), py::arg("x2"));

  // Schedules.
  py::enum_<ScheduleKind>(m, "ScheduleKind")
      .value("LINEAR", ScheduleKind::Linear)
      .value("CONSTANT", ScheduleKind::Constant);
  py::class_<Schedule>(m, "Schedule")
      .def_property_readonly("steps", &Schedule::steps)
      .def_property_readonly("kind", &Schedule::kind)
      .def("beta", &Schedule::beta)
      .def("alpha", &Schedule::alpha)
      .def("gamma", [](const Schedule& s, int t) { return gamma_at(s, t); })
      .def_property_readonly("gammas", [](const Schedule& s) {
        return std::vector<double>(s.gammas().begin(), s.gammas().end());
      })
      .def_property_readonly("betas", [](const Schedule& s) {
        return std::vector<double>(s.betas().begin(), s.betas().end());
      });
  m.def(
      "make_schedule",
      [](const std::string& kind, int steps, double beta_start, double beta_end) {
        return make_schedule(parse_schedule_kind(kind), steps, beta_start, beta_end);
      },
      py::arg("kind") = "linear", py::arg("steps") = 1000, py::arg("beta_start") = 1e-4, py::arg("beta_end") = 0.02);
  m.def("default_schedule", &default_schedule);

  // Diffusion.
  py::enum_<DomainKind>(m, "Domain")
      .value("IMAGE", DomainKind::Image)
      .value("GRADIENT", DomainKind::Gradient)
      .value("LAPLACIAN", DomainKind::Laplacian);
  m.def("parse_domain", &parse_domain, py::arg("name"));
  m.def("noise_scale", &noise_scale, py::arg("domain"));
  m.def(
      "to_domain", [](const Array& img, DomainKind d) { return to_array(to_domain(to_field(img), d)); },
      py::arg("image"), py::arg("domain"));
  m.def(
      "forward_closed_form",
      [](const Array& x0, int t, const Array& eps, const Schedule& s, DomainKind d) {
        return to_array(forward_closed_form(to_field(x0), t, to_field(eps), s, d), x0.ndim() == 2);
      },
      py::arg("x0"), py::arg("t"), py::arg("eps"), py::arg("schedule"), py::arg("domain"));
  m.def(
      "forward_iterative",
      [](const Array& x0, const Schedule& s, Rng& rng, DomainKind d, std::vector<int> keep) {
        py::dict out;
        const std::set<int> wanted(keep.begin(), keep.end());
        const bool sq = x0.ndim() == 2;
        forward_iterative_visit(to_field(x0), s, rng, d, [&](int t, const Field& x) {
          if (wanted.empty() || wanted.contains(t)) out[py::int_(t)] = to_array(x, sq);
        });
        return out;
      },
      py::arg("x0"), py::arg("schedule"), py::arg("rng"), py::arg("domain"), py::arg("keep") = std::vector<int>{},
      "States of the step-by-step forward process keyed by t (all of them when keep is empty).");

  py::class_<NoisePredictor>(m, "NoisePredictor")
      .def(
          "predict",
          [](const NoisePredictor& p, const Array& xt, int t, const Schedule& s, DomainKind d) {
            return to_array(p.predict(to_field(xt), t, s, d), xt.ndim() == 2);
          },
          py::arg("xt"), py::arg("t"), py::arg("schedule"), py::arg("domain"));
  py::class_<ZeroPredictor, NoisePredictor>(m, "ZeroPredictor").def(py::init<>());
  py::class_<AnalyticGaussianOracle, NoisePredictor>(m, "AnalyticGaussianOracle")
      .def(py::init<double, double>(), py::arg("mu"), py::arg("var0"))
      .def_property_readonly("mu", &AnalyticGaussianOracle::mu)
      .def_property_readonly("var0", &AnalyticGaussianOracle::var0);

  m.def(
      "reverse_step",
      [](const Array& xt, int t, const NoisePredictor& p, const Schedule& s, DomainKind d, bool stochastic,
         Rng& rng) { return to_array(reverse_step(to_field(xt), t, p, s, d, stochastic, rng), xt.ndim() == 2); },
      py::arg("xt"), py::arg("t"), py::arg("predictor"), py::arg("schedule"), py::arg("domain"),
      py::arg("stochastic"), py::arg("rng"));
  m.def(
      "sample",
      [](const NoisePredictor& p, const Schedule& s, std::size_t h, std::size_t w, std::size_t c, DomainKind d,
         bool stochastic, Rng& rng) {
        Field x;
        {
          py::gil_scoped_release release;
          x = sample(p, s, Shape{h, w, c}, d, stochastic, rng);
        }
        return to_array(x);
      },
      py::arg("predictor"), py::arg("schedule"), py::arg("height"), py::arg("width"), py::arg("channels"),
      py::arg("domain"), py::arg("stochastic") = true, py::arg("rng"));

  // Model.
  py::class_<TinyConvNet, NoisePredictor>(m, "TinyConvNet")
      .def(py::init([](std::size_t channels, std::size_t width, bool time_conditioning, std::uint64_t seed,
                       std::size_t out_channels) {
             return TinyConvNet(TinyConvNetConfig{channels, out_channels, width, time_conditioning, seed});
           }),
           py::arg("channels") = 1, py::arg("width") = 16, py::arg("time_conditioning") = true,
           py::arg("seed") = 0, py::arg("out_channels") = 0)
      .def_property_readonly("parameter_count", &TinyConvNet::parameter_count)
      .def_property(
          "parameters",
          [](const TinyConvNet& n) {
            return std::vector<double>(n.parameters().begin(), n.parameters().end());
          },
          [](TinyConvNet& n, const std::vector<double>& p) {
            if (p.size() != n.parameter_count()) throw ShapeError("parameter vector has the wrong length");
            std::copy(p.begin(), p.end(), n.parameters().begin());
          });
  m.def(
      "net_backward",
      [](const TinyConvNet& n, const Array& xt, int t, const Schedule& s, const Array& upstream) {
        return net_backward(n, to_field(xt), t, s, to_field(upstream));
      },
      py::arg("net"), py::arg("xt"), py::arg("t"), py::arg("schedule"), py::arg("upstream"));

  py::class_<PoissonReconstructor>(m, "PoissonReconstructor")
      .def(py::init<>())
      .def(
          "reconstruct",
          [](const PoissonReconstructor& r, const Array& field, DomainKind d, double anchor) {
            return to_array(r.reconstruct(to_field(field), d, anchor));
          },
          py::arg("field"), py::arg("domain"), py::arg("anchor_mean") = 0.0);

  m.def(
      "loss_eval",
      [](const NoisePredictor& p, const std::vector<Array>& batch, const Schedule& s, DomainKind d, Rng& rng,
         double lambda, const std::string& penalty, std::size_t draws) {
        LossConfig cfg;
        cfg.lambda = lambda;
        cfg.penalty = parse_penalty_kind(penalty);
        cfg.draws_per_field = draws;
        const PoissonReconstructor recon;
        const auto v = loss_eval(p, to_fields(batch), s, d, rng, cfg, &recon);
        return py::make_tuple(v.total, v.noise, v.penalty);
      },
      py::arg("predictor"), py::arg("batch"), py::arg("schedule"), py::arg("domain"), py::arg("rng"),
      py::arg("lambda_") = 0.0, py::arg("penalty") = "gradient", py::arg("draws_per_field") = 1,
      "Returns (total, noise_term, penalty_term).");
  m.def(
      "train",
      [](TinyConvNet& net, const std::vector<Array>& dataset, const Schedule& s, DomainKind d, double lr,
         long steps, Rng& rng, double lambda, std::size_t batch_size, double grad_clip) {
        LossConfig cfg;
        cfg.lambda = lambda;
        cfg.batch_size = batch_size;
        cfg.grad_clip = grad_clip;
        const PoissonReconstructor recon;
        const std::vector<Field> data = to_fields(dataset);
        TrainReport rep;
        {
          py::gil_scoped_release release;
          rep = train(net, data, s, d, cfg, lr, steps, rng, &recon);
        }
        py::dict out;
        out["loss_curve"] = rep.loss_curve;
        out["noise_curve"] = rep.noise_curve;
        out["penalty_curve"] = rep.penalty_curve;
        out["logged_steps"] = rep.logged_steps;
        out["final_loss"] = rep.final_loss;
        return out;
      },
      py::arg("net"), py::arg("dataset"), py::arg("schedule"), py::arg("domain"), py::arg("lr"), py::arg("steps"),
      py::arg("rng"), py::arg("lambda_") = 0.0, py::arg("batch_size") = 8, py::arg("grad_clip") = 0.0);

  // Analysis.
  m.def(
      "histogram",
      [](const Array& x, std::size_t bins, double lo, double hi) {
        const auto h = histogram(to_field(x), bins, lo, hi);
        return py::make_tuple(h.mass, h.bin_edges, h.out_of_range_mass);
      },
      py::arg("x"), py::arg("bins"), py::arg("lo"), py::arg("hi"), "Returns (mass, bin_edges, out_of_range_mass).");
  m.def(
      "jsd",
      [](const Array& p, const Array& q, std::size_t bins, double lo, double hi) {
        return jsd(histogram(to_field(p), bins, lo, hi), histogram(to_field(q), bins, lo, hi));
      },
      py::arg("p"), py::arg("q"), py::arg("bins"), py::arg("lo"), py::arg("hi"),
      "JSD between the histograms of two sample fields on a shared binning.");
  m.def(
      "convergence_report",
      [](const Array& x0, const Schedule& s, Rng& rng, DomainKind d, double tol, std::size_t bins) {
        const auto [lo, hi] = default_histogram_range(d);
        std::vector<Histogram> hists;
        {
          py::gil_scoped_release release;
          hists = trajectory_histograms(to_field(x0), s, rng, d, bins, lo, hi);
        }
        const auto rep = convergence_report(hists, d, tol);
        return py::make_tuple(rep.t_converge, rep.jsd_to_terminal);
      },
      py::arg("x0"), py::arg("schedule"), py::arg("rng"), py::arg("domain"), py::arg("tol") = 0.01,
      py::arg("bins") = kDefaultBins, "Returns (t_converge, jsd_to_terminal).");
  m.def(
      "sparsity_metrics",
      [](const Array& x, double tau) {
        const auto s = sparsity_metrics(to_field(x), tau);
        return py::make_tuple(s.fraction_near_zero, s.excess_kurtosis);
      },
      py::arg("x"), py::arg("tau"), "Returns (fraction_near_zero, excess_kurtosis).");
  m.def("isotonic_violation", [](const std::vector<double>& v) { return isotonic_violation(v); }, py::arg("seq"));

  // Images and assets.
  m.def("read_pnm", [](const std::filesystem::path& p) { return to_array(read_pnm(p)); }, py::arg("path"));
  m.def(
      "write_pnm", [](const std::filesystem::path& p, const Array& img) { write_pnm(p, to_field(img)); },
      py::arg("path"), py::arg("image"));
  m.def("bundled_image_path", &bundled_image_path);
  m.def(
      "make_blob_image", [](std::size_t size, Rng& rng) { return to_array(make_blob_image(size, rng)); },
      py::arg("size"), py::arg("rng"));

  // Experiment commands.
  m.def("default_config", [] { return json_to_py(cli::to_json(cli::ExperimentConfig{})); });
  m.def(
      "run_command",
      [](const std::string& command, const py::object& config) {
        const cli::ExperimentConfig cfg = config_from(config);
        cli::CommandResult r;
        {
          py::gil_scoped_release release;
          if (command == "variance-check") r = cli::cmd_variance_check(cfg);
          else if (command == "converge") r = cli::cmd_converge(cfg);
          else if (command == "poisson-roundtrip") r = cli::cmd_poisson_roundtrip(cfg);
          else if (command == "train-sample") r = cli::cmd_train_sample(cfg);
          else throw ParameterError("unknown command '" + command + "'");
        }
        return py::make_tuple(r.exit_code, json_to_py(r.report), r.run_dir);
      },
      py::arg("command"), py::arg("config") = py::none(),
      "Runs one experiment command with config overrides; returns (exit_code, report, run_dir).");
}
