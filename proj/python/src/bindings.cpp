#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gmred/criteria.hpp"
#include "gmred/fixtures.hpp"
#include "gmred/io.hpp"
#include "gmred/parallel.hpp"
#include "gmred/quad.hpp"
#include "gmred/reduce.hpp"
#include "gmred/ssm.hpp"

namespace py = pybind11;
using namespace gmred;

namespace {

std::optional<CriterionKind> maybe_criterion(const std::optional<std::string>& name) {
  if (!name || *name == "none") return std::nullopt;
  return parse_criterion(*name);
}

QuadOptions quad_options(double rel_tol, int nodes, double box_k) {
  QuadOptions q;
  q.rel_tol = rel_tol;
  q.nodes_per_axis = nodes;
  q.box_k = box_k;
  return q;
}

std::vector<Vector> rows_of(const Matrix& ys) {
  std::vector<Vector> out;
  out.reserve(ys.rows());
  for (Eigen::Index i = 0; i < ys.rows(); ++i) out.push_back(ys.row(i).transpose());
  return out;
}

py::dict trace_dict(const ReductionTrace& t) {
  py::list steps;
  for (const auto& s : t.steps) {
    py::dict d;
    d["order_before"] = s.order_before;
    d["pair"] = py::make_tuple(s.chosen_pair.first, s.chosen_pair.second);
    d["score"] = s.score;
    d["criterion"] = std::string(to_string(s.criterion));
    d["kl_to_true"] = s.kl_to_true ? py::cast(*s.kl_to_true) : py::none();
    steps.append(d);
  }
  py::dict out;
  out["steps"] = steps;
  out["mixture"] = t.final_mixture;
  return out;
}

py::dict run_dict(const FilterRun& run) {
  py::dict out;
  out["log_likelihood"] = run.log_likelihood;
  out["predicted"] = run.predicted;
  out["filtered"] = run.filtered;
  std::vector<Vector> fm;
  for (const auto& m : run.filtered) fm.push_back(mixture_moments(m).mean);
  out["filtered_mean"] = fm;
  if (run.smoothed) {
    std::vector<Vector> sm;
    for (const auto& m : *run.smoothed) sm.push_back(mixture_moments(m).mean);
    out["smoothed"] = *run.smoothed;
    out["smoothed_mean"] = sm;
  } else {
    out["smoothed"] = py::none();
  }
  return out;
}

FilterRun filter_run(const LinearStateSpaceModel& model, const Matrix& ys, std::size_t cap,
                     const std::string& criterion, const std::optional<std::string>& fallback,
                     const std::optional<GaussianMixture>& prior, bool cap_after_predict) {
  FilterOptions o;
  o.cap = cap;
  o.criterion = parse_criterion(criterion);
  o.fallback = maybe_criterion(fallback);
  o.cap_after_predict = cap_after_predict;
  return run_filter(model, rows_of(ys), prior ? *prior : default_prior(model.state_dim()), o);
}

}  // namespace

PYBIND11_MODULE(_gmred, m) {
  m.doc() = "Gaussian mixture reduction and Gaussian-sum filtering";

  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<ReductionStuck>(m, "ReductionStuck", PyExc_RuntimeError);

  py::class_<GaussianComponent>(m, "GaussianComponent")
      .def(py::init<double, Vector, Matrix>(), py::arg("weight"), py::arg("mean"), py::arg("cov"))
      .def_property_readonly("weight", &GaussianComponent::weight)
      .def_property_readonly("mean", &GaussianComponent::mean)
      .def_property_readonly("cov", &GaussianComponent::cov)
      .def_property_readonly("dim", &GaussianComponent::dim)
      .def("log_pdf", [](const GaussianComponent& c, const Vector& x) { return c.log_pdf(x); })
      .def("__repr__", [](const GaussianComponent& c) {
        return "GaussianComponent(weight=" + format_number(c.weight()) + ", dim=" + std::to_string(c.dim()) + ")";
      });

  py::class_<GaussianMixture>(m, "GaussianMixture")
      .def(py::init<std::vector<GaussianComponent>>(), py::arg("components"))
      .def_property_readonly("dim", &GaussianMixture::dim)
      .def_property_readonly("order", &GaussianMixture::order)
      .def_property_readonly("components",
                             [](const GaussianMixture& g) { return std::vector<GaussianComponent>(g.begin(), g.end()); })
      .def_property_readonly("weights",
                             [](const GaussianMixture& g) {
                               std::vector<double> w;
                               for (const auto& c : g) w.push_back(c.weight());
                               return w;
                             })
      .def("total_weight", &GaussianMixture::total_weight)
      .def("__len__", &GaussianMixture::order)
      .def("__getitem__", &GaussianMixture::at)
      .def("density", [](const GaussianMixture& g, const Vector& x) { return density(g, x); })
      .def("log_density", [](const GaussianMixture& g, const Vector& x) { return log_density(g, x); })
      .def("to_json", [](const GaussianMixture& g) { return mixture_to_json(g).dump(); })
      .def_static("from_json", [](const std::string& s) { return mixture_from_json(Json::parse(s)); })
      .def("__repr__", [](const GaussianMixture& g) {
        return "GaussianMixture(order=" + std::to_string(g.order()) + ", dim=" + std::to_string(g.dim()) + ")";
      });

  m.def("normalize", &normalize);
  m.def("mixture_moments", [](const GaussianMixture& g) {
    const auto mm = mixture_moments(g);
    return py::make_tuple(mm.mean, mm.cov);
  });
  m.def("moment_preserving_merge", &moment_preserving_merge);
  m.def("merge_pair", &merge_pair);
  m.def("merge_geometry", [](const GaussianComponent& a, const GaussianComponent& b) {
    const auto g = merge_geometry(a, b);
    py::dict d;
    d["xi"] = g.xi;
    d["V"] = g.V;
    d["zeta"] = g.zeta;
    d["SigmaJK"] = g.SigmaJK;
    d["W"] = g.W;
    d["eta"] = g.eta;
    d["wPD"] = g.wPD;
    return d;
  });

  m.def("pearson_chi2", &pearson_chi2);
  m.def("kitagawa_wkl", &kitagawa_wkl);
  m.def("runnalls_bound", &runnalls_bound);
  m.def("salmond_trace", &salmond_trace);
  m.def("williams_isd", &williams_isd);
  m.def(
      "score_pair",
      [](const std::string& kind, const GaussianMixture& g, std::size_t j, std::size_t k) {
        return score_pair(parse_criterion(kind), g, j, k, ScoringContext{&g, {}});
      },
      "Pair score, or None when the pair is excluded.");

  m.def(
      "kl_numeric",
      [](const GaussianMixture& g, const GaussianMixture& f, double rel_tol, int nodes, double box_k) {
        return kl_numeric(g, f, make_quad_spec(g, quad_options(rel_tol, nodes, box_k)));
      },
      py::arg("g"), py::arg("f"), py::arg("rel_tol") = 1e-9, py::arg("nodes_per_axis") = 400,
      py::arg("box_k") = 10.0);
  m.def(
      "isd_numeric",
      [](const GaussianMixture& g, const GaussianMixture& f) { return isd_numeric(g, f, make_quad_spec(g)); });

  m.def(
      "reduce_to",
      [](const GaussianMixture& g, std::size_t order, const std::string& criterion,
         const std::optional<std::string>& fallback, bool track_kl) {
        ReduceOptions o;
        o.fallback = maybe_criterion(fallback);
        o.track_kl = track_kl;
        return trace_dict(reduce_to(g, order, parse_criterion(criterion), o));
      },
      py::arg("mixture"), py::arg("order"), py::arg("criterion") = "pearson", py::arg("fallback") = py::none(),
      py::arg("track_kl") = false);

  m.def(
      "global_kl_fit",
      [](const GaussianMixture& g, std::size_t order, int restarts, int max_iter, std::uint64_t seed,
         const std::optional<GaussianMixture>& init) {
        GlobalFitConfig cfg;
        cfg.restarts = restarts;
        cfg.max_iter = max_iter;
        cfg.seed = seed;
        const auto r = global_kl_fit(g, order, cfg, init);
        py::dict d;
        d["mixture"] = r.mixture;
        d["kl"] = r.kl;
        d["init_kl"] = r.init_kl;
        d["converged"] = r.converged;
        d["iterations"] = r.iterations;
        return d;
      },
      py::arg("mixture"), py::arg("order"), py::arg("restarts") = 3, py::arg("max_iter") = 500,
      py::arg("seed") = 20240601, py::arg("init") = py::none());

  py::class_<LinearStateSpaceModel>(m, "LinearStateSpaceModel")
      .def(py::init([](Matrix F, Matrix G, Matrix H, GaussianMixture sys, GaussianMixture obs) {
             LinearStateSpaceModel model{std::move(F), std::move(G), std::move(H), std::move(sys), std::move(obs)};
             model.validate();
             return model;
           }),
           py::arg("F"), py::arg("G"), py::arg("H"), py::arg("sys_noise"), py::arg("obs_noise"))
      .def_readonly("F", &LinearStateSpaceModel::F)
      .def_readonly("G", &LinearStateSpaceModel::G)
      .def_readonly("H", &LinearStateSpaceModel::H)
      .def_readonly("sys_noise", &LinearStateSpaceModel::sys_noise)
      .def_readonly("obs_noise", &LinearStateSpaceModel::obs_noise);

  m.def("trend_model", &trend_model, py::arg("tau2"), py::arg("xi2"), py::arg("alpha"), py::arg("sigma2"));
  m.def("default_prior", &default_prior);
  m.def("predict_step", &predict_step);
  m.def("filter_step", [](const GaussianMixture& pred, const Vector& y, const LinearStateSpaceModel& model) {
    const auto r = filter_step(pred, y, model);
    return py::make_tuple(r.posterior, r.log_lik);
  });

  m.def(
      "run_filter",
      [](const LinearStateSpaceModel& model, const Matrix& ys, std::size_t cap, const std::string& criterion,
         const std::optional<std::string>& fallback, const std::optional<GaussianMixture>& prior,
         bool cap_after_predict) {
        return run_dict(filter_run(model, ys, cap, criterion, fallback, prior, cap_after_predict));
      },
      "Observations are the rows of `ys`.", py::arg("model"), py::arg("ys"), py::arg("cap") = 8,
      py::arg("criterion") = "pearson", py::arg("fallback") = "runnalls", py::arg("prior") = py::none(),
      py::arg("cap_after_predict") = false);
  m.def(
      "run_smoother",
      [](const LinearStateSpaceModel& model, const Matrix& ys, std::size_t cap, const std::string& criterion,
         const std::optional<std::string>& fallback, const std::optional<GaussianMixture>& prior,
         bool cap_after_predict) {
        return run_dict(run_smoother(filter_run(model, ys, cap, criterion, fallback, prior, cap_after_predict), model));
      },
      py::arg("model"), py::arg("ys"), py::arg("cap") = 8, py::arg("criterion") = "pearson",
      py::arg("fallback") = "runnalls", py::arg("prior") = py::none(), py::arg("cap_after_predict") = false);

  m.def("table1", &fixtures::table1);
  m.def("table3", &fixtures::table3);
  m.def(
      "levelshift_series",
      [](std::uint64_t seed) {
        const auto ys = fixtures::levelshift_series(seed);
        Vector out(static_cast<Eigen::Index>(ys.size()));
        for (std::size_t i = 0; i < ys.size(); ++i) out(static_cast<Eigen::Index>(i)) = ys[i](0);
        return out;
      },
      py::arg("seed") = fixtures::kDefaultSeed);

  m.def("set_num_threads", &set_num_threads);
}
