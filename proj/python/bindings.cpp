#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>

#include "frameflow/convergence.hpp"
#include "frameflow/development.hpp"
#include "frameflow/presets.hpp"
#include "frameflow/schemes.hpp"
#include "frameflow/selftest.hpp"

namespace py = pybind11;
namespace ff = frameflow;

namespace {

py::dict series_dict(const ff::ErrorSeries& s) {
  std::vector<double> h, err, se;
  for (const auto& e : s.entries) {
    h.push_back(e.h);
    err.push_back(e.error);
    se.push_back(e.std_error);
  }
  py::dict d;
  d["label"] = s.label;
  d["kind"] = std::string(ff::error_kind_name(s.kind));
  d["h"] = h;
  d["error"] = err;
  d["stderr"] = se;
  try {
    const ff::OrderFit fit = ff::fit_order(s);
    d["slope"] = fit.slope;
    d["r_squared"] = fit.r_squared;
  } catch (const ff::InvalidArgument&) {
    d["slope"] = py::none();
    d["r_squared"] = py::none();
  }
  return d;
}

ff::Vec to_vec(const std::vector<double>& v) {
  ff::Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Frame-bundle SDE schemes, convergence harness and sphere development";

  // Translators run newest first, so the base class goes in first.
  py::register_exception<ff::Error>(m, "FrameflowError", PyExc_RuntimeError);
  py::register_exception<ff::InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  m.def("problem_names", &ff::problem_names);
  m.def("scheme_names", &ff::scheme_names);

  m.def(
      "simulate",
      [](const std::string& problem, const std::string& scheme, double h, double t,
         std::size_t paths, std::uint64_t seed, std::size_t substeps) {
        const ff::Problem p = ff::make_problem(problem);
        const ff::SchemeKind kind = ff::parse_scheme(scheme);
        const std::size_t n = ff::steps_for(t, h);
        const int d = p.system.dim;
        py::array_t<double> out({paths, n + 1, static_cast<std::size_t>(d)});
        auto view = out.mutable_unchecked<3>();
        for (std::size_t q = 0; q < paths; ++q) {
          const auto incr = ff::sample_increments(seed, q, ff::TimeGrid(0.0, t, n), d, substeps);
          const auto path =
              ff::simulate_path(p.system, kind, ff::initial_frame_point(p.system, p.start), incr);
          for (std::size_t k = 0; k <= n; ++k)
            for (int i = 0; i < d; ++i) view(q, k, i) = path[k].x(i);
        }
        return out;
      },
      py::arg("problem"), py::arg("scheme"), py::arg("h"), py::arg("t") = 1.0,
      py::arg("paths") = 1, py::arg("seed") = 1, py::arg("substeps") = 64,
      "Base paths with shape (paths, steps + 1, dim).");

  m.def(
      "increments",
      [](std::uint64_t seed, std::uint64_t stream, double t, std::size_t n_steps, int dim,
         std::size_t substeps) {
        const auto incr =
            ff::sample_increments(seed, stream, ff::TimeGrid(0.0, t, n_steps), dim, substeps);
        py::array_t<double> dw({n_steps, static_cast<std::size_t>(dim)});
        py::array_t<double> levy(
            {n_steps, static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)});
        auto a = dw.mutable_unchecked<2>();
        auto b = levy.mutable_unchecked<3>();
        for (std::size_t k = 0; k < n_steps; ++k)
          for (int i = 0; i < dim; ++i) {
            a(k, i) = incr.dw(k)(i);
            for (int j = 0; j < dim; ++j) b(k, i, j) = incr.levy(k)(i, j);
          }
        return py::make_tuple(dw, levy);
      },
      py::arg("seed"), py::arg("stream"), py::arg("t"), py::arg("n_steps"), py::arg("dim"),
      py::arg("substeps") = 64, "Brownian increments and Ito iterated integrals.");

  m.def(
      "coupled_strong_error",
      [](const std::string& problem, const std::vector<std::string>& schemes, int first, int last,
         int ref_exp, std::size_t ref_substeps, std::size_t paths, std::uint64_t seed,
         const std::string& reference, int threads) {
        const ff::Problem p = ff::make_problem(problem);
        std::vector<ff::SchemeKind> kinds;
        for (const auto& s : schemes) kinds.push_back(ff::parse_scheme(s));
        ff::StrongConfig c;
        c.ladder = ff::dyadic_ladder(1.0, first, last);
        c.h_ref = std::ldexp(1.0, -ref_exp);
        c.ref_substeps = ref_substeps;
        c.n_paths = paths;
        c.seed = seed;
        c.reference = ff::parse_scheme(reference);
        c.threads = threads;
        ff::StrongResult r;
        {
          py::gil_scoped_release release;
          r = ff::coupled_strong_error(p.system, kinds, p.start, c);
        }
        py::list coupled, dist;
        for (const auto& s : r.coupled) coupled.append(series_dict(s));
        for (const auto& s : r.distributional) dist.append(series_dict(s));
        py::dict d;
        d["coupled"] = coupled;
        d["wasserstein2"] = dist;
        return d;
      },
      py::arg("problem"), py::arg("schemes"), py::arg("first"), py::arg("last"),
      py::arg("ref_exp"), py::arg("ref_substeps") = 256, py::arg("paths") = 100,
      py::arg("seed") = 1, py::arg("reference") = "frame-milstein", py::arg("threads") = 0);

  m.def(
      "gbm_weak_error",
      [](const std::vector<std::string>& schemes, int first, int last, std::size_t paths,
         std::uint64_t seed, bool variance_reduction, int threads) {
        const ff::Problem p = ff::make_problem("gbm1d");
        std::vector<ff::SchemeKind> kinds;
        for (const auto& s : schemes) kinds.push_back(ff::parse_scheme(s));
        ff::WeakConfig c;
        c.ladder = ff::dyadic_ladder(1.0, first, last);
        c.n_paths = paths;
        c.seed = seed;
        c.threads = threads;
        if (variance_reduction) ff::use_gbm_square_variance_reduction(c);
        std::vector<ff::ErrorSeries> r;
        {
          py::gil_scoped_release release;
          r = ff::weak_error(p.system, kinds, [](const ff::Vec& x) { return x(0) * x(0); },
                             std::exp(1.0), p.start, c);
        }
        py::list out;
        for (const auto& s : r) out.append(series_dict(s));
        return out;
      },
      py::arg("schemes"), py::arg("first") = 2, py::arg("last") = 6, py::arg("paths") = 10000,
      py::arg("seed") = 1, py::arg("variance_reduction") = true, py::arg("threads") = 0,
      "Weak error of E X_T^2 for dX = X dB, x0 = 1, against e^T.");

  m.def(
      "fit_order",
      [](const std::vector<double>& h, const std::vector<double>& err) {
        if (h.size() != err.size()) throw ff::InvalidArgument("h and error lengths differ");
        ff::ErrorSeries s;
        for (std::size_t i = 0; i < h.size(); ++i) s.entries.push_back({h[i], err[i], 0.0});
        const ff::OrderFit fit = ff::fit_order(s);
        return py::make_tuple(fit.slope, fit.intercept, fit.r_squared);
      },
      py::arg("h"), py::arg("error"), "(slope, intercept, r_squared) on log-log data.");

  m.def("wasserstein2_1d", &ff::wasserstein2_1d, py::arg("a"), py::arg("b"));

  m.def(
      "sphere_path",
      [](std::uint64_t seed, std::uint64_t stream, double t, double h) {
        const ff::SpherePath path = ff::sphere_bm_path(seed, stream, t, h);
        py::array_t<double> out({path.points.size(), std::size_t{3}});
        auto v = out.mutable_unchecked<2>();
        for (std::size_t k = 0; k < path.points.size(); ++k)
          for (int i = 0; i < 3; ++i) v(k, i) = path.points[k](i);
        return out;
      },
      py::arg("seed"), py::arg("stream"), py::arg("t"), py::arg("h"),
      "Points x_n = A_n e_z of a Lie-Euler Brownian path on S^2.");

  m.def(
      "develop",
      [](const std::vector<double>& t, const std::vector<std::vector<double>>& q, int substeps) {
        std::vector<ff::Vec> curve;
        for (const auto& row : q) curve.push_back(to_vec(row));
        const ff::RollingState north{ff::Vec::Unit(3, 2), ff::Mat::Identity(3, 3)};
        const auto dev = ff::develop_curve(ff::unit_sphere(), t, curve, north, substeps);
        std::vector<std::vector<double>> pts;
        for (const auto& p : dev.points) pts.push_back({p(0), p(1), p(2)});
        std::vector<std::vector<double>> frame(3, std::vector<double>(3));
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) frame[i][j] = dev.final_state.A(i, j);
        return py::make_tuple(pts, frame);
      },
      py::arg("t"), py::arg("q"), py::arg("substeps") = 200,
      "Develop a planar curve onto the unit sphere from the north pole.");

  m.def(
      "selftest",
      [](std::uint64_t seed) {
        py::list out;
        for (const auto& r : ff::run_selftest(seed)) {
          py::dict d;
          d["name"] = r.name;
          d["passed"] = r.passed;
          d["value"] = r.value;
          d["tolerance"] = r.tolerance;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 1);
}
