#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>

#include "frameflow/convergence.hpp"
#include "frameflow/csv.hpp"
#include "frameflow/development.hpp"
#include "frameflow/presets.hpp"
#include "frameflow/schemes.hpp"
#include "frameflow/selftest.hpp"

namespace ff = frameflow;

namespace {

// Raised for bad flag combinations; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ff::Error("cannot open output file '" + path + "'");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::pair<int, int> parse_ladder(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw UsageError("--ladder expects a:b, got '" + spec + "'");
  int a = 0, b = 0;
  try {
    a = std::stoi(spec.substr(0, colon));
    b = std::stoi(spec.substr(colon + 1));
  } catch (const std::exception&) {
    throw UsageError("--ladder expects integer exponents a:b, got '" + spec + "'");
  }
  if (b < a) throw UsageError("--ladder a:b needs a <= b");
  if (b - a + 1 < 3) throw UsageError("need ≥ 3 ladder points (got " + std::to_string(b - a + 1) + ")");
  return {a, b};
}

struct SimulateOptions {
  std::string problem, scheme, out;
  double h = 0.25, t = 1.0;
  std::size_t paths = 1, substeps = 64;
  std::uint64_t seed = 1;
  int ode_substeps = 4;
};

int cmd_simulate(const SimulateOptions& o) {
  const ff::Problem problem = ff::make_problem(o.problem);
  const ff::SchemeKind kind = ff::parse_scheme(o.scheme);
  const std::size_t n = ff::steps_for(o.t, o.h);
  const ff::TimeGrid grid(0.0, o.t, n);
  const int d = problem.system.dim;
  const bool frame = ff::is_frame_scheme(kind);
  ff::SchemeParams params;
  params.ode_substeps = o.ode_substeps;

  std::ostringstream buf;
  buf << "path,step,t";
  for (int i = 1; i <= d; ++i) buf << ",x" << i;
  if (frame) {
    for (int i = 1; i <= d; ++i)
      for (int j = 1; j <= d; ++j) buf << ",e" << i << j;
  }
  buf << '\n';
  for (std::size_t p = 0; p < o.paths; ++p) {
    const ff::WienerIncrements incr = ff::sample_increments(o.seed, p, grid, d, o.substeps);
    std::vector<ff::FramePoint> path;
    try {
      path = ff::simulate_path(problem.system, kind,
                               ff::initial_frame_point(problem.system, problem.start), incr,
                               params);
    } catch (const ff::StepError& err) {
      throw ff::Error("path " + std::to_string(p) + ": " + err.what());
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      buf << p << ',' << k << ',' << ff::csv::num(grid.time(k));
      for (int i = 0; i < d; ++i) buf << ',' << ff::csv::num(path[k].x(i));
      if (frame) {
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) buf << ',' << ff::csv::num(path[k].e(i, j));
      }
      buf << '\n';
    }
  }
  Output out(o.out);
  out.stream() << buf.str();
  return 0;
}

struct ConvergenceOptions {
  std::string problem, scheme, mode = "strong", ladder, out, reference = "frame-milstein";
  std::size_t paths = 2000, ref_substeps = 256, substeps = 8;
  std::uint64_t seed = 1;
  double t = 1.0;
  int ref_exp = 12, threads = 0, ode_substeps = 4;
  double reference_value = std::nan("");
  bool no_variance_reduction = false;
};

int cmd_convergence(const ConvergenceOptions& o) {
  const auto [first, last] = parse_ladder(o.ladder);
  if (o.mode != "strong" && o.mode != "weak" && o.mode != "w2") {
    throw UsageError("--mode must be strong, weak or w2");
  }
  const std::vector<double> ladder = ff::dyadic_ladder(o.t, first, last);
  ff::ErrorSeries series;

  if (o.problem == "sphere") {
    if (o.mode != "weak") throw UsageError("the sphere problem supports --mode weak only");
    series = ff::sphere_weak_error(o.t, ladder, o.paths, o.seed, o.threads);
  } else {
    const ff::Problem problem = ff::make_problem(o.problem);
    const ff::SchemeKind kind = ff::parse_scheme(o.scheme);
    ff::SchemeParams params;
    params.ode_substeps = o.ode_substeps;
    if (o.mode == "weak") {
      ff::WeakConfig c;
      c.t_end = o.t;
      c.ladder = ladder;
      c.n_paths = o.paths;
      c.seed = o.seed;
      c.threads = o.threads;
      c.substeps = o.substeps;
      c.params = params;
      double reference = o.reference_value;
      if (o.problem == "gbm1d") {
        const double x0 = problem.start(0);
        if (std::isnan(reference)) reference = x0 * x0 * std::exp(o.t);
        if (!o.no_variance_reduction) ff::use_gbm_square_variance_reduction(c);
      } else if (std::isnan(reference)) {
        throw UsageError("weak mode on '" + o.problem +
                         "' needs --reference-value (E of the squared first coordinate)");
      }
      series = ff::weak_error(problem.system, kind, [](const ff::Vec& x) { return x(0) * x(0); },
                              reference, problem.start, c);
    } else {
      if (o.ref_exp < last) {
        throw UsageError("--ref-exp must be at least the finest ladder exponent " +
                         std::to_string(last));
      }
      ff::StrongConfig c;
      c.t_end = o.t;
      c.ladder = ladder;
      c.reference = ff::parse_scheme(o.reference);
      c.h_ref = std::ldexp(o.t, -o.ref_exp);
      c.ref_substeps = o.ref_substeps;
      c.n_paths = o.paths;
      c.seed = o.seed;
      c.threads = o.threads;
      c.params = params;
      const ff::StrongResult r = ff::coupled_strong_error(
          problem.system, std::vector<ff::SchemeKind>{kind}, problem.start, c);
      series = o.mode == "strong" ? r.coupled.front() : r.distributional.front();
    }
  }
  std::ostringstream buf;
  ff::write_series_csv(buf, series);
  Output out(o.out);
  out.stream() << buf.str();
  return 0;
}

struct SphereOptions {
  double t = 1.0, h = 1.0 / 256.0;
  std::size_t paths = 100000;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out, trajectory;
};

int cmd_sphere(const SphereOptions& o) {
  ff::steps_for(o.t, o.h);
  if (o.paths == 0) throw UsageError("--paths must be > 0");
  constexpr std::size_t chunk = 1024;
  const std::size_t n_chunks = (o.paths + chunk - 1) / chunk;
  struct Acc {
    double sum = 0.0, sum_sq = 0.0, norm = 0.0;
  };
  std::vector<Acc> acc(n_chunks);
  ff::parallel_for(n_chunks, ff::resolve_threads(o.threads), [&](std::size_t c) {
    for (std::size_t p = c * chunk; p < std::min(o.paths, (c + 1) * chunk); ++p) {
      const ff::SpherePath path = ff::sphere_bm_path(o.seed, p, o.t, o.h);
      const double v = path.points.back().z();  // <x_T, x_0> with x_0 the north pole
      acc[c].sum += v;
      acc[c].sum_sq += v * v;
      acc[c].norm = std::max(acc[c].norm, path.max_norm_deviation);
    }
  });
  Acc total;
  for (const auto& a : acc) {
    total.sum += a.sum;
    total.sum_sq += a.sum_sq;
    total.norm = std::max(total.norm, a.norm);
  }
  const double n = static_cast<double>(o.paths);
  const double mean = total.sum / n;
  const double var = o.paths > 1 ? std::max(0.0, (total.sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;

  std::ostringstream buf;
  buf << "h,mean_inner,stderr,expected\n"
      << ff::csv::num(o.h) << ',' << ff::csv::num(mean) << ',' << ff::csv::num(std::sqrt(var / n))
      << ',' << ff::csv::num(std::exp(-o.t)) << '\n'
      << "# max_norm_deviation=" << ff::csv::num(total.norm) << '\n';
  Output out(o.out);
  out.stream() << buf.str();

  if (!o.trajectory.empty()) {
    const ff::SpherePath path = ff::sphere_bm_path(o.seed, 0, o.t, o.h);
    std::ofstream traj(o.trajectory);
    if (!traj) throw ff::Error("cannot open trajectory file '" + o.trajectory + "'");
    traj << "t,x,y,z\n";
    for (std::size_t k = 0; k < path.points.size(); ++k) {
      const auto& x = path.points[k];
      traj << ff::csv::num(static_cast<double>(k) * o.h) << ',' << ff::csv::num(x.x()) << ','
           << ff::csv::num(x.y()) << ',' << ff::csv::num(x.z()) << '\n';
    }
  }
  return 0;
}

struct DevelopOptions {
  std::string curve, surface = "sphere", out;
  int substeps = 200;
};

int cmd_develop(const DevelopOptions& o) {
  if (o.surface != "sphere") {
    throw UsageError("unknown surface '" + o.surface + "'; valid names: sphere");
  }
  std::ifstream in(o.curve);
  if (!in) throw UsageError("cannot open curve file '" + o.curve + "'");
  ff::csv::Table table;
  try {
    table = ff::csv::read_numeric(in);
  } catch (const ff::InvalidArgument& err) {
    throw UsageError(o.curve + ": " + err.what());
  }
  if (table.header.size() != 3) throw UsageError(o.curve + ": expected columns t,q1,q2");
  if (table.rows.empty()) throw UsageError(o.curve + ": no curve samples");
  std::vector<double> t;
  std::vector<ff::Vec> q;
  for (const auto& row : table.rows) {
    t.push_back(row[0]);
    ff::Vec v(2);
    v << row[1], row[2];
    q.push_back(v);
  }
  const ff::EmbeddedSurface surface = ff::unit_sphere();
  const ff::RollingState north{ff::Vec::Unit(3, 2), ff::Mat::Identity(3, 3)};
  ff::DevelopedCurve dev;
  try {
    dev = ff::develop_curve(surface, t, q, north, o.substeps);
  } catch (const ff::InvalidArgument& err) {
    throw UsageError(o.curve + ": " + err.what());
  }

  std::ostringstream buf;
  buf << "t,x,y,z\n";
  for (std::size_t k = 0; k < dev.points.size(); ++k) {
    buf << ff::csv::num(t[k]);
    for (int i = 0; i < 3; ++i) buf << ',' << ff::csv::num(dev.points[k](i));
    buf << '\n';
  }
  buf << "# final_frame=";
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) buf << (i + j ? " " : "") << ff::csv::num(dev.final_state.A(i, j));
  buf << "\n# max_constraint_residual=" << ff::csv::num(dev.max_constraint_residual) << '\n';
  Output out(o.out);
  out.stream() << buf.str();
  return 0;
}

int cmd_selftest(std::uint64_t seed, const std::string& out_path) {
  const auto results = ff::run_selftest(seed);
  std::ostringstream buf;
  buf << "check,passed,value,tolerance\n";
  bool ok = true;
  for (const auto& r : results) {
    buf << r.name << ',' << (r.passed ? "yes" : "no") << ',' << ff::csv::num(r.value) << ','
        << ff::csv::num(r.tolerance) << '\n';
    ok = ok && r.passed;
  }
  Output out(out_path);
  out.stream() << buf.str();
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"frameflow: frame-bundle and orthogonal-invariance SDE schemes"};
  app.require_subcommand(1);
  // "--h" is the step size, so help is long-form only.
  app.set_help_flag("--help", "Print this help message and exit");
  int threads = 0;

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate paths and write them as CSV");
  simulate->add_option("--problem", sim.problem, "Preset name")->required();
  simulate->add_option("--scheme", sim.scheme, "Scheme name")->required();
  simulate->add_option("--h", sim.h, "Step size")->check(CLI::PositiveNumber);
  simulate->add_option("--t", sim.t, "Terminal time")->check(CLI::PositiveNumber);
  simulate->add_option("--paths", sim.paths, "Number of paths");
  simulate->add_option("--seed", sim.seed, "Seed");
  simulate->add_option("--substeps", sim.substeps, "Substeps M for iterated integrals")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--ode-substeps", sim.ode_substeps, "RK4 substeps for cg05/cg10")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--out", sim.out, "Output path (stdout when omitted)");

  ConvergenceOptions conv;
  auto* convergence = app.add_subcommand("convergence", "Error ladder and fitted order");
  convergence->add_option("--problem", conv.problem, "Preset name, or sphere")->required();
  convergence->add_option("--scheme", conv.scheme, "Scheme name");
  convergence->add_option("--mode", conv.mode, "strong, weak or w2");
  convergence->add_option("--ladder", conv.ladder, "Exponent range a:b for h = T 2^-k")
      ->required();
  convergence->add_option("--paths", conv.paths, "Number of paths");
  convergence->add_option("--seed", conv.seed, "Seed");
  convergence->add_option("--t", conv.t, "Terminal time")->check(CLI::PositiveNumber);
  convergence->add_option("--reference", conv.reference, "Reference scheme (strong modes)");
  convergence->add_option("--ref-exp", conv.ref_exp, "Reference step T 2^-k");
  convergence->add_option("--ref-substeps", conv.ref_substeps, "Reference substeps M");
  convergence->add_option("--substeps", conv.substeps, "Finest-rung substeps (weak mode)");
  convergence->add_option("--ode-substeps", conv.ode_substeps, "RK4 substeps for cg05/cg10");
  convergence->add_option("--reference-value", conv.reference_value,
                          "Exact E f(X_T) for weak mode");
  convergence->add_flag("--no-variance-reduction", conv.no_variance_reduction,
                        "Plain Monte Carlo for the gbm1d weak experiment");
  convergence->add_option("--out", conv.out, "Output path (stdout when omitted)");

  SphereOptions sph;
  auto* sphere = app.add_subcommand("sphere", "Brownian motion on S^2 by Lie-Euler steps");
  sphere->add_option("--t", sph.t, "Terminal time")->check(CLI::PositiveNumber);
  sphere->add_option("--h", sph.h, "Step size")->check(CLI::PositiveNumber);
  sphere->add_option("--paths", sph.paths, "Number of paths");
  sphere->add_option("--seed", sph.seed, "Seed");
  sphere->add_option("--trajectory", sph.trajectory, "Also write path 0 as t,x,y,z");
  sphere->add_option("--out", sph.out, "Output path (stdout when omitted)");

  DevelopOptions dev;
  auto* develop = app.add_subcommand("develop", "Roll a planar curve onto a surface");
  develop->add_option("--curve", dev.curve, "CSV with columns t,q1,q2")->required();
  develop->add_option("--surface", dev.surface, "Surface name (sphere)");
  develop->add_option("--substeps", dev.substeps, "RK4 substeps per segment")
      ->check(CLI::PositiveNumber);
  develop->add_option("--out", dev.out, "Output path (stdout when omitted)");

  std::uint64_t selftest_seed = 1;
  std::string selftest_out;
  auto* selftest = app.add_subcommand("selftest", "Run the invariant suite");
  selftest->add_option("--seed", selftest_seed, "Seed");
  selftest->add_option("--out", selftest_out, "Output path (stdout when omitted)");

  for (auto* sub : {convergence, sphere}) {
    sub->add_option("--threads", threads, "Worker threads (default: FRAMEFLOW_THREADS or all cores)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    conv.threads = threads;
    sph.threads = threads;
    if (*simulate) return cmd_simulate(sim);
    if (*convergence) {
      if (conv.problem != "sphere" && conv.scheme.empty()) {
        throw UsageError("--scheme is required for problem '" + conv.problem + "'");
      }
      return cmd_convergence(conv);
    }
    if (*sphere) return cmd_sphere(sph);
    if (*develop) return cmd_develop(dev);
    if (*selftest) return cmd_selftest(selftest_seed, selftest_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ff::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
