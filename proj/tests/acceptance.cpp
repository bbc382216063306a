// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>

#include "frameflow/convergence.hpp"
#include "frameflow/development.hpp"
#include "frameflow/presets.hpp"
#include "frameflow/schemes.hpp"

using namespace frameflow;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Mat rotation2(double t) {
  Mat r(2, 2);
  r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  return r;
}

Outcome flat_exactness() {
  const Problem flat = make_problem("flat");
  const TimeGrid grid(0.0, 1.0, 4);
  double worst = 0.0;
  for (const auto& name : scheme_names()) {
    const SchemeKind kind = parse_scheme(name);
    for (std::uint64_t p = 0; p < 100; ++p) {
      const auto incr = sample_increments(1, p, grid, 2);
      const auto path =
          simulate_path(flat.system, kind, initial_frame_point(flat.system, flat.start), incr);
      Vec b = Vec::Zero(2);
      for (std::size_t k = 0; k < 4; ++k) b += incr.dw(k);
      const Vec exact = flat.start + vec2(0.3, -0.2) + b;
      worst = std::max(worst, (path.back().x - exact).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-12, fmt("8 schemes x 100 paths, max deviation %.3g (tol 1e-12)", worst)};
}

Outcome commuting_reduction() {
  const Problem p = make_problem("diag-commuting");
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const TimeGrid grid(0.0, 0.1, 1);
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const Vec x = vec2(u(rng), u(rng));
    StepInput in = sample_increments(2, k, grid, 2, 16).step(0);
    const Vec cmt = cmt_step(p.system, x, in);
    in.levy = 0.5 * (in.dw * in.dw.transpose() - in.h * Mat::Identity(2, 2));
    worst = std::max(worst, (cmt - milstein_step(p.system, x, in)).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-12, fmt("1000 states, max |cmt - milstein_sym| %.3g (tol 1e-12)", worst)};
}

Outcome christoffel_agreement() {
  const Problem p = make_problem("noncomm2d");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u1(0.25, 2.5), u2(-2.0, 2.0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Vec x = vec2(u1(rng), u2(rng));
    const ConnectionEval a = christoffel_from_structure(structure_constants(p.system, x));
    const ConnectionEval b = christoffel_from_metric(p.system, x);
    // Compare Gamma(A_p, A_q) = gamma^l_pq A_l - A_p |> A_q against the metric symbols.
    const LocalGeometry g = local_geometry(p.system, x);
    for (int pi = 0; pi < 2; ++pi)
      for (int qi = 0; qi < 2; ++qi) {
        Vec from_structure = -g.directional(pi + 1, qi + 1);
        for (int l = 0; l < 2; ++l) from_structure += a.gamma(l, pi, qi) * g.frame.col(l);
        const Vec from_metric = b.gamma.contract(g.frame.col(pi), g.frame.col(qi));
        worst = std::max(worst, (from_structure - from_metric).cwiseAbs().maxCoeff());
      }
  }
  return {worst <= 1e-5, fmt("100 points, max symbol gap %.3g (tol 1e-5)", worst)};
}

Outcome weak_commutativity() {
  const Problem p = make_problem("noncomm2d");
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u1(0.3, 2.0), u2(-1.0, 1.0),
      ang(0.0, 2.0 * std::numbers::pi);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Vec x = vec2(u1(rng), u2(rng));
    const BundleVec r = pack(FramePoint{x, checked_frame(p.system, x) * rotation2(ang(rng))});
    const auto f = horizontal_fields(p.system, r);
    auto derivative = [&](int field, const BundleVec& along) {
      const double eps = 1e-6;
      return BundleVec((horizontal_fields(p.system, r + eps * along)[field] -
                        horizontal_fields(p.system, r - eps * along)[field]) /
                       (2.0 * eps));
    };
    const BundleVec bracket = derivative(2, f[1]) - derivative(1, f[2]);
    worst = std::max(worst, bracket.head(2).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-4, fmt("20 frame points, max base component %.3g (tol 1e-4)", worst)};
}

Outcome order_ladder() {
  const Problem p = make_problem("noncomm2d");
  StrongConfig c;
  c.ladder = dyadic_ladder(1.0, 4, 9);
  c.reference = SchemeKind::FrameMilstein;
  c.h_ref = std::ldexp(1.0, -12);
  c.ref_substeps = 256;
  c.n_paths = 2000;
  c.seed = 1;
  const StrongResult r = coupled_strong_error(
      p.system, {SchemeKind::EulerMaruyama, SchemeKind::CMT, SchemeKind::CastellGaines05},
      p.start, c);
  const double em = fit_order(r.coupled[0]).slope;
  const double cmt = fit_order(r.coupled[1]).slope;
  const double cg = fit_order(r.coupled[2]).slope;
  const bool ok = em >= 0.35 && em <= 0.65 && cmt >= 0.8 && cmt <= 1.2 && cg >= 0.8 && cg <= 1.2;
  return {ok, fmt("slopes em %.3f [0.35,0.65], cmt %.3f [0.8,1.2], cg05 %.3f [0.8,1.2]", em, cmt,
                  cg)};
}

Outcome ac_weak_order() {
  const Problem g = make_problem("gbm1d");
  WeakConfig c;
  c.ladder = dyadic_ladder(1.0, 2, 6);
  c.n_paths = 1000000;
  c.seed = 1;
  use_gbm_square_variance_reduction(c);
  const auto r = weak_error(g.system, {SchemeKind::AlvesCruzeiro, SchemeKind::EulerMaruyama},
                            [](const Vec& x) { return x(0) * x(0); }, std::exp(1.0), g.start, c);
  const double ac = fit_order(r[0]).slope, em = fit_order(r[1]).slope;
  const double se = r[0].entries.back().std_error;
  return {ac >= 1.5 && em >= 0.7 && em <= 1.3,
          fmt("N = 1e6, slopes ac %.3f (>= 1.5), em %.3f [0.7,1.3]; ac stderr at 2^-6 %.2g", ac,
              em, se)};
}

struct SphereRun {
  double mean = 0, se = 0, norm = 0, orth = 0;
};

SphereRun sphere_run(std::size_t n_paths, double h) {
  constexpr std::size_t chunk = 1024;
  const std::size_t n_chunks = (n_paths + chunk - 1) / chunk;
  std::vector<SphereRun> acc(n_chunks);
  parallel_for(n_chunks, resolve_threads(0), [&](std::size_t c) {
    for (std::size_t p = c * chunk; p < std::min(n_paths, (c + 1) * chunk); ++p) {
      const SpherePath path = sphere_bm_path(1, p, 1.0, h);
      const double v = path.points.back().z();
      acc[c].mean += v;
      acc[c].se += v * v;
      acc[c].norm = std::max(acc[c].norm, path.max_norm_deviation);
      acc[c].orth = std::max(acc[c].orth, path.max_orthogonality_defect);
    }
  });
  SphereRun t;
  for (const auto& a : acc) {
    t.mean += a.mean;
    t.se += a.se;
    t.norm = std::max(t.norm, a.norm);
    t.orth = std::max(t.orth, a.orth);
  }
  const double n = static_cast<double>(n_paths);
  t.mean /= n;
  t.se = std::sqrt((t.se / n - t.mean * t.mean) / (n - 1.0));
  return t;
}

SphereRun sphere_main;

Outcome sphere_invariants() {
  sphere_main = sphere_run(100000, std::ldexp(1.0, -8));
  return {sphere_main.norm < 1e-12 && sphere_main.orth <= 1e-13,
          fmt("1e5 paths, max ||x|-1| %.3g (tol 1e-12), max |A^T A - I| %.3g (tol 1e-13)",
              sphere_main.norm, sphere_main.orth)};
}

Outcome sphere_weak() {
  const double target = std::exp(-1.0);
  const double z = std::abs(sphere_main.mean - target) / sphere_main.se;
  const SphereRun fine = sphere_run(10000, std::ldexp(1.0, -12));
  const double zf = std::abs(fine.mean - target) / fine.se;
  return {z <= 3.0 && zf <= 3.0,
          fmt("mean %.5f, %.2f stderr from e^-1; cross-check h = 2^-12, 1e4 paths: %.5f, %.2f "
              "stderr",
              sphere_main.mean, z, fine.mean, zf)};
}

Outcome exact_flow() {
  const Mat3 a = so3_exp(Vec3(0.1, 0.2, -0.3));
  const Eigen::Vector2d dw(0.3, -0.2);
  const Mat3 exact = sphere_frame_step(a, dw, 0.01);
  double err[4];
  for (int i = 0; i < 4; ++i) err[i] = (sphere_truncated_flow(a, dw, 4 << i) - exact).norm();
  bool ok = true;
  for (int i = 0; i < 3; ++i) ok = ok && std::abs(err[i] / err[i + 1] - 16.0) <= 4.0;
  return {ok, fmt("ratios 4->8 %.2f, 8->16 %.2f, 16->32 %.2f (16 +- 4)", err[0] / err[1],
                  err[1] / err[2], err[2] / err[3])};
}

Outcome development() {
  const EmbeddedSurface s = unit_sphere();
  const RollingState north{Vec::Unit(3, 2), Mat::Identity(3, 3)};
  const DevelopedCurve line =
      develop_curve(s, {0.0, 1.0}, {vec2(0, 0), vec2(std::numbers::pi / 2, 0)}, north, 200);
  const double gap = (line.points.back() - Vec::Unit(3, 0)).norm();
  const double side = 0.1;
  const DevelopedCurve sq = develop_curve(
      s, {0, 1, 2, 3, 4},
      {vec2(0, 0), vec2(side, 0), vec2(side, side), vec2(0, side), vec2(0, 0)}, north, 200);
  const double angle = rotation_angle(Mat3(sq.final_state.A));
  return {gap <= 1e-6 && std::abs(angle - 0.01) <= 5e-4,
          fmt("geodesic endpoint gap %.3g (tol 1e-6), square holonomy %.6f rad (0.01 +- 5e-4)",
              gap, angle)};
}

Outcome noise_identities() {
  const auto incr = sample_increments(1, 0, TimeGrid(0.0, 1.0, 10000), 3, 16);
  const double ident = incr.identity_residual();
  const auto fine = sample_increments(1, 1, TimeGrid(0.0, 1.0, 64), 2, 4);
  const auto twice = chen_coarsen(chen_coarsen(fine, 4), 4);
  const auto once = chen_coarsen(fine, 16);
  double assoc = 0.0;
  for (std::size_t k = 0; k < once.n_steps(); ++k) {
    assoc = std::max(assoc, (twice.levy(k) - once.levy(k)).cwiseAbs().maxCoeff());
    assoc = std::max(assoc, (twice.dw(k) - once.dw(k)).cwiseAbs().maxCoeff());
    assoc = std::max(assoc, (twice.cross0(k) - once.cross0(k)).cwiseAbs().maxCoeff());
  }
  // Direct double sums over the 64 substeps behind coarse step 0, same counter layout.
  const Philox4x32 rng(1);
  const double dt = 1.0 / 256.0;
  std::vector<Eigen::Vector2d> z;
  for (std::uint32_t k = 0; k < 16; ++k)
    for (std::uint32_t m = 0; m < 4; ++m) {
      const auto nz = rng.normals({1u, k, m, 0u});
      z.emplace_back(nz[0] * std::sqrt(dt), nz[1] * std::sqrt(dt));
    }
  Eigen::Vector2d w = Eigen::Vector2d::Zero();
  Eigen::Matrix2d j = Eigen::Matrix2d::Zero();
  for (std::size_t a = 0; a < z.size(); ++a) {
    for (std::size_t b = a + 1; b < z.size(); ++b) j += z[a] * z[b].transpose();
    j += 0.5 * (z[a] * z[a].transpose() - dt * Eigen::Matrix2d::Identity());
    w += z[a];
  }
  const double substep = std::max((w - Eigen::Vector2d(once.dw(0))).cwiseAbs().maxCoeff(),
                                  (j - Eigen::Matrix2d(once.levy(0))).cwiseAbs().maxCoeff());
  return {ident <= 1e-12 && assoc <= 1e-12 && substep <= 1e-12,
          fmt("identities %.3g on 1e4 steps, associativity %.3g, substep recomputation %.3g "
              "(tol 1e-12)",
              ident, assoc, substep)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"flat exactness", flat_exactness},
      {"commuting reduction", commuting_reduction},
      {"christoffel oracle agreement", christoffel_agreement},
      {"weak commutativity", weak_commutativity},
      {"strong order ladder on noncomm2d", order_ladder},
      {"weak order of the order-2 scheme", ac_weak_order},
      {"sphere invariants", sphere_invariants},
      {"sphere weak functional", sphere_weak},
      {"exact-flow property", exact_flow},
      {"development geodesic and holonomy", development},
      {"noise identities", noise_identities},
  };
  int failures = 0, index = 0;
  for (const auto& c : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  %2d %-36s %s  (%.1f s)\n", o.pass ? "PASS" : "FAIL", index, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d of %d criteria passed\n", index - failures, index);
  return failures == 0 ? 0 : 1;
}
