#include "frameflow/selftest.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "frameflow/convergence.hpp"
#include "frameflow/development.hpp"
#include "frameflow/presets.hpp"
#include "frameflow/schemes.hpp"

namespace frameflow {

namespace {

CheckResult below(std::string name, double value, double tolerance, std::string detail = {}) {
  return {std::move(name), value <= tolerance, value, tolerance, std::move(detail)};
}

Mat rotation2(double theta) {
  Mat r(2, 2);
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

double flat_exactness(std::uint64_t seed) {
  const Problem flat = make_problem("flat");
  const TimeGrid grid(0.0, 1.0, 4);
  double worst = 0.0;
  for (const auto& name : scheme_names()) {
    const SchemeKind kind = parse_scheme(name);
    for (std::uint64_t p = 0; p < 10; ++p) {
      const WienerIncrements incr = sample_increments(seed, p, grid, 2, 16);
      const auto path =
          simulate_path(flat.system, kind, initial_frame_point(flat.system, flat.start), incr);
      Vec b = Vec::Zero(2);
      for (std::size_t k = 0; k < grid.n_steps(); ++k) b += incr.dw(k);
      const Vec exact = flat.start + flat.system.drift(flat.start) * 1.0 + b;
      worst = std::max(worst, (path.back().x - exact).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

double commuting_reduction(std::mt19937_64& rng, std::uint64_t seed) {
  const Problem p = make_problem("diag-commuting");
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const TimeGrid grid(0.0, 0.1, 1);
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    Vec x(2);
    x << u(rng), u(rng);
    StepInput in = sample_increments(seed, k, grid, 2, 8).step(0);
    const Vec cmt = cmt_step(p.system, x, in);
    in.levy = 0.5 * (in.dw * in.dw.transpose() - in.h * Mat::Identity(2, 2));
    worst = std::max(worst, (cmt - milstein_step(p.system, x, in)).cwiseAbs().maxCoeff());
  }
  return worst;
}

std::array<double, 2> christoffel_checks(std::mt19937_64& rng) {
  const Problem p = make_problem("noncomm2d");
  std::uniform_real_distribution<double> u1(0.5, 2.0), u2(-1.0, 1.0);
  double disagreement = 0.0, asymmetry = 0.0;
  for (int k = 0; k < 20; ++k) {
    Vec x(2);
    x << u1(rng), u2(rng);
    const ConnectionEval a = coordinate_christoffel(p.system, x);
    const ConnectionEval b = christoffel_from_metric(p.system, x);
    disagreement = std::max(disagreement, (a.gamma - b.gamma).max_abs());
    asymmetry = std::max(asymmetry, a.max_asymmetry());
  }
  return {disagreement, asymmetry};
}

double weak_commutativity(std::mt19937_64& rng) {
  const Problem p = make_problem("noncomm2d");
  const auto& sys = p.system;
  std::uniform_real_distribution<double> u1(0.5, 2.0), u2(-1.0, 1.0),
      angle(0.0, 2.0 * std::numbers::pi);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    Vec x(2);
    x << u1(rng), u2(rng);
    const FramePoint fp{x, checked_frame(sys, x) * rotation2(angle(rng))};
    const BundleVec r = pack(fp);
    const auto f = horizontal_fields(sys, r);
    auto derivative = [&](int field, const BundleVec& along) {
      const double eps = 1e-6;
      return BundleVec((horizontal_fields(sys, r + eps * along)[field] -
                        horizontal_fields(sys, r - eps * along)[field]) /
                       (2.0 * eps));
    };
    const BundleVec bracket = derivative(2, f[1]) - derivative(1, f[2]);
    worst = std::max(worst, bracket.head(2).cwiseAbs().maxCoeff());
  }
  return worst;
}

std::array<double, 2> noise_checks(std::uint64_t seed) {
  const WienerIncrements fine = sample_increments(seed, 0, TimeGrid(0.0, 1.0, 1024), 3, 8);
  const double identities = fine.identity_residual();
  const WienerIncrements twice = chen_coarsen(chen_coarsen(fine, 2), 4);
  const WienerIncrements once = chen_coarsen(fine, 8);
  double chen = 0.0;
  for (std::size_t k = 0; k < once.n_steps(); ++k) {
    chen = std::max(chen, (twice.dw(k) - once.dw(k)).cwiseAbs().maxCoeff());
    chen = std::max(chen, (twice.levy(k) - once.levy(k)).cwiseAbs().maxCoeff());
    chen = std::max(chen, (twice.cross0(k) - once.cross0(k)).cwiseAbs().maxCoeff());
    chen = std::max(chen, (twice.crossI(k) - once.crossI(k)).cwiseAbs().maxCoeff());
  }
  return {identities, chen};
}

std::array<double, 2> sphere_checks(std::uint64_t seed) {
  double norm = 0.0, orth = 0.0;
  for (std::uint64_t p = 0; p < 200; ++p) {
    const SpherePath path = sphere_bm_path(seed, p, 1.0, std::ldexp(1.0, -8));
    norm = std::max(norm, path.max_norm_deviation);
    orth = std::max(orth, path.max_orthogonality_defect);
  }
  return {norm, orth};
}

double exact_flow_ratio() {
  const Eigen::Vector2d dw(0.3, -0.2);
  const Mat3 a = so3_exp(Vec3(0.1, 0.2, -0.3));
  const Mat3 exact = sphere_frame_step(a, dw, 0.01);
  const double e4 = (sphere_truncated_flow(a, dw, 4) - exact).norm();
  const double e8 = (sphere_truncated_flow(a, dw, 8) - exact).norm();
  return e4 / e8;
}

std::array<double, 2> development_checks() {
  const EmbeddedSurface sphere = unit_sphere();
  const RollingState north{Vec::Unit(3, 2), Mat::Identity(3, 3)};
  auto point2 = [](double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
  };
  const DevelopedCurve line = develop_curve(sphere, {0.0, 1.0},
                                            {point2(0.0, 0.0), point2(std::numbers::pi / 2, 0.0)},
                                            north, 200);
  Vec target = Vec::Unit(3, 0);
  const double geodesic = (line.points.back() - target).norm();

  const double s = 0.1;
  const DevelopedCurve square = develop_curve(
      sphere, {0.0, 1.0, 2.0, 3.0, 4.0},
      {point2(0, 0), point2(s, 0), point2(s, s), point2(0, s), point2(0, 0)}, north, 200);
  const double angle = rotation_angle(Mat3(square.final_state.A));
  return {geodesic, std::abs(angle - s * s)};
}

double coupling_consistency(std::uint64_t seed) {
  const Problem p = make_problem("noncomm2d");
  StrongConfig c;
  c.ladder = dyadic_ladder(1.0, 4, 6);
  c.h_ref = std::ldexp(1.0, -6);
  c.ref_substeps = 4;
  c.n_paths = 4;
  c.seed = seed;
  c.threads = 1;
  const ErrorSeries s = coupled_strong_error(p.system, SchemeKind::FrameMilstein, p.start, c);
  return s.entries.back().error;
}

}  // namespace

std::vector<CheckResult> run_selftest(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> out;
  out.push_back(below("flat-exactness", flat_exactness(seed), 1e-12,
                      "every scheme vs x0 + A_0 T + B_T on the flat preset"));
  out.push_back(below("commuting-reduction", commuting_reduction(rng, seed), 1e-12,
                      "cmt vs symmetrized milstein on diag-commuting"));
  const auto chr = christoffel_checks(rng);
  out.push_back(below("christoffel-agreement", chr[0], 1e-5,
                      "structure-constant route vs metric finite differences"));
  out.push_back(below("christoffel-symmetry", chr[1], 1e-12, "coordinate symbols"));
  out.push_back(below("weak-commutativity", weak_commutativity(rng), 1e-4,
                      "base part of [B(e_1), B(e_2)]"));
  const auto noise = noise_checks(seed);
  out.push_back(below("noise-identities", noise[0], 1e-12, "shuffle and J_0i + J_i0 = h dB"));
  out.push_back(below("chen-associativity", noise[1], 1e-12, "(2 then 4) vs 8"));
  const auto sphere = sphere_checks(seed);
  out.push_back(below("sphere-norm", sphere[0], 1e-12, "max | |x| - 1 |"));
  out.push_back(below("sphere-orthogonality", sphere[1], 1e-13, "max |A^T A - I|"));
  const double ratio = exact_flow_ratio();
  out.push_back({"exact-flow-ratio", std::abs(ratio - 16.0) <= 4.0, ratio, 4.0,
                 "RK4 error ratio per substep doubling, expected 16"});
  const auto dev = development_checks();
  out.push_back(below("development-geodesic", dev[0], 1e-6, "endpoint vs (1, 0, 0)"));
  out.push_back(below("development-holonomy", dev[1], 5e-4, "rotation angle vs enclosed area"));
  out.push_back(below("coupling-consistency", coupling_consistency(seed), 0.0,
                      "reference against itself at equal h"));
  return out;
}

}  // namespace frameflow
