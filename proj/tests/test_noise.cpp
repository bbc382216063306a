#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "frameflow/noise.hpp"

using namespace frameflow;

namespace {

// Direct recomputation of one step over an explicit list of substep increments:
// J_ij as a double sum over the piecewise-linear path, time integrals by quadrature
// of the linear pieces. No Chen composition involved.
struct Direct {
  Eigen::VectorXd dw;
  Eigen::MatrixXd levy;
  Eigen::VectorXd cross0, crossI;
};

Direct direct(const std::vector<Eigen::VectorXd>& z, double dt) {
  const int d = static_cast<int>(z[0].size());
  const std::size_t m = z.size();
  Direct out{Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d), Eigen::VectorXd::Zero(d),
             Eigen::VectorXd::Zero(d)};
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) out.levy += z[a] * z[b].transpose();
    out.levy += 0.5 * (z[a] * z[a].transpose() - dt * Eigen::MatrixXd::Identity(d, d));
    out.dw += z[a];
  }
  Eigen::VectorXd pos = Eigen::VectorXd::Zero(d);
  for (std::size_t a = 0; a < m; ++a) {
    const double s0 = static_cast<double>(a) * dt;
    out.crossI += dt * (pos + 0.5 * z[a]);
    out.cross0 += (s0 + 0.5 * dt) * z[a];
    pos += z[a];
  }
  return out;
}

// Substep increments of the generator, rebuilt from the documented counter layout.
std::vector<Eigen::VectorXd> substeps_of(std::uint64_t seed, std::uint64_t stream,
                                         std::size_t step, std::size_t m, int d, double dt) {
  const Philox4x32 rng(seed);
  std::vector<Eigen::VectorXd> out;
  for (std::size_t s = 0; s < m; ++s) {
    Eigen::VectorXd z(d);
    for (int p = 0; p < (d + 1) / 2; ++p) {
      const auto nz = rng.normals({static_cast<std::uint32_t>(stream),
                                   static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(s),
                                   static_cast<std::uint32_t>(p)});
      z(2 * p) = nz[0] * std::sqrt(dt);
      if (2 * p + 1 < d) z(2 * p + 1) = nz[1] * std::sqrt(dt);
    }
    out.push_back(z);
  }
  return out;
}

double max_diff(const WienerIncrements& a, const WienerIncrements& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.n_steps(); ++k) {
    m = std::max(m, (a.dw(k) - b.dw(k)).cwiseAbs().maxCoeff());
    m = std::max(m, (a.levy(k) - b.levy(k)).cwiseAbs().maxCoeff());
    m = std::max(m, (a.cross0(k) - b.cross0(k)).cwiseAbs().maxCoeff());
    m = std::max(m, (a.crossI(k) - b.crossI(k)).cwiseAbs().maxCoeff());
  }
  return m;
}

}  // namespace

TEST_CASE("philox matches the published known-answer vectors") {
  const Philox4x32 zero(0);
  const auto a = zero({0u, 0u, 0u, 0u});
  CHECK(a == Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});

  const Philox4x32 ones(0xffffffffffffffffull);
  const auto b = ones({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu});
  CHECK(b == Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});

  const Philox4x32 pi(0x299f31d0a4093822ull);
  const auto c = pi({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u});
  CHECK(c == Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("time grid validation") {
  CHECK_THROWS_AS(TimeGrid(0.0, 1.0, 0), InvalidArgument);
  CHECK_THROWS_AS(TimeGrid(1.0, 1.0, 4), InvalidArgument);
  const TimeGrid g(0.0, 1.0, 8);
  CHECK(g.h() == 0.125);
  CHECK(g.time(8) == 1.0);
}

TEST_CASE("increments are a pure function of seed and stream") {
  const TimeGrid g(0.0, 1.0, 16);
  const auto a = sample_increments(7, 3, g, 3, 8);
  const auto b = sample_increments(7, 3, g, 3, 8);
  CHECK(a == b);
  CHECK_FALSE(a == sample_increments(7, 4, g, 3, 8));
  CHECK_FALSE(a == sample_increments(8, 3, g, 3, 8));
}

TEST_CASE("generated steps agree with a direct recomputation from substeps") {
  const std::size_t m = 6;
  const int d = 3;
  const TimeGrid g(0.0, 0.5, 4);
  const double dt = g.h() / static_cast<double>(m);
  const auto incr = sample_increments(11, 5, g, d, m);
  for (std::size_t k = 0; k < g.n_steps(); ++k) {
    const Direct ref = direct(substeps_of(11, 5, k, m, d, dt), dt);
    CHECK((incr.dw(k) - ref.dw).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((incr.levy(k) - ref.levy).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((incr.cross0(k) - ref.cross0).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((incr.crossI(k) - ref.crossI).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("chen coarsening equals the direct sum over all substeps of the coarse step") {
  const std::size_t m = 4, factor = 8;
  const int d = 2;
  const TimeGrid g(0.0, 1.0, 16);
  const double dt = g.h() / static_cast<double>(m);
  const auto coarse = chen_coarsen(sample_increments(3, 9, g, d, m), factor);
  REQUIRE(coarse.n_steps() == 2);
  for (std::size_t c = 0; c < 2; ++c) {
    std::vector<Eigen::VectorXd> z;
    for (std::size_t f = c * factor; f < (c + 1) * factor; ++f) {
      const auto part = substeps_of(3, 9, f, m, d, dt);
      z.insert(z.end(), part.begin(), part.end());
    }
    const Direct ref = direct(z, dt);
    CHECK((coarse.dw(c) - ref.dw).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((coarse.levy(c) - ref.levy).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((coarse.cross0(c) - ref.cross0).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((coarse.crossI(c) - ref.crossI).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("chen coarsening is associative") {
  const auto fine = sample_increments(1, 0, TimeGrid(0.0, 1.0, 64), 3, 4);
  CHECK(max_diff(chen_coarsen(chen_coarsen(fine, 2), 4), chen_coarsen(fine, 8)) < 1e-12);
  CHECK(max_diff(chen_coarsen(chen_coarsen(fine, 4), 2), chen_coarsen(fine, 8)) < 1e-12);
  CHECK(chen_coarsen(fine, 1) == fine);
  CHECK_THROWS_AS(chen_coarsen(fine, 3), InvalidArgument);
  CHECK_THROWS_AS(chen_coarsen(fine, 0), InvalidArgument);
}

TEST_CASE("shuffle and integration-by-parts identities hold to round-off") {
  const auto incr = sample_increments(1, 2, TimeGrid(0.0, 1.0, 10000), 2, 4);
  CHECK(incr.identity_residual() < 1e-12);
  CHECK(chen_coarsen(incr, 100).identity_residual() < 1e-12);
}

TEST_CASE("increment moments") {
  const std::size_t n = 200000;
  const double h = 0.01;
  const auto incr = sample_increments(5, 0, TimeGrid(0.0, h * n, n), 2, 1);
  double mean = 0.0, var = 0.0, cov = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mean += incr.dw(k)(0);
    var += incr.dw(k)(0) * incr.dw(k)(0);
    cov += incr.dw(k)(0) * incr.dw(k)(1);
  }
  mean /= n;
  var /= n;
  cov /= n;
  // Gaussian sampling errors: sd(mean) = sqrt(h/n), sd(var) = h sqrt(2/n), sd(cov) = h/sqrt(n).
  CHECK(std::abs(mean) < 4.0 * std::sqrt(h / n));
  CHECK(std::abs(var - h) < 4.0 * h * std::sqrt(2.0 / n));
  CHECK(std::abs(cov) < 4.0 * h / std::sqrt(double(n)));
}

TEST_CASE("levy area variance") {
  // Area of the M-substep polygonal path: A = 1/2 sum_{a<b} (x_a y_b - y_a x_b), whose
  // variance is (M(M-1)/2) dt^2 / 2 = h^2 (1 - 1/M) / 4.
  const std::size_t n = 100000, m = 256;
  const double h = 0.01;
  const auto incr = sample_increments(2, 0, TimeGrid(0.0, h * n, n), 2, m);
  double s2 = 0.0, s4 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = 0.5 * (incr.levy(k)(0, 1) - incr.levy(k)(1, 0));
    s2 += a * a;
    s4 += a * a * a * a;
  }
  const double var = s2 / n;
  const double expected = h * h / 4.0 * (1.0 - 1.0 / m);
  const double se = std::sqrt((s4 / n - var * var) / n);
  CHECK(std::abs(var - expected) < 4.0 * se);
  CHECK(std::abs(var / (h * h / 4.0) - 1.0) < 0.03);
}

TEST_CASE("rotated input is the input of the rotated Brownian motion") {
  const auto incr = sample_increments(1, 0, TimeGrid(0.0, 1.0, 4), 2, 16);
  Mat r(2, 2);
  const double t = 0.7;
  r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  // Rotating every substep and recomputing gives the same integrals.
  const double dt = 0.25 / 16;
  auto z = substeps_of(1, 0, 2, 16, 2, dt);
  for (auto& v : z) v = Eigen::MatrixXd(r) * v;
  const Direct ref = direct(z, dt);
  const StepInput in = incr.step(2).rotated(r);
  CHECK((in.dw - ref.dw).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((in.levy - ref.levy).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((in.cross0 - ref.cross0).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((in.crossI - ref.crossI).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("drift shift agrees with recomputation from drifted substeps") {
  const std::size_t m = 8;
  const int d = 2;
  const TimeGrid g(0.0, 1.0, 4);
  const double dt = g.h() / static_cast<double>(m);
  Vec mu(2);
  mu << 2.0, -0.5;
  const auto base = sample_increments(4, 1, g, d, m);
  const auto shifted = with_drift(base, mu);
  for (std::size_t k = 0; k < g.n_steps(); ++k) {
    auto z = substeps_of(4, 1, k, m, d, dt);
    for (auto& v : z) v += dt * Eigen::VectorXd(mu);
    const Direct ref = direct(z, dt);
    CHECK((shifted.dw(k) - ref.dw).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((shifted.cross0(k) - ref.cross0).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((shifted.crossI(k) - ref.crossI).cwiseAbs().maxCoeff() < 1e-14);
    // Per substep the shift turns (z z^T - dt I)/2 into ((z + mu dt)(z + mu dt)^T - dt I)/2.
    CHECK((shifted.levy(k) - ref.levy).cwiseAbs().maxCoeff() < 1e-13);
  }
  CHECK(shifted.identity_residual() < 1e-12);
  CHECK(max_diff(chen_coarsen(shifted, 4), with_drift(chen_coarsen(base, 4), mu)) < 1e-13);
  CHECK_THROWS_AS(with_drift(base, Vec::Zero(3)), InvalidArgument);
}

TEST_CASE("increment dump has the documented header") {
  const auto incr = sample_increments(1, 0, TimeGrid(0.0, 1.0, 2), 2, 2);
  std::ostringstream os;
  write_increments_csv(os, incr);
  const std::string s = os.str();
  CHECK(s.rfind("step,i,j,dw_i,levy_ij\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 1 + 2 * 4);
}
