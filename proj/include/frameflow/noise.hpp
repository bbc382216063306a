#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "frameflow/linalg.hpp"

namespace frameflow {

/// Uniform grid t_start + k*h, k = 0..n_steps.
class TimeGrid {
 public:
  TimeGrid(double t_start, double t_end, std::size_t n_steps);

  double t_start() const { return t_start_; }
  double t_end() const { return t_end_; }
  std::size_t n_steps() const { return n_steps_; }
  double h() const { return (t_end_ - t_start_) / static_cast<double>(n_steps_); }
  double time(std::size_t k) const { return t_start_ + static_cast<double>(k) * h(); }

 private:
  double t_start_;
  double t_end_;
  std::size_t n_steps_;
};

/// Driving data for one step: increment, Ito iterated integrals J_ij, and the
/// time/Wiener cross integrals J_0i = int (s - t) dB^i, J_i0 = int (B^i_s - B^i_t) ds.
struct StepInput {
  Vec dw;
  Mat levy;
  Vec cross0;
  Vec crossI;
  double h = 0.0;

  /// Input seen through the orthogonal change of noise dB -> R dB.
  StepInput rotated(const Mat& r) const;
};

/// Counter-based generator: (key, counter) -> four 32-bit words (Philox4x32-10).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  explicit Philox4x32(std::uint64_t key) : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}
  Counter operator()(Counter ctr) const;

  /// Two independent standard normals for the given counter.
  std::array<double, 2> normals(const Counter& ctr) const;

 private:
  std::array<std::uint32_t, 2> key_;
};

/// Brownian increments plus iterated integrals on a uniform grid.
class WienerIncrements {
 public:
  WienerIncrements(int dim, TimeGrid grid, std::size_t substeps);

  int dim() const { return dim_; }
  const TimeGrid& grid() const { return grid_; }
  std::size_t n_steps() const { return grid_.n_steps(); }
  std::size_t substeps() const { return substeps_; }

  Eigen::Map<const Eigen::VectorXd> dw(std::size_t k) const;
  Eigen::Map<const Eigen::MatrixXd> levy(std::size_t k) const;
  Eigen::Map<const Eigen::VectorXd> cross0(std::size_t k) const;
  Eigen::Map<const Eigen::VectorXd> crossI(std::size_t k) const;

  Eigen::Map<Eigen::VectorXd> dw(std::size_t k);
  Eigen::Map<Eigen::MatrixXd> levy(std::size_t k);
  Eigen::Map<Eigen::VectorXd> cross0(std::size_t k);
  Eigen::Map<Eigen::VectorXd> crossI(std::size_t k);

  StepInput step(std::size_t k) const;

  /// Largest violation of the shuffle and integration-by-parts identities.
  double identity_residual() const;

  friend bool operator==(const WienerIncrements& a, const WienerIncrements& b);

 private:
  int dim_;
  TimeGrid grid_;
  std::size_t substeps_;
  std::vector<double> dw_, levy_, cross0_, crossI_;
};

/// Generate increments for path `stream` as a pure function of (seed, stream, step, substep).
/// Each step is the sum of `substeps` Gaussian sub-increments; iterated integrals are the
/// discrete sums over the substep path (Ito sums for J_ij, piecewise-linear for the time
/// integrals).
WienerIncrements sample_increments(std::uint64_t seed, std::uint64_t stream, const TimeGrid& grid,
                                   int dim, std::size_t substeps = 64);

/// Restrict to the grid with step factor*h using Chen's relations.
WienerIncrements chen_coarsen(const WienerIncrements& fine, std::size_t factor);

/// Increments of B_t + mu t, obtained exactly from those of B:
/// J'_ij = J_ij + mu_j J_i0 + mu_i J_0j + mu_i mu_j h^2 / 2, both cross integrals gain mu h^2 / 2.
WienerIncrements with_drift(const WienerIncrements& incr, const Vec& mu);

/// Debug dump with header `step,i,j,dw_i,levy_ij`.
void write_increments_csv(std::ostream& out, const WienerIncrements& incr);

}  // namespace frameflow
