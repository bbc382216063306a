#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "frameflow/schemes.hpp"

namespace frameflow {

enum class ErrorKind { StrongCoupled, Weak, Wasserstein2 };
std::string_view error_kind_name(ErrorKind kind);

struct ErrorEntry {
  double h = 0.0;
  double error = 0.0;
  double std_error = 0.0;
};

struct ErrorSeries {
  std::vector<ErrorEntry> entries;
  ErrorKind kind = ErrorKind::StrongCoupled;
  std::string label;
};

struct OrderFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  /// Step sizes dropped because the error sat on the exactness plateau.
  std::vector<double> excluded_h;
};

/// Least squares on (log h, log error). Entries with error < 1e-13 are excluded;
/// throws InvalidArgument when fewer than 3 remain.
OrderFit fit_order(const ErrorSeries& series);

/// Exact empirical W2 in one dimension. The larger sample is reduced to the size of the
/// smaller one by taking its sorted values at evenly spaced quantile positions.
double wasserstein2_1d(std::vector<double> a, std::vector<double> b);

/// h = t_end * 2^-k for k = first..last, strictly decreasing.
std::vector<double> dyadic_ladder(double t_end, int first, int last);

/// Number of steps t_end / h, throwing when h does not divide t_end.
std::size_t steps_for(double t_end, double h);

enum class Coupling {
  /// Frame-bundle reference: frame-rotation coupling; otherwise the same noise.
  Auto,
  /// Every run consumes the same Brownian increments.
  SameNoise,
  /// Each coarse step sees the increment rotated by R_S^T R_ref, where R = sigma(x)^-1 e is
  /// the orthogonal frame rotation of the reference (and of the scheme, for frame schemes)
  /// at the start of the step. This couples the scheme to the weak solution the reference
  /// constructs; the rotated driver is again a Brownian motion.
  FrameRotation,
};

struct StrongConfig {
  double t_end = 1.0;
  std::vector<double> ladder;  // strictly decreasing step sizes
  SchemeKind reference = SchemeKind::FrameMilstein;
  double h_ref = 1.0 / 4096.0;
  /// Substeps per reference step used to sample iterated integrals.
  std::size_t ref_substeps = 256;
  Coupling coupling = Coupling::Auto;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 1;
  /// 0 means FRAMEFLOW_THREADS, falling back to the hardware concurrency.
  int threads = 0;
  std::size_t batches = 20;
  SchemeParams params;
};

struct StrongResult {
  /// One coupled series per scheme, in input order.
  std::vector<ErrorSeries> coupled;
  /// W2 between first-coordinate laws at T, one series per scheme.
  std::vector<ErrorSeries> distributional;
};

/// Runs every scheme on every ladder rung against one shared reference path per sample.
/// All drivers come from a single fine increment object per path via Chen coarsening.
StrongResult coupled_strong_error(const VectorFieldSystem& sys,
                                  const std::vector<SchemeKind>& schemes, const Vec& x0,
                                  const StrongConfig& config);

ErrorSeries coupled_strong_error(const VectorFieldSystem& sys, SchemeKind scheme, const Vec& x0,
                                 const StrongConfig& config);

/// Variance reduction: the engine subtracts `sample` per path and adds back its exact
/// expectation `mean`, so the estimator stays unbiased. `mean` is the expectation under
/// the undrifted Wiener measure; the engine applies any likelihood-ratio weight itself.
struct ControlVariate {
  std::string name;
  std::function<double(const WienerIncrements& incr, const Vec& x0)> sample;
  std::function<double(double h, double t_end, const Vec& x0)> mean;
};

struct WeakConfig {
  double t_end = 1.0;
  std::vector<double> ladder;
  std::size_t n_paths = 10000;
  std::uint64_t seed = 1;
  int threads = 0;
  /// Substeps per step on the finest rung.
  std::size_t substeps = 8;
  SchemeParams params;
  std::vector<ControlVariate> control_variates;
  /// Importance sampling: when non-empty, paths are driven by B_t + mu t and every sample
  /// is weighted by exp(-mu . B_T + |mu|^2 T / 2), which keeps the estimator unbiased.
  Vec girsanov_drift;
};

/// error(h) = |estimate of E f(X^h_T) - reference_value| with common random numbers
/// across rungs and schemes. std_error is the sample standard error of the estimator.
std::vector<ErrorSeries> weak_error(const VectorFieldSystem& sys,
                                    const std::vector<SchemeKind>& schemes,
                                    const std::function<double(const Vec&)>& f,
                                    double reference_value, const Vec& x0,
                                    const WeakConfig& config);

ErrorSeries weak_error(const VectorFieldSystem& sys, SchemeKind scheme,
                       const std::function<double(const Vec&)>& f, double reference_value,
                       const Vec& x0, const WeakConfig& config);

/// Control variates for geometric Brownian motion dX = X dB and f(x) = x^2: the exact
/// solution Y on the same noise, and -Y^2 sum_k H3(dw_k) / 3, the leading gap between Y^2 and
/// the square of a first-order step. Both means are closed-form.
std::vector<ControlVariate> gbm_square_control_variates();

/// Settings that make the d = 1 geometric Brownian motion x^2 experiment resolvable at
/// N = 10^6: drift 2 (under which the weighted Y^2 is constant) plus the control variates.
void use_gbm_square_variance_reduction(WeakConfig& config);

/// Lie-Euler chain on S^2 from the north pole, f = <x_T, e_z>, reference e^-T.
ErrorSeries sphere_weak_error(double t_end, const std::vector<double>& ladder,
                              std::size_t n_paths, std::uint64_t seed, int threads = 0);

/// `h,error,stderr` rows plus `# slope=<v> r2=<v> kind=<v>` (nan when no fit is possible).
void write_series_csv(std::ostream& out, const ErrorSeries& series);

/// Resolve a thread request: >0 as given, else FRAMEFLOW_THREADS, else hardware.
int resolve_threads(int requested);

/// Run body(i) for i in [0, n) on `threads` workers. Exceptions are rethrown on the caller.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

}  // namespace frameflow
