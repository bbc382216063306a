#include "frameflow/convergence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "frameflow/csv.hpp"
#include "frameflow/development.hpp"

namespace frameflow {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::StrongCoupled: return "strong-coupled";
    case ErrorKind::Weak: return "weak";
    case ErrorKind::Wasserstein2: return "wasserstein2";
  }
  return "unknown";
}

OrderFit fit_order(const ErrorSeries& series) {
  OrderFit fit;
  std::vector<double> xs, ys;
  for (const auto& e : series.entries) {
    if (!(e.error >= 1e-13) || !(e.h > 0.0)) {
      fit.excluded_h.push_back(e.h);
      continue;
    }
    xs.push_back(std::log(e.h));
    ys.push_back(std::log(e.error));
  }
  if (xs.size() < 3) {
    throw InvalidArgument("fit_order: need at least 3 entries with error >= 1e-13, have " +
                          std::to_string(xs.size()));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw InvalidArgument("fit_order: step sizes must not all coincide");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy == 0.0) {
    fit.r_squared = 1.0;
  } else {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
      ss_res += r * r;
    }
    fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  return fit;
}

namespace {

std::vector<double> quantile_subsample(const std::vector<double>& sorted, std::size_t n) {
  std::vector<double> out(n);
  const std::size_t m = sorted.size();
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = sorted[std::min(m - 1, (2 * k + 1) * m / (2 * n))];
  }
  return out;
}

}  // namespace

double wasserstein2_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("wasserstein2_1d: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a.size() > b.size()) a = quantile_subsample(a, b.size());
  if (b.size() > a.size()) b = quantile_subsample(b, a.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc / static_cast<double>(a.size()));
}

std::vector<double> dyadic_ladder(double t_end, int first, int last) {
  if (!(t_end > 0.0)) throw InvalidArgument("dyadic_ladder: T must be > 0");
  if (last < first) throw InvalidArgument("dyadic_ladder: need first <= last");
  std::vector<double> out;
  for (int k = first; k <= last; ++k) out.push_back(std::ldexp(t_end, -k));
  return out;
}

std::size_t steps_for(double t_end, double h) {
  if (!(h > 0.0) || !(t_end > 0.0)) throw InvalidArgument("step size and T must be > 0");
  const double ratio = t_end / h;
  const long long n = std::llround(ratio);
  if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * ratio) {
    throw InvalidArgument("step h = " + csv::num(h) + " does not divide T = " + csv::num(t_end));
  }
  return static_cast<std::size_t>(n);
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("FRAMEFLOW_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

void check_ladder(const std::vector<double>& ladder) {
  if (ladder.empty()) throw InvalidArgument("ladder is empty");
  for (std::size_t i = 1; i < ladder.size(); ++i) {
    if (!(ladder[i] < ladder[i - 1])) throw InvalidArgument("ladder must be strictly decreasing");
  }
}

struct MeanAndError {
  double mean;
  double std_error;
};

// Batch means over contiguous blocks of path indices.
MeanAndError batch_means(const std::vector<double>& values, std::size_t batches) {
  const std::size_t n = values.size();
  double total = 0.0;
  for (double v : values) total += v;
  const double mean = total / static_cast<double>(n);
  const std::size_t b = std::min(batches, n);
  if (b < 2) return {mean, 0.0};
  std::vector<double> means(b);
  for (std::size_t k = 0; k < b; ++k) {
    const std::size_t lo = k * n / b, hi = (k + 1) * n / b;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += values[i];
    means[k] = s / static_cast<double>(hi - lo);
  }
  double mm = 0.0;
  for (double m : means) mm += m;
  mm /= static_cast<double>(b);
  double var = 0.0;
  for (double m : means) var += (m - mm) * (m - mm);
  var /= static_cast<double>(b - 1);
  return {mean, std::sqrt(var / static_cast<double>(b))};
}

bool same_state(const FramePoint& a, const FramePoint& b) {
  return a.x.size() == b.x.size() && a.e.size() == b.e.size() && a.x == b.x && a.e == b.e;
}

}  // namespace

StrongResult coupled_strong_error(const VectorFieldSystem& sys,
                                  const std::vector<SchemeKind>& schemes, const Vec& x0,
                                  const StrongConfig& config) {
  check_ladder(config.ladder);
  if (schemes.empty()) throw InvalidArgument("coupled_strong_error: no schemes given");
  if (config.n_paths == 0) throw InvalidArgument("coupled_strong_error: n_paths must be > 0");
  if (config.reference != SchemeKind::Milstein && !is_frame_scheme(config.reference)) {
    throw InvalidArgument("reference scheme must be frame-based or milstein");
  }
  const std::size_t n_ref = steps_for(config.t_end, config.h_ref);
  std::vector<std::size_t> factors;
  for (double h : config.ladder) {
    const std::size_t n = steps_for(config.t_end, h);
    if (n > n_ref || n_ref % n != 0) {
      throw InvalidArgument("ladder step h = " + csv::num(h) +
                            " is not an integer multiple of the reference step " +
                            csv::num(config.h_ref));
    }
    factors.push_back(n_ref / n);
  }
  Coupling coupling = config.coupling;
  if (coupling == Coupling::Auto) {
    coupling = is_frame_scheme(config.reference) ? Coupling::FrameRotation : Coupling::SameNoise;
  }
  if (coupling == Coupling::FrameRotation && !is_frame_scheme(config.reference)) {
    throw InvalidArgument("frame-rotation coupling needs a frame-bundle reference");
  }

  const std::size_t n_paths = config.n_paths;
  const std::size_t n_rungs = config.ladder.size();
  const std::size_t n_schemes = schemes.size();
  const FramePoint start = initial_frame_point(sys, x0);
  const Mat identity = Mat::Identity(sys.dim, sys.dim);

  // [scheme][rung][path]
  std::vector<std::vector<std::vector<double>>> sq(
      n_schemes, std::vector<std::vector<double>>(n_rungs, std::vector<double>(n_paths)));
  auto first = sq;
  std::vector<double> ref_first(n_paths);

  parallel_for(n_paths, resolve_threads(config.threads), [&](std::size_t p) {
    try {
      const WienerIncrements fine = sample_increments(
          config.seed, p, TimeGrid(0.0, config.t_end, n_ref), sys.dim, config.ref_substeps);
      const std::vector<FramePoint> ref =
          simulate_path(sys, config.reference, start, fine, config.params);
      const Vec& target = ref.back().x;
      ref_first[p] = target(0);
      for (std::size_t r = 0; r < n_rungs; ++r) {
        const WienerIncrements coarse = chen_coarsen(fine, factors[r]);
        for (std::size_t s = 0; s < n_schemes; ++s) {
          FramePoint state = start;
          for (std::size_t k = 0; k < coarse.n_steps(); ++k) {
            StepInput in = coarse.step(k);
            if (coupling == Coupling::FrameRotation) {
              const FramePoint& rp = ref[k * factors[r]];
              if (!same_state(state, rp)) {
                const Mat r_ref = frame_rotation(sys, rp);
                const Mat r_s = is_frame_scheme(schemes[s]) ? frame_rotation(sys, state) : identity;
                in = in.rotated(r_s.transpose() * r_ref);
              }
            }
            try {
              state = step(sys, schemes[s], state, in, config.params);
            } catch (const Error& err) {
              throw StepError(k, std::string(scheme_name(schemes[s])) + " at h = " +
                                     csv::num(config.ladder[r]) + ": " + err.what());
            }
          }
          sq[s][r][p] = (state.x - target).squaredNorm();
          first[s][r][p] = state.x(0);
        }
      }
    } catch (const Error& err) {
      throw Error("path " + std::to_string(p) + ": " + err.what());
    }
  });

  StrongResult result;
  for (std::size_t s = 0; s < n_schemes; ++s) {
    ErrorSeries coupled{{}, ErrorKind::StrongCoupled, std::string(scheme_name(schemes[s]))};
    ErrorSeries dist{{}, ErrorKind::Wasserstein2, std::string(scheme_name(schemes[s]))};
    for (std::size_t r = 0; r < n_rungs; ++r) {
      const MeanAndError ms = batch_means(sq[s][r], config.batches);
      const double rms = std::sqrt(ms.mean);
      // Delta method for the square root.
      const double se = rms > 0.0 ? ms.std_error / (2.0 * rms) : 0.0;
      coupled.entries.push_back({config.ladder[r], rms, se});

      const std::size_t b = std::min(config.batches, n_paths);
      std::vector<double> per_batch;
      for (std::size_t k = 0; b >= 2 && k < b; ++k) {
        const std::size_t lo = k * n_paths / b, hi = (k + 1) * n_paths / b;
        per_batch.push_back(wasserstein2_1d(
            std::vector<double>(first[s][r].begin() + lo, first[s][r].begin() + hi),
            std::vector<double>(ref_first.begin() + lo, ref_first.begin() + hi)));
      }
      double spread = 0.0;
      if (per_batch.size() >= 2) {
        double m = 0.0;
        for (double v : per_batch) m += v;
        m /= static_cast<double>(per_batch.size());
        for (double v : per_batch) spread += (v - m) * (v - m);
        spread = std::sqrt(spread / static_cast<double>(per_batch.size() - 1) /
                           static_cast<double>(per_batch.size()));
      }
      dist.entries.push_back({config.ladder[r], wasserstein2_1d(first[s][r], ref_first), spread});
    }
    result.coupled.push_back(std::move(coupled));
    result.distributional.push_back(std::move(dist));
  }
  return result;
}

ErrorSeries coupled_strong_error(const VectorFieldSystem& sys, SchemeKind scheme, const Vec& x0,
                                 const StrongConfig& config) {
  return coupled_strong_error(sys, std::vector<SchemeKind>{scheme}, x0, config).coupled.front();
}

namespace {

// Paths are reduced in fixed chunks so sums do not depend on the thread schedule.
constexpr std::size_t kChunk = 1024;

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
};

MeanAndError reduce_chunks(const std::vector<Moments>& chunks, std::size_t n) {
  Moments total;
  for (const auto& c : chunks) {
    total.sum += c.sum;
    total.sum_sq += c.sum_sq;
  }
  const double nn = static_cast<double>(n);
  const double mean = total.sum / nn;
  const double var = n > 1 ? std::max(0.0, (total.sum_sq - nn * mean * mean) / (nn - 1.0)) : 0.0;
  return {mean, std::sqrt(var / nn)};
}

}  // namespace

std::vector<ErrorSeries> weak_error(const VectorFieldSystem& sys,
                                    const std::vector<SchemeKind>& schemes,
                                    const std::function<double(const Vec&)>& f,
                                    double reference_value, const Vec& x0,
                                    const WeakConfig& config) {
  check_ladder(config.ladder);
  if (schemes.empty()) throw InvalidArgument("weak_error: no schemes given");
  if (config.n_paths == 0) throw InvalidArgument("weak_error: n_paths must be > 0");
  if (config.substeps == 0) throw InvalidArgument("weak_error: substeps must be > 0");
  const std::size_t n_fine = steps_for(config.t_end, config.ladder.back());
  std::vector<std::size_t> factors;
  for (double h : config.ladder) {
    const std::size_t n = steps_for(config.t_end, h);
    if (n_fine % n != 0) {
      throw InvalidArgument("ladder step h = " + csv::num(h) +
                            " is not an integer multiple of the finest step");
    }
    factors.push_back(n_fine / n);
  }
  const bool drifted = config.girsanov_drift.size() > 0;
  if (drifted && config.girsanov_drift.size() != sys.dim) {
    throw InvalidArgument("weak_error: girsanov_drift has the wrong dimension");
  }
  const std::size_t n_rungs = config.ladder.size();
  const std::size_t n_schemes = schemes.size();
  const std::size_t n_chunks = (config.n_paths + kChunk - 1) / kChunk;
  const FramePoint start = initial_frame_point(sys, x0);

  // [scheme][rung][chunk]
  std::vector<std::vector<std::vector<Moments>>> acc(
      n_schemes, std::vector<std::vector<Moments>>(n_rungs, std::vector<Moments>(n_chunks)));

  parallel_for(n_chunks, resolve_threads(config.threads), [&](std::size_t c) {
    const std::size_t lo = c * kChunk, hi = std::min(config.n_paths, lo + kChunk);
    for (std::size_t p = lo; p < hi; ++p) {
      WienerIncrements fine = sample_increments(
          config.seed, p, TimeGrid(0.0, config.t_end, n_fine), sys.dim, config.substeps);
      double weight = 1.0;
      if (drifted) {
        fine = with_drift(fine, config.girsanov_drift);
        Vec b = Vec::Zero(sys.dim);
        for (std::size_t k = 0; k < n_fine; ++k) b += fine.dw(k);
        weight = std::exp(-config.girsanov_drift.dot(b) +
                          0.5 * config.girsanov_drift.squaredNorm() * config.t_end);
      }
      for (std::size_t r = 0; r < n_rungs; ++r) {
        const WienerIncrements incr = factors[r] == 1 ? fine : chen_coarsen(fine, factors[r]);
        double shift = 0.0;
        for (const auto& cv : config.control_variates) shift += cv.sample(incr, x0);
        for (std::size_t s = 0; s < n_schemes; ++s) {
          FramePoint state = start;
          for (std::size_t k = 0; k < incr.n_steps(); ++k) {
            try {
              state = step(sys, schemes[s], state, incr.step(k), config.params);
            } catch (const Error& err) {
              throw Error("path " + std::to_string(p) + ", step " + std::to_string(k) + ": " +
                          err.what());
            }
          }
          const double v = weight * (f(state.x) - shift);
          acc[s][r][c].sum += v;
          acc[s][r][c].sum_sq += v * v;
        }
      }
    }
  });

  std::vector<ErrorSeries> out;
  for (std::size_t s = 0; s < n_schemes; ++s) {
    ErrorSeries series{{}, ErrorKind::Weak, std::string(scheme_name(schemes[s]))};
    for (std::size_t r = 0; r < n_rungs; ++r) {
      const MeanAndError m = reduce_chunks(acc[s][r], config.n_paths);
      double estimate = m.mean;
      for (const auto& cv : config.control_variates) {
        estimate += cv.mean(config.ladder[r], config.t_end, x0);
      }
      series.entries.push_back({config.ladder[r], std::abs(estimate - reference_value), m.std_error});
    }
    out.push_back(std::move(series));
  }
  return out;
}

ErrorSeries weak_error(const VectorFieldSystem& sys, SchemeKind scheme,
                       const std::function<double(const Vec&)>& f, double reference_value,
                       const Vec& x0, const WeakConfig& config) {
  return weak_error(sys, std::vector<SchemeKind>{scheme}, f, reference_value, x0, config).front();
}

std::vector<ControlVariate> gbm_square_control_variates() {
  // Y = x0 exp(B_T - T/2) is the exact solution on the same noise, E Y^2 = x0^2 e^T.
  ControlVariate exact;
  exact.name = "exact-solution";
  exact.sample = [](const WienerIncrements& incr, const Vec& x0) {
    double b = 0.0;
    for (std::size_t k = 0; k < incr.n_steps(); ++k) b += incr.dw(k)(0);
    const double t = incr.grid().t_end() - incr.grid().t_start();
    return x0(0) * x0(0) * std::exp(2.0 * b - t);
  };
  exact.mean = [](double, double t, const Vec& x0) { return x0(0) * x0(0) * std::exp(t); };

  // First-order schemes miss the third Hermite term of each step, so their x^2 differs from
  // Y^2 by about -Y^2 sum_k H3(dw_k) / 3, H3(w) = w^3 - 3 h w. Tilting by Y^2 shifts each
  // dw_k to mean 2h, under which E H3 = (2h)^3; hence E[Y^2 H3(dw_k)] = x0^2 e^T 8 h^3.
  ControlVariate hermite;
  hermite.name = "third-hermite";
  hermite.sample = [](const WienerIncrements& incr, const Vec& x0) {
    const double h = incr.grid().h();
    double b = 0.0, h3 = 0.0;
    for (std::size_t k = 0; k < incr.n_steps(); ++k) {
      const double w = incr.dw(k)(0);
      b += w;
      h3 += w * w * w - 3.0 * h * w;
    }
    const double t = incr.grid().t_end() - incr.grid().t_start();
    return -x0(0) * x0(0) * std::exp(2.0 * b - t) * h3 / 3.0;
  };
  hermite.mean = [](double h, double t, const Vec& x0) {
    return -x0(0) * x0(0) * std::exp(t) * 8.0 * h * h * t / 3.0;
  };
  return {exact, hermite};
}

void use_gbm_square_variance_reduction(WeakConfig& config) {
  config.girsanov_drift = Vec::Constant(1, 2.0);
  config.control_variates = gbm_square_control_variates();
}

ErrorSeries sphere_weak_error(double t_end, const std::vector<double>& ladder,
                              std::size_t n_paths, std::uint64_t seed, int threads) {
  check_ladder(ladder);
  if (n_paths == 0) throw InvalidArgument("sphere_weak_error: n_paths must be > 0");
  const std::size_t n_fine = steps_for(t_end, ladder.back());
  std::vector<std::size_t> factors;
  for (double h : ladder) {
    const std::size_t n = steps_for(t_end, h);
    if (n_fine % n != 0) throw InvalidArgument("sphere ladder is not commensurate");
    factors.push_back(n_fine / n);
  }
  const std::size_t n_chunks = (n_paths + kChunk - 1) / kChunk;
  std::vector<std::vector<Moments>> acc(ladder.size(), std::vector<Moments>(n_chunks));
  parallel_for(n_chunks, resolve_threads(threads), [&](std::size_t c) {
    const std::size_t lo = c * kChunk, hi = std::min(n_paths, lo + kChunk);
    for (std::size_t p = lo; p < hi; ++p) {
      const WienerIncrements fine =
          sample_increments(seed, p, TimeGrid(0.0, t_end, n_fine), 2, 1);
      for (std::size_t r = 0; r < ladder.size(); ++r) {
        const WienerIncrements incr = factors[r] == 1 ? fine : chen_coarsen(fine, factors[r]);
        Mat3 a = Mat3::Identity();
        for (std::size_t k = 0; k < incr.n_steps(); ++k) {
          a = sphere_frame_step(a, incr.dw(k), incr.grid().h());
        }
        const double v = a(2, 2);
        acc[r][c].sum += v;
        acc[r][c].sum_sq += v * v;
      }
    }
  });
  ErrorSeries series{{}, ErrorKind::Weak, "sphere-lie-euler"};
  for (std::size_t r = 0; r < ladder.size(); ++r) {
    const MeanAndError m = reduce_chunks(acc[r], n_paths);
    series.entries.push_back({ladder[r], std::abs(m.mean - std::exp(-t_end)), m.std_error});
  }
  return series;
}

void write_series_csv(std::ostream& out, const ErrorSeries& series) {
  out << "h,error,stderr\n";
  for (const auto& e : series.entries) {
    out << csv::num(e.h) << ',' << csv::num(e.error) << ',' << csv::num(e.std_error) << '\n';
  }
  std::string slope = "nan", r2 = "nan";
  try {
    const OrderFit fit = fit_order(series);
    slope = csv::num(fit.slope);
    r2 = csv::num(fit.r_squared);
  } catch (const InvalidArgument&) {
  }
  out << "# slope=" << slope << " r2=" << r2 << " kind=" << error_kind_name(series.kind) << '\n';
}

}  // namespace frameflow
