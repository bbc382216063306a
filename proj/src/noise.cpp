#include "frameflow/noise.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

#include "frameflow/csv.hpp"

namespace frameflow {

TimeGrid::TimeGrid(double t_start, double t_end, std::size_t n_steps)
    : t_start_(t_start), t_end_(t_end), n_steps_(n_steps) {
  if (n_steps == 0) throw InvalidArgument("TimeGrid: n_steps must be >= 1");
  if (!(t_end > t_start)) throw InvalidArgument("TimeGrid: t_end must exceed t_start");
}

StepInput StepInput::rotated(const Mat& r) const {
  StepInput out;
  out.dw = r * dw;
  out.levy = r * levy * r.transpose();
  out.cross0 = r * cross0;
  out.crossI = r * crossI;
  out.h = h;
  return out;
}

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

// Uniform in (0, 1], 53 bits.
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::operator()(Counter ctr) const {
  std::uint32_t k0 = key_[0];
  std::uint32_t k1 = key_[1];
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
    k0 += kPhiloxW0;
    k1 += kPhiloxW1;
  }
  return ctr;
}

std::array<double, 2> Philox4x32::normals(const Counter& ctr) const {
  const Counter r = (*this)(ctr);
  const double u1 = to_unit(r[0], r[1]);
  const double u2 = to_unit(r[2], r[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

WienerIncrements::WienerIncrements(int dim, TimeGrid grid, std::size_t substeps)
    : dim_(dim), grid_(grid), substeps_(substeps) {
  if (dim < 1 || dim > kMaxDim) throw InvalidArgument("WienerIncrements: dim must be in 1..6");
  if (substeps == 0) throw InvalidArgument("WienerIncrements: substeps must be >= 1");
  const std::size_t n = grid.n_steps();
  const auto d = static_cast<std::size_t>(dim);
  dw_.assign(n * d, 0.0);
  levy_.assign(n * d * d, 0.0);
  cross0_.assign(n * d, 0.0);
  crossI_.assign(n * d, 0.0);
}

#define FF_VEC_ACCESSOR(name, store)                                                      \
  Eigen::Map<const Eigen::VectorXd> WienerIncrements::name(std::size_t k) const {          \
    return {store.data() + k * static_cast<std::size_t>(dim_), dim_};                     \
  }                                                                                       \
  Eigen::Map<Eigen::VectorXd> WienerIncrements::name(std::size_t k) {                      \
    return {store.data() + k * static_cast<std::size_t>(dim_), dim_};                     \
  }
FF_VEC_ACCESSOR(dw, dw_)
FF_VEC_ACCESSOR(cross0, cross0_)
FF_VEC_ACCESSOR(crossI, crossI_)
#undef FF_VEC_ACCESSOR

Eigen::Map<const Eigen::MatrixXd> WienerIncrements::levy(std::size_t k) const {
  return {levy_.data() + k * static_cast<std::size_t>(dim_ * dim_), dim_, dim_};
}
Eigen::Map<Eigen::MatrixXd> WienerIncrements::levy(std::size_t k) {
  return {levy_.data() + k * static_cast<std::size_t>(dim_ * dim_), dim_, dim_};
}

StepInput WienerIncrements::step(std::size_t k) const {
  StepInput in;
  in.dw = dw(k);
  in.levy = levy(k);
  in.cross0 = cross0(k);
  in.crossI = crossI(k);
  in.h = grid_.h();
  return in;
}

double WienerIncrements::identity_residual() const {
  const double h = grid_.h();
  double worst = 0.0;
  for (std::size_t k = 0; k < n_steps(); ++k) {
    const auto w = dw(k);
    const auto j = levy(k);
    for (int a = 0; a < dim_; ++a) {
      for (int b = 0; b < dim_; ++b) {
        const double expect = w(a) * w(b) - (a == b ? h : 0.0);
        worst = std::max(worst, std::abs(j(a, b) + j(b, a) - expect));
      }
      worst = std::max(worst, std::abs(cross0(k)(a) + crossI(k)(a) - h * w(a)));
    }
  }
  return worst;
}

bool operator==(const WienerIncrements& a, const WienerIncrements& b) {
  return a.dim_ == b.dim_ && a.grid_.n_steps() == b.grid_.n_steps() &&
         a.grid_.t_start() == b.grid_.t_start() && a.grid_.t_end() == b.grid_.t_end() &&
         a.dw_ == b.dw_ && a.levy_ == b.levy_ && a.cross0_ == b.cross0_ &&
         a.crossI_ == b.crossI_;
}

WienerIncrements sample_increments(std::uint64_t seed, std::uint64_t stream, const TimeGrid& grid,
                                   int dim, std::size_t substeps) {
  if (substeps == 0) throw InvalidArgument("sample_increments: substeps must be >= 1");
  if (dim < 1) throw InvalidArgument("sample_increments: dim must be >= 1");
  WienerIncrements out(dim, grid, substeps);

  const Philox4x32 rng(seed);
  const double h = grid.h();
  const double dt = h / static_cast<double>(substeps);
  const double scale = std::sqrt(dt);
  const int pairs = (dim + 1) / 2;

  std::array<double, kMaxDim + 1> z{};
  Vec b(dim);     // path relative to the step start
  Mat levy(dim, dim);
  Vec time_int(dim);

  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    b.setZero();
    levy.setZero();
    time_int.setZero();
    for (std::size_t s = 0; s < substeps; ++s) {
      for (int p = 0; p < pairs; ++p) {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(stream),
                                      static_cast<std::uint32_t>(k),
                                      static_cast<std::uint32_t>(s),
                                      static_cast<std::uint32_t>(p) ^
                                          (static_cast<std::uint32_t>(stream >> 32) << 8)};
        const auto nz = rng.normals(ctr);
        z[2 * p] = nz[0] * scale;
        z[2 * p + 1] = nz[1] * scale;
      }
      for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
          // Ito sum over earlier substeps plus the within-substep symmetric part.
          levy(i, j) += b(i) * z[j] + 0.5 * (z[i] * z[j] - (i == j ? dt : 0.0));
        }
      }
      for (int i = 0; i < dim; ++i) {
        time_int(i) += (b(i) + 0.5 * z[i]) * dt;
        b(i) += z[i];
      }
    }
    out.dw(k) = b;
    out.levy(k) = levy;
    out.crossI(k) = time_int;
    out.cross0(k) = h * b - time_int;
  }
  return out;
}

WienerIncrements chen_coarsen(const WienerIncrements& fine, std::size_t factor) {
  if (factor == 0 || fine.n_steps() % factor != 0) {
    throw InvalidArgument("chen_coarsen: factor " + std::to_string(factor) +
                          " does not divide n_steps " + std::to_string(fine.n_steps()));
  }
  if (factor == 1) return fine;
  const int d = fine.dim();
  const TimeGrid coarse_grid(fine.grid().t_start(), fine.grid().t_end(),
                             fine.n_steps() / factor);
  WienerIncrements out(d, coarse_grid, fine.substeps() * factor);
  const double hf = fine.grid().h();

  for (std::size_t c = 0; c < coarse_grid.n_steps(); ++c) {
    const std::size_t first = c * factor;
    Eigen::VectorXd w = fine.dw(first);
    Eigen::MatrixXd j = fine.levy(first);
    Eigen::VectorXd c0 = fine.cross0(first);
    Eigen::VectorXd ci = fine.crossI(first);
    double elapsed = hf;
    for (std::size_t f = first + 1; f < first + factor; ++f) {
      const auto wn = fine.dw(f);
      j += fine.levy(f) + w * wn.transpose();
      c0 += fine.cross0(f) + elapsed * wn;
      ci += fine.crossI(f) + hf * w;
      w += wn;
      elapsed += hf;
    }
    out.dw(c) = w;
    out.levy(c) = j;
    out.cross0(c) = c0;
    out.crossI(c) = ci;
  }
  return out;
}

WienerIncrements with_drift(const WienerIncrements& incr, const Vec& mu) {
  if (mu.size() != incr.dim()) throw InvalidArgument("with_drift: drift has the wrong dimension");
  WienerIncrements out = incr;
  const double h = incr.grid().h();
  for (std::size_t k = 0; k < incr.n_steps(); ++k) {
    const Eigen::VectorXd ci = incr.crossI(k);
    const Eigen::VectorXd c0 = incr.cross0(k);
    const Eigen::VectorXd m = mu;
    out.levy(k) += ci * m.transpose() + m * c0.transpose() + 0.5 * h * h * m * m.transpose();
    out.dw(k) += h * m;
    out.cross0(k) += 0.5 * h * h * m;
    out.crossI(k) += 0.5 * h * h * m;
  }
  return out;
}

void write_increments_csv(std::ostream& out, const WienerIncrements& incr) {
  out << "step,i,j,dw_i,levy_ij\n";
  for (std::size_t k = 0; k < incr.n_steps(); ++k) {
    for (int i = 0; i < incr.dim(); ++i) {
      for (int j = 0; j < incr.dim(); ++j) {
        out << k << ',' << i + 1 << ',' << j + 1 << ',' << csv::num(incr.dw(k)(i)) << ','
            << csv::num(incr.levy(k)(i, j)) << '\n';
      }
    }
  }
}

}  // namespace frameflow
