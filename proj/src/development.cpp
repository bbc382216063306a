#include "frameflow/development.hpp"

#include <cmath>

#include "frameflow/geometry.hpp"
#include "frameflow/noise.hpp"

namespace frameflow {

EmbeddedSurface unit_sphere() {
  EmbeddedSurface s;
  s.name = "sphere";
  s.ambient_dim = 3;
  s.intrinsic_dim = 2;
  s.constraint = [](const Vec& x) { return x.squaredNorm() - 1.0; };
  s.tangent_projector = [](const Vec& x) {
    const Vec n = x.normalized();
    return Mat(Mat::Identity(3, 3) - n * n.transpose());
  };
  s.second_fundamental_form = [](const Vec& x, const Vec& u, const Vec& v) {
    return Vec(x * u.dot(v));
  };
  // Bilinear form x^T w; it coincides with |w| only for w along +x.
  s.sff_transpose = [](const Vec& x, const Vec& a, const Vec& w) { return Vec(a * x.dot(w)); };
  s.restore = [](const Vec& x) { return Vec(x.normalized()); };
  return s;
}

namespace {

constexpr double kStateTolerance = 1e-6;

double orthogonality_defect(const Mat& a) {
  return (a.transpose() * a - Mat::Identity(a.rows(), a.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

namespace {

// Unchecked rate; RK4 stages sit slightly off the surface and are evaluated here directly.
RollingRate rolling_rate(const EmbeddedSurface& surface, const RollingState& state,
                         const Vec& q_dot) {
  const int n = surface.ambient_dim;
  RollingRate rate;
  rate.p_dot = state.A * q_dot;
  const Mat proj = surface.tangent_projector(state.p);
  Mat omega(n, n);
  for (int c = 0; c < n; ++c) {
    const Vec w = Vec::Unit(n, c);
    const Vec tangential = proj * w;
    const Vec normal = w - tangential;
    omega.col(c) = -surface.second_fundamental_form(state.p, rate.p_dot, tangential) +
                   surface.sff_transpose(state.p, rate.p_dot, normal);
  }
  rate.A_dot = omega * state.A;
  return rate;
}

}  // namespace

RollingRate development_rhs(const EmbeddedSurface& surface, const RollingState& state,
                            const Vec& q_dot) {
  const int n = surface.ambient_dim;
  const int m = surface.intrinsic_dim;
  if (state.p.size() != n || state.A.rows() != n || state.A.cols() != n ||
      (q_dot.size() != n && q_dot.size() != m)) {
    throw InvalidArgument("development_rhs: dimension mismatch");
  }
  Vec padded = Vec::Zero(n);
  padded.head(q_dot.size()) = q_dot;
  for (int i = m; i < q_dot.size(); ++i) {
    if (q_dot(i) != 0.0) {
      throw InvalidArgument("development_rhs: q_dot must vanish outside the first " +
                            std::to_string(m) + " coordinates");
    }
  }
  const double residual = std::abs(surface.constraint(state.p));
  if (residual > kStateTolerance) {
    throw InvariantError("development_rhs: state is off the surface (residual " +
                         std::to_string(residual) + ")");
  }
  return rolling_rate(surface, state, padded);
}

DevelopedCurve develop_curve(const EmbeddedSurface& surface, const std::vector<double>& t,
                             const std::vector<Vec>& q, const RollingState& init, int substeps) {
  if (t.size() != q.size() || t.empty()) {
    throw InvalidArgument("develop_curve: need matching, non-empty time and curve samples");
  }
  if (substeps < 1) throw InvalidArgument("develop_curve: substeps must be >= 1");
  const int n = surface.ambient_dim;
  const int m = surface.intrinsic_dim;

  DevelopedCurve out;
  RollingState s = init;
  out.points.push_back(s.p);
  out.max_constraint_residual = std::abs(surface.constraint(s.p));

  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const double span = t[k + 1] - t[k];
    if (!(span > 0.0)) throw InvalidArgument("develop_curve: times must be increasing");
    if (q[k].size() != m || q[k + 1].size() != m) {
      throw InvalidArgument("develop_curve: curve samples must have intrinsic dimension");
    }
    Vec q_dot = Vec::Zero(n);
    q_dot.head(m) = (q[k + 1] - q[k]) / span;
    const double dt = span / substeps;

    auto rhs = [&](const RollingState& st) { return rolling_rate(surface, st, q_dot); };
    auto advance = [](const RollingState& st, const RollingRate& r, double a) {
      return RollingState{st.p + a * r.p_dot, st.A + a * r.A_dot};
    };

    for (int sub = 0; sub < substeps; ++sub) {
      const RollingRate k1 = rhs(s);
      const RollingRate k2 = rhs(advance(s, k1, 0.5 * dt));
      const RollingRate k3 = rhs(advance(s, k2, 0.5 * dt));
      const RollingRate k4 = rhs(advance(s, k3, dt));
      s.p += dt / 6.0 * (k1.p_dot + 2.0 * k2.p_dot + 2.0 * k3.p_dot + k4.p_dot);
      s.A += dt / 6.0 * (k1.A_dot + 2.0 * k2.A_dot + 2.0 * k3.A_dot + k4.A_dot);

      const double residual = std::abs(surface.constraint(s.p));
      const double defect = orthogonality_defect(s.A);
      out.max_constraint_residual = std::max(out.max_constraint_residual, residual);
      if (residual > kStateTolerance || defect > kStateTolerance) {
        throw InvariantError("develop_curve: invariant drift before restoration in segment " +
                             std::to_string(k) + " (constraint " + std::to_string(residual) +
                             ", orthogonality " + std::to_string(defect) + ")");
      }
      s.A = polar_orthogonal(s.A);
      s.p = surface.restore(s.p);
    }
    out.points.push_back(s.p);
  }
  out.final_state = s;
  return out;
}

Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

Mat3 so3_exp(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const Mat3 k = hat(w);
  double a, b;
  if (theta2 < 1e-16) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * k + b * k * k;
}

double rotation_angle(const Mat3& r) {
  const Mat3 skew = r - r.transpose();
  const double s = 0.5 * Vec3(skew(2, 1), skew(0, 2), skew(1, 0)).norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return std::atan2(s, c);
}

Mat3 sphere_frame_step(const Mat3& a, const Eigen::Vector2d& dw, double h) {
  if (!(h > 0.0)) throw InvalidArgument("sphere_frame_step: h must be > 0");
  const double defect = (a.transpose() * a - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (defect > 1e-9 || a.determinant() <= 0.0) {
    throw InvalidArgument("sphere_frame_step: frame is not in SO(3) (defect " +
                          std::to_string(defect) + ")");
  }
  const Vec3 axis = a.col(1) * dw(0) - a.col(0) * dw(1);
  return so3_exp(axis) * a;
}

Mat3 sphere_truncated_flow(const Mat3& a, const Eigen::Vector2d& dw, int substeps) {
  if (substeps < 1) throw InvalidArgument("sphere_truncated_flow: substeps must be >= 1");
  const Vec3 body(-dw(1), dw(0), 0.0);
  auto field = [&](const Mat3& b) -> Mat3 { return hat(b * body) * b; };
  Mat3 b = a;
  const double dt = 1.0 / substeps;
  for (int s = 0; s < substeps; ++s) {
    const Mat3 k1 = field(b);
    const Mat3 k2 = field(b + 0.5 * dt * k1);
    const Mat3 k3 = field(b + 0.5 * dt * k2);
    const Mat3 k4 = field(b + dt * k3);
    b += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return b;
}

SpherePath sphere_bm_path(std::uint64_t seed, std::uint64_t stream, double t_end, double h) {
  if (!(t_end > 0.0) || !(h > 0.0)) throw InvalidArgument("sphere_bm_path: T and h must be > 0");
  const double ratio = t_end / h;
  const auto n = static_cast<std::size_t>(std::llround(ratio));
  if (n == 0 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * ratio) {
    throw InvalidArgument("sphere_bm_path: T must be an integer multiple of h");
  }
  const WienerIncrements incr = sample_increments(seed, stream, TimeGrid(0.0, t_end, n), 2, 1);

  SpherePath path;
  path.points.reserve(n + 1);
  Mat3 a = Mat3::Identity();
  path.points.push_back(a.col(2));
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::Vector2d dw = incr.dw(k);
    a = sphere_frame_step(a, dw, incr.grid().h());
    const Vec3 x = a.col(2);
    path.points.push_back(x);
    path.max_norm_deviation = std::max(path.max_norm_deviation, std::abs(x.norm() - 1.0));
    path.max_orthogonality_defect =
        std::max(path.max_orthogonality_defect,
                 (a.transpose() * a - Mat3::Identity()).cwiseAbs().maxCoeff());
  }
  path.final_frame = a;
  return path;
}

}  // namespace frameflow
