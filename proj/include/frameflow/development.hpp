#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "frameflow/linalg.hpp"

namespace frameflow {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// An m-dimensional submanifold of R^n described by its extrinsic data.
struct EmbeddedSurface {
  std::string name;
  int ambient_dim = 0;
  int intrinsic_dim = 0;
  std::function<double(const Vec&)> constraint;
  std::function<Mat(const Vec&)> tangent_projector;
  /// B_x(u, v), normal-valued.
  std::function<Vec(const Vec&, const Vec&, const Vec&)> second_fundamental_form;
  /// B^t_x(a, v), tangent-valued, defined by <B_x(a, u), v> = <u, B^t_x(a, v)>.
  std::function<Vec(const Vec&, const Vec&, const Vec&)> sff_transpose;
  /// Pull a nearby point back onto the surface.
  std::function<Vec(const Vec&)> restore;
};

/// Unit sphere in R^3: B_x(u, v) = x (u.v), B^t_x(a, v) = a (x.v).
EmbeddedSurface unit_sphere();

/// Contact point p on the surface and ambient orthogonal matrix A.
struct RollingState {
  Vec p;
  Mat A;
};

struct RollingRate {
  Vec p_dot;
  Mat A_dot;
};

/// Rolling without slipping or twisting: p' = A q', A' = Omega A with Omega the skew
/// matrix acting as -B_p(p', .) on tangent vectors and as B^t_p(p', .) on normals.
/// q_dot has the intrinsic or the ambient dimension (then zero past the intrinsic part);
/// p must lie on the surface within 1e-6.
RollingRate development_rhs(const EmbeddedSurface& surface, const RollingState& state,
                            const Vec& q_dot);

struct DevelopedCurve {
  std::vector<Vec> points;
  RollingState final_state;
  double max_constraint_residual = 0.0;
};

/// Develop the piecewise-linear curve through (t[k], q[k]) onto the surface with RK4,
/// `substeps` per segment, restoring A to O(n) and p to the surface after every substep.
DevelopedCurve develop_curve(const EmbeddedSurface& surface, const std::vector<double>& t,
                             const std::vector<Vec>& q, const RollingState& init, int substeps);

/// hat(w) u = w x u.
Mat3 hat(const Vec3& w);
/// Closed-form exponential of hat(w) (Rodrigues).
Mat3 so3_exp(const Vec3& w);
/// Rotation angle in [0, pi].
double rotation_angle(const Mat3& r);

/// One Lie-Euler step of dA = hat(A_2 dW^1 - A_1 dW^2) A: exp(hat(A_2 dw_1 - A_1 dw_2)) A.
Mat3 sphere_frame_step(const Mat3& a, const Eigen::Vector2d& dw, double h);

/// RK4 with `substeps` steps for the time-1 flow of B' = hat(B v) B, v = (-dw_2, dw_1, 0),
/// the truncated series field whose exact flow is sphere_frame_step.
Mat3 sphere_truncated_flow(const Mat3& a, const Eigen::Vector2d& dw, int substeps);

struct SpherePath {
  std::vector<Vec3> points;  // x_n = A_n e_z
  Mat3 final_frame;
  double max_norm_deviation = 0.0;
  double max_orthogonality_defect = 0.0;
};

/// Brownian motion on S^2 from A_0 = I, noise from the (seed, stream) increments.
SpherePath sphere_bm_path(std::uint64_t seed, std::uint64_t stream, double t_end, double h);

}  // namespace frameflow
