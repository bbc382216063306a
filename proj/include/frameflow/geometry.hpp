#pragma once

#include <functional>
#include <string>

#include "frameflow/linalg.hpp"

namespace frameflow {

/// Jacobians of A_0..A_d; entry [i](m, n) = d A_i^m / d x^n.
using FieldJacobians = std::array<Mat, kMaxDim + 1>;
/// Second derivatives of A_0..A_d; entry [i](m, n, p) = d^2 A_i^m / dx^n dx^p.
using FieldHessians = std::array<Tensor3, kMaxDim + 1>;

/// Driving fields of dX = A_0(X) dt + A_i(X) dB^i (Ito). The columns of `frame(x)`
/// are A_1(x)..A_d(x); the induced cometric is frame * frame^T.
struct VectorFieldSystem {
  std::string name;
  int dim = 0;
  /// Declares that the Levi-Civita connection of the induced metric is flat.
  bool flat = false;

  std::function<Vec(const Vec&)> drift;
  std::function<Mat(const Vec&)> frame;
  /// Optional; central finite differences are used when absent.
  std::function<FieldJacobians(const Vec&)> jacobians;
  /// Optional; required by the weak order-2 scheme.
  std::function<FieldHessians(const Vec&)> hessians;

  double max_condition = 1e8;
  /// Relative step for finite-difference fallbacks.
  double fd_step = 1e-5;
};

/// A base point with frame components; column j of `e` is the j-th frame vector.
struct FramePoint {
  Vec x;
  Mat e;
};

enum class ConnectionIndexing { Frame, Coordinate };

/// Connection coefficients at a point. Frame indexing: nabla_{A_p} A_q = gamma(l, p, q) A_l.
/// Coordinate indexing: the usual Gamma^l_{pq}.
struct ConnectionEval {
  Tensor3 gamma;
  Vec point;
  ConnectionIndexing indexing = ConnectionIndexing::Coordinate;

  /// max |gamma(l, p, q) - gamma(l, q, p)|
  double max_asymmetry() const;
};

/// Tangent vector to the frame bundle in coordinates (x^i, X^i_j).
struct BundleTangent {
  Vec base;
  Mat frame;
};

Vec field(const VectorFieldSystem& sys, int i, const Vec& x);

/// Frame matrix after the ellipticity guard; throws EllipticityError naming x.
Mat checked_frame(const VectorFieldSystem& sys, const Vec& x);

FieldJacobians field_jacobians(const VectorFieldSystem& sys, const Vec& x);
FieldHessians field_hessians(const VectorFieldSystem& sys, const Vec& x);

Mat cometric(const VectorFieldSystem& sys, const Vec& x);
Mat metric(const VectorFieldSystem& sys, const Vec& x);

/// Everything the steppers need at one point, computed once.
struct LocalGeometry {
  Vec x;
  Mat frame;      // sigma, columns A_1..A_d
  Mat frame_inv;
  Vec drift;
  FieldJacobians jac;
  Tensor3 structure;    // K(i, j, k): [A_j, A_k] = K^i_jk A_i
  Tensor3 gamma_frame;  // frame-indexed Levi-Civita coefficients
  Tensor3 gamma_coord;  // coordinate Christoffel symbols

  int dim() const { return static_cast<int>(x.size()); }
  Vec field(int i) const { return i == 0 ? drift : Vec(frame.col(i - 1)); }
  /// (A_i |> A_j)(x) = A_i^m d_m A_j, indices 0..d with 0 the drift.
  Vec directional(int i, int j) const { return jac[j] * field(i); }
  /// (A_i |>> A_j)(x) = (A_i |> A_j) - gamma_frame(k, i, j) A_k, frame indices 1..d.
  Vec covariant(int i, int j) const;
};

LocalGeometry local_geometry(const VectorFieldSystem& sys, const Vec& x);

/// K^i_jk with [A_j, A_k] = K^i_jk A_i at x.
Tensor3 structure_constants(const VectorFieldSystem& sys, const Vec& x);

/// Frame-indexed Levi-Civita coefficients of the orthonormal frame A_1..A_d:
/// gamma(l, p, q) = (K^l_pq + K^p_lq + K^q_lp) / 2.
ConnectionEval christoffel_from_structure(const Tensor3& k);

/// Coordinate Christoffel symbols obtained from the structure-constant route.
ConnectionEval coordinate_christoffel(const VectorFieldSystem& sys, const Vec& x);

/// Independent oracle: Levi-Civita symbols of g = (sigma sigma^T)^{-1} with metric
/// derivatives by central differences of step fd_step.
ConnectionEval christoffel_from_metric(const VectorFieldSystem& sys, const Vec& x,
                                       double fd_step = 1e-5);

Vec covariant_derivative(const VectorFieldSystem& sys, const Vec& x, int i, int j);

/// Drift of the Riemannian Brownian motion with drift that the Ito SDE simulates:
/// L = Delta_M / 2 + b, b = A_0 + g^{ij} Gamma^k_ij / 2.
Vec drift_correction(const VectorFieldSystem& sys, const Vec& x);

/// B(xi) at fp: base part e*xi, frame part -Gamma^q_kl X^l_p X^k_j xi^j.
BundleTangent basic_horizontal_field(const VectorFieldSystem& sys, const FramePoint& fp,
                                     const Vec& xi);
/// Same, with the coordinate Christoffel symbols supplied.
BundleTangent basic_horizontal_field(const Tensor3& gamma_coord, const FramePoint& fp,
                                     const Vec& xi);
/// Horizontal lift of the base vector v to fp.
BundleTangent horizontal_lift(const Tensor3& gamma_coord, const FramePoint& fp, const Vec& v);

/// sigma(x) as the starting frame; orthonormal for the induced metric.
FramePoint initial_frame_point(const VectorFieldSystem& sys, const Vec& x);
/// Orthogonal matrix R with e = sigma(x) R (exactly orthogonal only for valid frames).
Mat frame_rotation(const VectorFieldSystem& sys, const FramePoint& fp);
/// max |e^T g e - I|
double orthonormality_defect(const VectorFieldSystem& sys, const FramePoint& fp);
/// Replace e with sigma(x) times the orthogonal polar factor of sigma^{-1} e.
/// Throws FrameDegenerationError when det(sigma^{-1} e) falls below min_det.
FramePoint reorthonormalize(const VectorFieldSystem& sys, const FramePoint& fp,
                            double min_det = 1e-6);

/// Orthogonal polar factor U V^T of a square matrix.
Mat polar_orthogonal(const Mat& m);

// Packed frame-bundle coordinates: x followed by e in column-major order.
BundleVec pack(const FramePoint& fp);
BundleVec pack(const BundleTangent& t);
FramePoint unpack(int dim, const BundleVec& r);

}  // namespace frameflow
