#include "frameflow/geometry.hpp"

#include <cmath>

#include <Eigen/SVD>

namespace frameflow {

double ConnectionEval::max_asymmetry() const {
  double m = 0.0;
  const int d = gamma.dim();
  for (int l = 0; l < d; ++l)
    for (int p = 0; p < d; ++p)
      for (int q = 0; q < d; ++q) m = std::max(m, std::abs(gamma(l, p, q) - gamma(l, q, p)));
  return m;
}

Vec field(const VectorFieldSystem& sys, int i, const Vec& x) {
  if (i == 0) return sys.drift(x);
  return sys.frame(x).col(i - 1);
}

Mat checked_frame(const VectorFieldSystem& sys, const Vec& x) {
  if (x.size() != sys.dim) {
    throw InvalidArgument(sys.name + ": point has dimension " + std::to_string(x.size()) +
                          ", expected " + std::to_string(sys.dim));
  }
  Mat sigma = sys.frame(x);
  if (!sigma.allFinite()) {
    throw EllipticityError(sys.name + ": non-finite frame at x = " + format_point(x));
  }
  const Eigen::JacobiSVD<Mat> svd(sigma);
  const auto& s = svd.singularValues();
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  if (!(smin > 0.0) || smax / smin > sys.max_condition) {
    throw EllipticityError(sys.name + ": frame not invertible (condition " +
                           std::to_string(smin > 0.0 ? smax / smin : INFINITY) +
                           ") at x = " + format_point(x));
  }
  return sigma;
}

FieldJacobians field_jacobians(const VectorFieldSystem& sys, const Vec& x) {
  if (sys.jacobians) return sys.jacobians(x);
  const int d = sys.dim;
  FieldJacobians jac;
  for (int i = 0; i <= d; ++i) jac[i] = Mat::Zero(d, d);
  for (int n = 0; n < d; ++n) {
    const double delta = sys.fd_step * std::max(1.0, std::abs(x(n)));
    Vec xp = x, xm = x;
    xp(n) += delta;
    xm(n) -= delta;
    const Vec dp = sys.drift(xp), dm = sys.drift(xm);
    const Mat fp = sys.frame(xp), fm = sys.frame(xm);
    jac[0].col(n) = (dp - dm) / (2.0 * delta);
    for (int i = 1; i <= d; ++i) jac[i].col(n) = (fp.col(i - 1) - fm.col(i - 1)) / (2.0 * delta);
  }
  return jac;
}

FieldHessians field_hessians(const VectorFieldSystem& sys, const Vec& x) {
  if (!sys.hessians) {
    throw MissingDerivativesError(sys.name + ": second derivatives of the fields are not available");
  }
  return sys.hessians(x);
}

Mat cometric(const VectorFieldSystem& sys, const Vec& x) {
  const Mat sigma = checked_frame(sys, x);
  return sigma * sigma.transpose();
}

Mat metric(const VectorFieldSystem& sys, const Vec& x) {
  const Mat sigma = checked_frame(sys, x);
  const Mat inv = sigma.inverse();
  return inv.transpose() * inv;
}

Vec LocalGeometry::covariant(int i, int j) const {
  Vec out = directional(i, j);
  for (int k = 0; k < dim(); ++k) out -= gamma_frame(k, i - 1, j - 1) * frame.col(k);
  return out;
}

namespace {

Tensor3 structure_from(const Mat& frame, const Mat& frame_inv, const FieldJacobians& jac) {
  const int d = static_cast<int>(frame.rows());
  Tensor3 k(d);
  for (int j = 0; j < d; ++j) {
    for (int l = j + 1; l < d; ++l) {
      // [A_j, A_l] = (A_j |> A_l) - (A_l |> A_j)
      const Vec bracket = jac[l + 1] * frame.col(j) - jac[j + 1] * frame.col(l);
      const Vec c = frame_inv * bracket;
      for (int i = 0; i < d; ++i) {
        k(i, j, l) = c(i);
        k(i, l, j) = -c(i);
      }
    }
  }
  return k;
}

Tensor3 frame_gamma_from(const Tensor3& k) {
  const int d = k.dim();
  Tensor3 g(d);
  for (int l = 0; l < d; ++l)
    for (int p = 0; p < d; ++p)
      for (int q = 0; q < d; ++q) g(l, p, q) = 0.5 * (k(l, p, q) + k(p, l, q) + k(q, l, p));
  return g;
}

Tensor3 coordinate_gamma_from(const Mat& frame, const Mat& frame_inv, const FieldJacobians& jac,
                              const Tensor3& gamma_frame) {
  const int d = static_cast<int>(frame.rows());
  // G(:, p, q) = Gamma(A_p, A_q) = nabla_{A_p} A_q - A_p |> A_q
  std::array<Vec, kMaxDim * kMaxDim> g_pq;
  for (int p = 0; p < d; ++p) {
    for (int q = 0; q < d; ++q) {
      Vec v = -(jac[q + 1] * frame.col(p));
      for (int l = 0; l < d; ++l) v += gamma_frame(l, p, q) * frame.col(l);
      g_pq[p * d + q] = v;
    }
  }
  Tensor3 out(d);
  for (int m = 0; m < d; ++m) {
    for (int n = 0; n < d; ++n) {
      Vec acc = Vec::Zero(d);
      for (int p = 0; p < d; ++p) {
        if (frame_inv(p, m) == 0.0) continue;
        for (int q = 0; q < d; ++q) acc += frame_inv(p, m) * frame_inv(q, n) * g_pq[p * d + q];
      }
      for (int k = 0; k < d; ++k) out(k, m, n) = acc(k);
    }
  }
  return out;
}

}  // namespace

LocalGeometry local_geometry(const VectorFieldSystem& sys, const Vec& x) {
  LocalGeometry g;
  g.x = x;
  g.frame = checked_frame(sys, x);
  g.frame_inv = g.frame.inverse();
  g.drift = sys.drift(x);
  g.jac = field_jacobians(sys, x);
  g.structure = structure_from(g.frame, g.frame_inv, g.jac);
  g.gamma_frame = frame_gamma_from(g.structure);
  g.gamma_coord = coordinate_gamma_from(g.frame, g.frame_inv, g.jac, g.gamma_frame);
  return g;
}

Tensor3 structure_constants(const VectorFieldSystem& sys, const Vec& x) {
  const Mat sigma = checked_frame(sys, x);
  return structure_from(sigma, sigma.inverse(), field_jacobians(sys, x));
}

ConnectionEval christoffel_from_structure(const Tensor3& k) {
  ConnectionEval out;
  out.gamma = frame_gamma_from(k);
  out.indexing = ConnectionIndexing::Frame;
  return out;
}

ConnectionEval coordinate_christoffel(const VectorFieldSystem& sys, const Vec& x) {
  const LocalGeometry g = local_geometry(sys, x);
  return {g.gamma_coord, x, ConnectionIndexing::Coordinate};
}

ConnectionEval christoffel_from_metric(const VectorFieldSystem& sys, const Vec& x,
                                       double fd_step) {
  if (!(fd_step > 0.0)) throw InvalidArgument("christoffel_from_metric: fd_step must be > 0");
  const int d = sys.dim;
  const Mat g_inv = cometric(sys, x);
  std::array<Mat, kMaxDim> dg;
  for (int n = 0; n < d; ++n) {
    const double delta = fd_step * std::max(1.0, std::abs(x(n)));
    Vec xp = x, xm = x;
    xp(n) += delta;
    xm(n) -= delta;
    dg[n] = (metric(sys, xp) - metric(sys, xm)) / (2.0 * delta);
  }
  Tensor3 gamma(d);
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int l = 0; l < d; ++l) s += g_inv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
        gamma(k, i, j) = 0.5 * s;
      }
  return {gamma, x, ConnectionIndexing::Coordinate};
}

Vec covariant_derivative(const VectorFieldSystem& sys, const Vec& x, int i, int j) {
  if (i < 1 || i > sys.dim || j < 1 || j > sys.dim) {
    throw InvalidArgument("covariant_derivative: frame indices run from 1 to dim");
  }
  return local_geometry(sys, x).covariant(i, j);
}

Vec drift_correction(const VectorFieldSystem& sys, const Vec& x) {
  const LocalGeometry g = local_geometry(sys, x);
  Vec b = g.drift;
  for (int i = 0; i < g.dim(); ++i) {
    const Vec a = g.frame.col(i);
    b += 0.5 * g.gamma_coord.contract(a, a);
  }
  return b;
}

BundleTangent basic_horizontal_field(const Tensor3& gamma_coord, const FramePoint& fp,
                                     const Vec& xi) {
  return horizontal_lift(gamma_coord, fp, fp.e * xi);
}

BundleTangent horizontal_lift(const Tensor3& gamma_coord, const FramePoint& fp, const Vec& v) {
  const int d = static_cast<int>(fp.x.size());
  BundleTangent t;
  t.base = v;
  t.frame = Mat(d, d);
  for (int p = 0; p < d; ++p) t.frame.col(p) = -gamma_coord.contract(v, fp.e.col(p));
  return t;
}

BundleTangent basic_horizontal_field(const VectorFieldSystem& sys, const FramePoint& fp,
                                     const Vec& xi) {
  const LocalGeometry g = local_geometry(sys, fp.x);
  return basic_horizontal_field(g.gamma_coord, fp, xi);
}

FramePoint initial_frame_point(const VectorFieldSystem& sys, const Vec& x) {
  return {x, checked_frame(sys, x)};
}

Mat frame_rotation(const VectorFieldSystem& sys, const FramePoint& fp) {
  const Mat sigma = checked_frame(sys, fp.x);
  return sigma.partialPivLu().solve(fp.e);
}

double orthonormality_defect(const VectorFieldSystem& sys, const FramePoint& fp) {
  const Mat r = frame_rotation(sys, fp);
  return (r.transpose() * r - Mat::Identity(sys.dim, sys.dim)).cwiseAbs().maxCoeff();
}

Mat polar_orthogonal(const Mat& m) {
  const Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

FramePoint reorthonormalize(const VectorFieldSystem& sys, const FramePoint& fp, double min_det) {
  const Mat sigma = checked_frame(sys, fp.x);
  const Mat r = sigma.partialPivLu().solve(fp.e);
  const double det = r.determinant();
  if (!std::isfinite(det) || std::abs(det) < min_det) {
    throw FrameDegenerationError("frame degenerated (det " + std::to_string(det) + ") at x = " +
                                 format_point(fp.x));
  }
  return {fp.x, sigma * polar_orthogonal(r)};
}

BundleVec pack(const FramePoint& fp) {
  const auto d = fp.x.size();
  BundleVec r(d + d * d);
  r.head(d) = fp.x;
  for (Eigen::Index c = 0; c < d; ++c) r.segment(d + c * d, d) = fp.e.col(c);
  return r;
}

BundleVec pack(const BundleTangent& t) { return pack(FramePoint{t.base, t.frame}); }

FramePoint unpack(int dim, const BundleVec& r) {
  FramePoint fp;
  fp.x = r.head(dim);
  fp.e = Mat(dim, dim);
  for (int c = 0; c < dim; ++c) fp.e.col(c) = r.segment(dim + c * dim, dim);
  return fp;
}

}  // namespace frameflow
