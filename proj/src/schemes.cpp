#include "frameflow/schemes.hpp"

#include <array>
#include <cmath>

namespace frameflow {

namespace {

struct SchemeEntry {
  SchemeKind kind;
  std::string_view name;
};

constexpr std::array<SchemeEntry, 8> kSchemes{{
    {SchemeKind::EulerMaruyama, "em"},
    {SchemeKind::Milstein, "milstein"},
    {SchemeKind::FrameMilstein, "frame-milstein"},
    {SchemeKind::CMT, "cmt"},
    {SchemeKind::Theta2D, "theta2d"},
    {SchemeKind::AlvesCruzeiro, "ac"},
    {SchemeKind::CastellGaines05, "cg05"},
    {SchemeKind::CastellGaines10, "cg10"},
}};

void check_input(const VectorFieldSystem& sys, const Vec& x, const StepInput& in) {
  if (x.size() != sys.dim || in.dw.size() != sys.dim) {
    throw InvalidArgument(sys.name + ": state or increment dimension does not match dim " +
                          std::to_string(sys.dim));
  }
}

Mat symmetric_increment(const StepInput& in) {
  const auto d = in.dw.size();
  return in.dw * in.dw.transpose() - in.h * Mat::Identity(d, d);
}

Vec cmt_from(const LocalGeometry& g, const StepInput& in) {
  const int d = g.dim();
  const Mat s = symmetric_increment(in);
  Vec x = g.x + g.drift * in.h + g.frame * in.dw;
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j <= d; ++j) x += 0.5 * s(i - 1, j - 1) * g.covariant(i, j);
  return x;
}

Vec corrected_drift(const LocalGeometry& g) {
  Vec b = g.drift;
  for (int i = 0; i < g.dim(); ++i) {
    const Vec a = g.frame.col(i);
    b += 0.5 * g.gamma_coord.contract(a, a);
  }
  return b;
}

FramePoint finish_frame_step(const VectorFieldSystem& sys, FramePoint next, bool reortho) {
  if (!next.x.allFinite() || !next.e.allFinite()) {
    throw FrameDegenerationError("non-finite frame-bundle state");
  }
  if (reortho) return reorthonormalize(sys, next);
  const Mat sigma = checked_frame(sys, next.x);
  const double det = sigma.partialPivLu().solve(next.e).determinant();
  if (std::abs(det) < 1e-6) {
    throw FrameDegenerationError("frame degenerated (det " + std::to_string(det) +
                                 ") at x = " + format_point(next.x));
  }
  return next;
}

// Directional derivative of V along U at r by central differences in bundle coordinates.
BundleVec bundle_directional(const VectorFieldSystem& sys, int field_index, const BundleVec& r,
                             const BundleVec& u) {
  const double norm = u.norm();
  if (norm == 0.0) return BundleVec::Zero(r.size());
  const double eps = sys.fd_step * std::max(1.0, r.cwiseAbs().maxCoeff()) / norm;
  const BundleVec vp = horizontal_fields(sys, r + eps * u)[field_index];
  const BundleVec vm = horizontal_fields(sys, r - eps * u)[field_index];
  return (vp - vm) / (2.0 * eps);
}

}  // namespace

std::string_view scheme_name(SchemeKind kind) {
  for (const auto& e : kSchemes)
    if (e.kind == kind) return e.name;
  return "unknown";
}

std::vector<std::string> scheme_names() {
  std::vector<std::string> out;
  for (const auto& e : kSchemes) out.emplace_back(e.name);
  return out;
}

SchemeKind parse_scheme(std::string_view name) {
  for (const auto& e : kSchemes)
    if (e.name == name) return e.kind;
  std::string valid;
  for (const auto& e : kSchemes) valid += (valid.empty() ? "" : ", ") + std::string(e.name);
  throw InvalidArgument("unknown scheme '" + std::string(name) + "'; valid names: " + valid);
}

bool is_frame_scheme(SchemeKind kind) {
  return kind == SchemeKind::FrameMilstein || kind == SchemeKind::CastellGaines05 ||
         kind == SchemeKind::CastellGaines10;
}

Vec euler_maruyama_step(const VectorFieldSystem& sys, const Vec& x, const StepInput& in) {
  check_input(sys, x, in);
  return x + sys.drift(x) * in.h + checked_frame(sys, x) * in.dw;
}

Vec milstein_step(const VectorFieldSystem& sys, const Vec& x, const StepInput& in) {
  check_input(sys, x, in);
  const LocalGeometry g = local_geometry(sys, x);
  Vec out = x + g.drift * in.h + g.frame * in.dw;
  for (int i = 1; i <= sys.dim; ++i)
    for (int j = 1; j <= sys.dim; ++j) out += in.levy(i - 1, j - 1) * g.directional(i, j);
  return out;
}

Vec cmt_step(const VectorFieldSystem& sys, const Vec& x, const StepInput& in) {
  check_input(sys, x, in);
  return cmt_from(local_geometry(sys, x), in);
}

Vec cmt_step_structure_form(const VectorFieldSystem& sys, const Vec& x, const StepInput& in) {
  check_input(sys, x, in);
  const LocalGeometry g = local_geometry(sys, x);
  const int d = sys.dim;
  const Mat s = symmetric_increment(in);
  Vec out = x + g.drift * in.h + g.frame * in.dw;
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j <= d; ++j) out += 0.5 * s(i - 1, j - 1) * g.directional(i, j);
  for (int k = 0; k < d; ++k) {
    double c = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) c += g.structure(i, k, j) * s(i, j);
    out -= 0.5 * c * g.frame.col(k);
  }
  return out;
}

Vec theta2d_step(const VectorFieldSystem& sys, const Vec& x, const Mat& global_frame,
                 const StepInput& in) {
  if (!sys.flat) {
    throw InvalidArgument(sys.name + ": theta2d requires a system declared flat");
  }
  check_input(sys, x, in);
  // With e = sigma R the projected frame Milstein step is the CMT step driven by R dw.
  return cmt_from(local_geometry(sys, x), in.rotated(global_frame));
}

Vec ac_step(const VectorFieldSystem& sys, const Vec& x, const StepInput& in) {
  check_input(sys, x, in);
  const LocalGeometry g = local_geometry(sys, x);
  const FieldHessians hess = field_hessians(sys, x);
  const int d = sys.dim;
  const Mat a = g.frame * g.frame.transpose();

  // Generator of the Ito SDE applied componentwise to A_k. For A_i this equals
  // 1/2 A_b |> (A_b |> A_i) + (A_0 - 1/2 A_b |> A_b) |> A_i.
  auto generator_on = [&](int k) {
    Vec out = g.jac[k] * g.drift;
    for (int m = 0; m < d; ++m) {
      double s = 0.0;
      for (int n = 0; n < d; ++n)
        for (int p = 0; p < d; ++p) s += a(n, p) * hess[k](m, n, p);
      out(m) += 0.5 * s;
    }
    return out;
  };

  Vec out = cmt_from(g, in);
  out += 0.5 * generator_on(0) * in.h * in.h;
  for (int i = 1; i <= d; ++i) {
    out += generator_on(i) * in.cross0(i - 1);
    out += g.directional(i, 0) * in.crossI(i - 1);
  }
  return out;
}

std::array<BundleVec, kMaxDim + 1> horizontal_fields(const VectorFieldSystem& sys,
                                                     const BundleVec& r) {
  const int d = sys.dim;
  const FramePoint fp = unpack(d, r);
  const LocalGeometry g = local_geometry(sys, fp.x);
  std::array<BundleVec, kMaxDim + 1> out;
  out[0] = pack(horizontal_lift(g.gamma_coord, fp, corrected_drift(g)));
  for (int i = 1; i <= d; ++i) {
    out[i] = pack(basic_horizontal_field(g.gamma_coord, fp, Vec(Vec::Unit(d, i - 1))));
  }
  return out;
}

FramePoint frame_milstein_step(const VectorFieldSystem& sys, const FramePoint& fp,
                               const StepInput& in, bool reorthonormalize_frame) {
  check_input(sys, fp.x, in);
  const int d = sys.dim;
  const LocalGeometry g = local_geometry(sys, fp.x);
  const Tensor3& gamma = g.gamma_coord;

  // Coordinate derivatives of the Christoffel symbols by central differences.
  std::array<Tensor3, kMaxDim> dgamma;
  for (int m = 0; m < d; ++m) {
    const double delta = sys.fd_step * std::max(1.0, std::abs(fp.x(m)));
    Vec xp = fp.x, xm = fp.x;
    xp(m) += delta;
    xm(m) -= delta;
    dgamma[m] = local_geometry(sys, xp).gamma_coord - local_geometry(sys, xm).gamma_coord;
    dgamma[m] *= 1.0 / (2.0 * delta);
  }

  const BundleTangent l0 = horizontal_lift(gamma, fp, corrected_drift(g));
  std::array<BundleTangent, kMaxDim> l;
  for (int i = 0; i < d; ++i) l[i] = basic_horizontal_field(gamma, fp, Vec(Vec::Unit(d, i)));

  Vec x = fp.x + l0.base * in.h;
  Mat e = fp.e + l0.frame * in.h;
  for (int i = 0; i < d; ++i) {
    x += l[i].base * in.dw(i);
    e += l[i].frame * in.dw(i);
  }

  // (B(e_i) |> B(e_j)) J^S_ij with J^S = J + h/2 I the Stratonovich iterated integrals.
  for (int i = 0; i < d; ++i) {
    const Vec v = fp.e.col(i);
    Tensor3 dgamma_v(d);
    for (int m = 0; m < d; ++m) {
      if (v(m) == 0.0) continue;
      Tensor3 t = dgamma[m];
      t *= v(m);
      dgamma_v += t;
    }
    for (int j = 0; j < d; ++j) {
      const double coeff = in.levy(i, j) + (i == j ? 0.5 * in.h : 0.0);
      if (coeff == 0.0) continue;
      const Vec ej = fp.e.col(j);
      const Vec wj = l[i].frame.col(j);
      x += coeff * wj;
      for (int p = 0; p < d; ++p) {
        const Vec ep = fp.e.col(p);
        const Vec col = -dgamma_v.contract(ej, ep) - gamma.contract(wj, ep) -
                        gamma.contract(ej, l[i].frame.col(p));
        e.col(p) += coeff * col;
      }
    }
  }
  return finish_frame_step(sys, {x, e}, reorthonormalize_frame);
}

FramePoint castell_gaines_step(const VectorFieldSystem& sys, const FramePoint& fp,
                               const StepInput& in, Truncation truncation, int ode_substeps,
                               bool reorthonormalize_frame) {
  check_input(sys, fp.x, in);
  if (ode_substeps < 1) throw InvalidArgument("castell_gaines_step: ode_substeps must be >= 1");
  const int d = sys.dim;

  auto series_field = [&](const BundleVec& r) {
    const auto f = horizontal_fields(sys, r);
    BundleVec psi = in.h * f[0];
    for (int i = 1; i <= d; ++i) psi += in.dw(i - 1) * f[i];
    if (truncation == Truncation::Order10) {
      for (int i = 1; i <= d; ++i) {
        for (int j = i + 1; j <= d; ++j) {
          const double area = 0.5 * (in.levy(i - 1, j - 1) - in.levy(j - 1, i - 1));
          if (area == 0.0) continue;
          // [V_i, V_j] = DV_j . V_i - DV_i . V_j
          const BundleVec bracket =
              bundle_directional(sys, j, r, f[i]) - bundle_directional(sys, i, r, f[j]);
          psi += area * bracket;
        }
      }
    }
    return psi;
  };

  BundleVec r = pack(fp);
  const double dt = 1.0 / ode_substeps;
  for (int s = 0; s < ode_substeps; ++s) {
    const BundleVec k1 = series_field(r);
    const BundleVec k2 = series_field(r + 0.5 * dt * k1);
    const BundleVec k3 = series_field(r + 0.5 * dt * k2);
    const BundleVec k4 = series_field(r + dt * k3);
    r += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return finish_frame_step(sys, unpack(d, r), reorthonormalize_frame);
}

FramePoint step(const VectorFieldSystem& sys, SchemeKind kind, const FramePoint& state,
                const StepInput& in, const SchemeParams& params) {
  switch (kind) {
    case SchemeKind::EulerMaruyama:
      return {euler_maruyama_step(sys, state.x, in), state.e};
    case SchemeKind::Milstein:
      return {milstein_step(sys, state.x, in), state.e};
    case SchemeKind::CMT:
      return {cmt_step(sys, state.x, in), state.e};
    case SchemeKind::Theta2D: {
      const Mat r = params.global_frame.size() == 0 ? Mat(Mat::Identity(sys.dim, sys.dim))
                                                     : params.global_frame;
      return {theta2d_step(sys, state.x, r, in), state.e};
    }
    case SchemeKind::AlvesCruzeiro:
      return {ac_step(sys, state.x, in), state.e};
    case SchemeKind::FrameMilstein:
      return frame_milstein_step(sys, state, in, params.reorthonormalize);
    case SchemeKind::CastellGaines05:
      return castell_gaines_step(sys, state, in, Truncation::Order05, params.ode_substeps,
                                 params.reorthonormalize);
    case SchemeKind::CastellGaines10:
      return castell_gaines_step(sys, state, in, Truncation::Order10, params.ode_substeps,
                                 params.reorthonormalize);
  }
  throw InvalidArgument("unknown scheme kind");
}

std::vector<FramePoint> simulate_path(const VectorFieldSystem& sys, SchemeKind kind,
                                      const FramePoint& start, const WienerIncrements& incr,
                                      const SchemeParams& params) {
  if (incr.dim() != sys.dim) {
    throw InvalidArgument("simulate_path: increments have dimension " +
                          std::to_string(incr.dim()) + ", system has " +
                          std::to_string(sys.dim));
  }
  std::vector<FramePoint> path;
  path.reserve(incr.n_steps() + 1);
  path.push_back(start);
  for (std::size_t k = 0; k < incr.n_steps(); ++k) {
    try {
      path.push_back(step(sys, kind, path.back(), incr.step(k), params));
    } catch (const StepError&) {
      throw;
    } catch (const Error& err) {
      throw StepError(k, err.what());
    }
  }
  return path;
}

}  // namespace frameflow
