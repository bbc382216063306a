#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "frameflow/geometry.hpp"
#include "frameflow/noise.hpp"

namespace frameflow {

enum class SchemeKind {
  EulerMaruyama,
  Milstein,
  FrameMilstein,
  CMT,
  Theta2D,
  AlvesCruzeiro,
  CastellGaines05,
  CastellGaines10,
};

/// CLI-facing name: em, milstein, frame-milstein, cmt, theta2d, ac, cg05, cg10.
std::string_view scheme_name(SchemeKind kind);
std::vector<std::string> scheme_names();
/// Throws InvalidArgument listing the valid names on a miss.
SchemeKind parse_scheme(std::string_view name);
/// True for schemes whose state is a FramePoint evolving on the frame bundle.
bool is_frame_scheme(SchemeKind kind);

enum class Truncation { Order05, Order10 };

// Base-space steppers.

/// x + A_0 h + A_i dw_i
Vec euler_maruyama_step(const VectorFieldSystem& sys, const Vec& x, const StepInput& in);
/// Euler step + (A_i |> A_j) J_ij with the supplied Ito iterated integrals.
Vec milstein_step(const VectorFieldSystem& sys, const Vec& x, const StepInput& in);
/// Euler step + 1/2 (A_i |>> A_j)(dw_i dw_j - h delta_ij); no Levy areas.
Vec cmt_step(const VectorFieldSystem& sys, const Vec& x, const StepInput& in);
/// The same step written with structure constants instead of connection coefficients:
/// 1/2 (A_i |> A_j) S_ij - 1/2 K^i_kj S_ij A_k with S_ij = dw_i dw_j - h delta_ij.
Vec cmt_step_structure_form(const VectorFieldSystem& sys, const Vec& x, const StepInput& in);
/// Frame Milstein projected with the fixed global frame sigma(x) * global_frame.
/// Only for systems declared flat.
Vec theta2d_step(const VectorFieldSystem& sys, const Vec& x, const Mat& global_frame,
                 const StepInput& in);
/// Weak order-2 step: cmt_step + 1/2 (L A_0) h^2 + (L A_i) J_0i + (A_i |> A_0) J_i0.
Vec ac_step(const VectorFieldSystem& sys, const Vec& x, const StepInput& in);

// Frame-bundle steppers.

/// Stratonovich Milstein step for the frame-bundle SDE driven by the horizontal lift of
/// the corrected drift and the basic horizontal fields B(e_i).
FramePoint frame_milstein_step(const VectorFieldSystem& sys, const FramePoint& fp,
                               const StepInput& in, bool reorthonormalize_frame = false);
/// Time-1 flow of the truncated exponential Lie series, integrated by classical RK4.
FramePoint castell_gaines_step(const VectorFieldSystem& sys, const FramePoint& fp,
                               const StepInput& in, Truncation truncation, int ode_substeps,
                               bool reorthonormalize_frame = false);

/// Packed horizontal fields at r: [0] lift of the corrected drift, [i] = B(e_i).
std::array<BundleVec, kMaxDim + 1> horizontal_fields(const VectorFieldSystem& sys,
                                                     const BundleVec& r);

struct SchemeParams {
  int ode_substeps = 4;
  bool reorthonormalize = true;
  /// Orthogonal matrix for theta2d; empty means identity.
  Mat global_frame;
};

/// One step of any scheme. Base schemes carry the frame through unchanged.
FramePoint step(const VectorFieldSystem& sys, SchemeKind kind, const FramePoint& state,
                const StepInput& in, const SchemeParams& params = {});

/// Fold `step` over every grid step; element 0 is the start. Step failures surface as
/// StepError carrying the failing step index.
std::vector<FramePoint> simulate_path(const VectorFieldSystem& sys, SchemeKind kind,
                                      const FramePoint& start, const WienerIncrements& incr,
                                      const SchemeParams& params = {});

}  // namespace frameflow
