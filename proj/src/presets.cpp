#include "frameflow/presets.hpp"

#include <cmath>

namespace frameflow {

namespace {

constexpr double kNoncommFloor = 0.2;
constexpr double kNoncommSoftness = 0.05;

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

FieldHessians zero_hessians(int d) {
  FieldHessians h;
  for (int i = 0; i <= d; ++i) h[i] = Tensor3(d);
  return h;
}

FieldJacobians zero_jacobians(int d) {
  FieldJacobians j;
  for (int i = 0; i <= d; ++i) j[i] = Mat::Zero(d, d);
  return j;
}

VectorFieldSystem make_flat() {
  VectorFieldSystem s;
  s.name = "flat";
  s.dim = 2;
  s.flat = true;
  s.drift = [](const Vec&) { return vec2(0.3, -0.2); };
  s.frame = [](const Vec&) { return Mat(Mat::Identity(2, 2)); };
  s.jacobians = [](const Vec&) { return zero_jacobians(2); };
  s.hessians = [](const Vec&) { return zero_hessians(2); };
  return s;
}

VectorFieldSystem make_diag_commuting() {
  VectorFieldSystem s;
  s.name = "diag-commuting";
  s.dim = 2;
  // g = diag(1/(1+x_1^2), 1/(1+x_2^2)) is a product metric, hence flat.
  s.flat = true;
  s.drift = [](const Vec&) { return vec2(0.2, -0.1); };
  s.frame = [](const Vec& x) {
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = std::sqrt(1.0 + x(0) * x(0));
    m(1, 1) = std::sqrt(1.0 + x(1) * x(1));
    return m;
  };
  s.jacobians = [](const Vec& x) {
    FieldJacobians j = zero_jacobians(2);
    j[1](0, 0) = x(0) / std::sqrt(1.0 + x(0) * x(0));
    j[2](1, 1) = x(1) / std::sqrt(1.0 + x(1) * x(1));
    return j;
  };
  s.hessians = [](const Vec& x) {
    FieldHessians h = zero_hessians(2);
    h[1](0, 0, 0) = std::pow(1.0 + x(0) * x(0), -1.5);
    h[2](1, 1, 1) = std::pow(1.0 + x(1) * x(1), -1.5);
    return h;
  };
  return s;
}

VectorFieldSystem make_gbm1d() {
  VectorFieldSystem s;
  s.name = "gbm1d";
  s.dim = 1;
  s.flat = true;
  s.drift = [](const Vec&) { return Vec(Vec::Zero(1)); };
  s.frame = [](const Vec& x) {
    Mat m(1, 1);
    m(0, 0) = x(0);
    return m;
  };
  s.jacobians = [](const Vec&) {
    FieldJacobians j = zero_jacobians(1);
    j[1](0, 0) = 1.0;
    return j;
  };
  s.hessians = [](const Vec&) { return zero_hessians(1); };
  return s;
}

struct Floor {
  double floor;
  double soft;

  double value(double s) const {
    if (floor <= 0.0) return s;
    const double z = (s - floor) / soft;
    const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    return floor + soft * softplus;
  }
  double slope(double s) const {
    if (floor <= 0.0) return 1.0;
    return 1.0 / (1.0 + std::exp(-(s - floor) / soft));
  }
  double curvature(double s) const {
    if (floor <= 0.0) return 0.0;
    const double sig = slope(s);
    return sig * (1.0 - sig) / soft;
  }
};

}  // namespace

VectorFieldSystem make_noncomm2d(double floor, double softness) {
  const Floor phi{floor, softness};
  VectorFieldSystem s;
  s.name = "noncomm2d";
  s.dim = 2;
  s.flat = false;
  s.drift = [](const Vec&) { return Vec(Vec::Zero(2)); };
  s.frame = [phi](const Vec& x) {
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = 1.0;
    m(1, 1) = phi.value(x(0));
    return m;
  };
  s.jacobians = [phi](const Vec& x) {
    FieldJacobians j = zero_jacobians(2);
    j[2](1, 0) = phi.slope(x(0));
    return j;
  };
  s.hessians = [phi](const Vec& x) {
    FieldHessians h = zero_hessians(2);
    h[2](1, 0, 0) = phi.curvature(x(0));
    return h;
  };
  return s;
}

std::vector<std::string> problem_names() { return {"flat", "diag-commuting", "noncomm2d", "gbm1d"}; }

Problem make_problem(std::string_view name) {
  if (name == "flat") {
    return {make_flat(), vec2(0.0, 0.0), "constant orthonormal fields, constant drift"};
  }
  if (name == "diag-commuting") {
    return {make_diag_commuting(), vec2(0.5, -0.5), "A_i = sqrt(1 + x_i^2) e_i, commuting"};
  }
  if (name == "noncomm2d") {
    return {make_noncomm2d(kNoncommFloor, kNoncommSoftness), vec2(1.0, 0.0),
            "A_1 = (1, 0), A_2 = (0, x^1) with a smooth floor at x^1 = 0.2"};
  }
  if (name == "gbm1d") {
    Vec x0(1);
    x0 << 1.0;
    return {make_gbm1d(), x0, "d = 1, A_1 = x, geometric Brownian motion"};
  }
  std::string valid;
  for (const auto& n : problem_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw InvalidArgument("unknown problem '" + std::string(name) + "'; valid names: " + valid);
}

}  // namespace frameflow
