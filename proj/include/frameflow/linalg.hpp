#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Dense>

namespace frameflow {

// Largest base dimension supported by the stack-allocated vector types.
inline constexpr int kMaxDim = 6;
inline constexpr int kMaxBundleDim = kMaxDim + kMaxDim * kMaxDim;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using BundleVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxBundleDim, 1>;
using BundleMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxBundleDim, kMaxBundleDim>;

/// Dense rank-3 array T(a, b, c) with all extents equal to `dim`.
class Tensor3 {
 public:
  Tensor3() {}
  explicit Tensor3(int dim) : dim_(dim) {
    if (dim < 0 || dim > kMaxDim) throw std::invalid_argument("Tensor3: unsupported dimension");
    std::fill_n(data_.begin(), size(), 0.0);
  }
  // Only the live dim^3 block is copied; the rest of the storage is never read.
  Tensor3(const Tensor3& o) : dim_(o.dim_) { std::copy_n(o.data_.begin(), size(), data_.begin()); }
  Tensor3& operator=(const Tensor3& o) {
    dim_ = o.dim_;
    std::copy_n(o.data_.begin(), size(), data_.begin());
    return *this;
  }

  int dim() const { return dim_; }

  double& operator()(int a, int b, int c) { return data_[index(a, b, c)]; }
  double operator()(int a, int b, int c) const { return data_[index(a, b, c)]; }

  /// Contraction T(a, ., .) against u and v in the last two slots.
  Vec contract(const Vec& u, const Vec& v) const {
    Vec out = Vec::Zero(dim_);
    for (int a = 0; a < dim_; ++a) {
      double s = 0.0;
      for (int b = 0; b < dim_; ++b) {
        if (u(b) == 0.0) continue;
        for (int c = 0; c < dim_; ++c) s += (*this)(a, b, c) * u(b) * v(c);
      }
      out(a) = s;
    }
    return out;
  }

  double max_abs() const {
    double m = 0.0;
    for (int i = 0; i < dim_ * dim_ * dim_; ++i) m = std::max(m, std::abs(data_[i]));
    return m;
  }

  Tensor3& operator+=(const Tensor3& o) {
    for (int i = 0; i < dim_ * dim_ * dim_; ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor3& operator*=(double s) {
    for (int i = 0; i < dim_ * dim_ * dim_; ++i) data_[i] *= s;
    return *this;
  }
  friend Tensor3 operator-(Tensor3 a, const Tensor3& b) {
    for (int i = 0; i < a.dim_ * a.dim_ * a.dim_; ++i) a.data_[i] -= b.data_[i];
    return a;
  }

 private:
  std::size_t size() const { return static_cast<std::size_t>(dim_ * dim_ * dim_); }
  std::size_t index(int a, int b, int c) const {
    return static_cast<std::size_t>((a * dim_ + b) * dim_ + c);
  }

  int dim_ = 0;
  std::array<double, kMaxDim * kMaxDim * kMaxDim> data_;
};

// Errors. Everything derives from Error so callers can catch once.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class EllipticityError : public Error {
 public:
  using Error::Error;
};

class FrameDegenerationError : public Error {
 public:
  using Error::Error;
};

class MissingDerivativesError : public Error {
 public:
  using Error::Error;
};

class InvariantError : public Error {
 public:
  using Error::Error;
};

/// A step failure annotated with the index of the step that failed.
class StepError : public Error {
 public:
  StepError(std::size_t step, const std::string& what)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

std::string format_point(const Vec& x);

}  // namespace frameflow
