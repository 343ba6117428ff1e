#pragma once

#include "geonuts/phase.hpp"

#include <concepts>
#include <functional>

namespace geonuts {

/**
 * A potential `V(q) = -log pi(q)` with analytic first and second
 * derivatives.
 */
template <class T>
concept TargetModel = requires(const T& target, const Vec& q) {
  { target.dimension() } -> std::convertible_to<Index>;
  { target.potential(q) } -> std::convertible_to<double>;
  { target.gradient(q) } -> std::convertible_to<Vec>;
  { target.hessian(q) } -> std::convertible_to<Matrix>;
};

/**
 * A target that also supplies `d(hessian)/dq_k`, which the SoftAbs metric
 * derivatives need.
 */
template <class T>
concept HessianDifferentiableTarget =
    TargetModel<T> && requires(const T& target, const Vec& q, Index k) {
      { target.hessian_derivative(q, k) } -> std::convertible_to<Matrix>;
    };

/// Zero-mean Gaussian with covariance `sigma`.
class GaussianTarget {
 public:
  explicit GaussianTarget(Matrix covariance) : covariance_(std::move(covariance)) {
    if (covariance_.rows() != covariance_.cols() || covariance_.rows() < 1) {
      throw DimensionError("GaussianTarget: covariance must be square and non-empty");
    }
    if (!covariance_.isApprox(covariance_.transpose(), 1e-12)) {
      throw NumericalError("GaussianTarget: covariance is not symmetric");
    }
    Eigen::LLT<Matrix> llt(covariance_);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("GaussianTarget: covariance is not positive-definite");
    }
    precision_ = llt.solve(Matrix::Identity(dimension(), dimension()));
    precision_ = 0.5 * (precision_ + precision_.transpose());
  }

  /// Bivariate unit-variance Gaussian with correlation `rho`.
  static GaussianTarget correlated(double rho) {
    if (!(rho > -1.0 && rho < 1.0)) {
      throw NumericalError("GaussianTarget: correlation must lie in (-1, 1)");
    }
    Matrix sigma(2, 2);
    sigma << 1.0, rho, rho, 1.0;
    return GaussianTarget(sigma);
  }

  static GaussianTarget standard(Index dim) {
    return GaussianTarget(Matrix::Identity(dim, dim));
  }

  Index dimension() const { return covariance_.rows(); }
  const Matrix& covariance() const { return covariance_; }
  const Matrix& precision() const { return precision_; }

  double potential(const Vec& q) const {
    check(q);
    return 0.5 * q.dot(precision_ * q);
  }

  Vec gradient(const Vec& q) const {
    check(q);
    return precision_ * q;
  }

  Matrix hessian(const Vec& q) const {
    check(q);
    return precision_;
  }

  Matrix hessian_derivative(const Vec& q, Index) const {
    check(q);
    return Matrix::Zero(dimension(), dimension());
  }

 private:
  void check(const Vec& q) const {
    if (q.size() != dimension()) {
      throw DimensionError("GaussianTarget: expected dimension " + std::to_string(dimension()) +
                           ", got " + std::to_string(q.size()));
    }
    require_finite(q, "GaussianTarget");
  }

  Matrix covariance_;
  Matrix precision_;
};

/**
 * @brief The twisted ("banana") Gaussian in two dimensions.
 *
 * V(q) = 0.5 * [ q1^2 / s1^2 + (q2 + b q1^2 - 100 b)^2 / s2^2 ]
 *
 * Defaults are b = 0.03, s1 = 0.01, s2 = 1. Note that s1 = 0.01 pins q1
 * very tightly; the form more common elsewhere uses s1 = 10.
 */
class BananaTarget {
 public:
  explicit BananaTarget(double beta = 0.03, double sigma1 = 0.01, double sigma2 = 1.0)
      : beta_(beta), sigma1_(sigma1), sigma2_(sigma2) {
    if (!std::isfinite(beta_)) throw NumericalError("BananaTarget: beta must be finite");
    if (!(sigma1_ > 0.0) || !std::isfinite(sigma1_)) {
      throw NumericalError("BananaTarget: sigma1 must be positive");
    }
    if (!(sigma2_ > 0.0) || !std::isfinite(sigma2_)) {
      throw NumericalError("BananaTarget: sigma2 must be positive");
    }
  }

  Index dimension() const { return 2; }
  double beta() const { return beta_; }
  double sigma1() const { return sigma1_; }
  double sigma2() const { return sigma2_; }

  /// The point where the potential vanishes.
  Vec mode() const { return Vec{{0.0, 100.0 * beta_}}; }

  double potential(const Vec& q) const {
    check(q);
    const double u = warp(q);
    return 0.5 * (q(0) * q(0) / (sigma1_ * sigma1_) + u * u / (sigma2_ * sigma2_));
  }

  Vec gradient(const Vec& q) const {
    check(q);
    const double u = warp(q);
    const double s2 = sigma2_ * sigma2_;
    return Vec{{q(0) / (sigma1_ * sigma1_) + 2.0 * beta_ * q(0) * u / s2, u / s2}};
  }

  Matrix hessian(const Vec& q) const {
    check(q);
    const double u = warp(q);
    const double s2 = sigma2_ * sigma2_;
    Matrix h(2, 2);
    h(0, 0) = 1.0 / (sigma1_ * sigma1_) + (2.0 * beta_ * u + 4.0 * beta_ * beta_ * q(0) * q(0)) / s2;
    h(0, 1) = h(1, 0) = 2.0 * beta_ * q(0) / s2;
    h(1, 1) = 1.0 / s2;
    return h;
  }

  /// Third derivatives: the matrix `d(hessian)/dq_k`.
  Matrix hessian_derivative(const Vec& q, Index k) const {
    check(q);
    const double s2 = sigma2_ * sigma2_;
    Matrix d = Matrix::Zero(2, 2);
    if (k == 0) {
      d(0, 0) = 12.0 * beta_ * beta_ * q(0) / s2;
      d(0, 1) = d(1, 0) = 2.0 * beta_ / s2;
    } else if (k == 1) {
      d(0, 0) = 2.0 * beta_ / s2;
    } else {
      throw DimensionError("BananaTarget: derivative index out of range");
    }
    return d;
  }

 private:
  double warp(const Vec& q) const { return q(1) + beta_ * q(0) * q(0) - 100.0 * beta_; }

  void check(const Vec& q) const {
    if (q.size() != 2) {
      throw DimensionError("BananaTarget: expected dimension 2, got " + std::to_string(q.size()));
    }
    require_finite(q, "BananaTarget");
  }

  double beta_;
  double sigma1_;
  double sigma2_;
};

// Central finite differences, used to cross-check the analytic derivatives.
namespace fd {

inline double step_for(double x, double h) { return h * std::max(1.0, std::abs(x)); }

/// Gradient of a scalar function.
inline Vec gradient(const std::function<double(const Vec&)>& f, const Vec& q, double h = 1e-5) {
  Vec g(q.size());
  for (Index i = 0; i < q.size(); ++i) {
    const double hi = step_for(q(i), h);
    Vec up = q, down = q;
    up(i) += hi;
    down(i) -= hi;
    g(i) = (f(up) - f(down)) / (2.0 * hi);
  }
  return g;
}

/// Jacobian of a vector function; column `i` holds `d f / d q_i`.
inline Matrix jacobian(const std::function<Vec(const Vec&)>& f, const Vec& q, double h = 1e-5) {
  const Vec f0 = f(q);
  Matrix jac(f0.size(), q.size());
  for (Index i = 0; i < q.size(); ++i) {
    const double hi = step_for(q(i), h);
    Vec up = q, down = q;
    up(i) += hi;
    down(i) -= hi;
    jac.col(i) = (f(up) - f(down)) / (2.0 * hi);
  }
  return jac;
}

/// Derivative of a matrix-valued function along coordinate `k`.
inline Matrix matrix_derivative(const std::function<Matrix(const Vec&)>& f, const Vec& q, Index k,
                                double h = 1e-5) {
  const double hk = step_for(q(k), h);
  Vec up = q, down = q;
  up(k) += hk;
  down(k) -= hk;
  return (f(up) - f(down)) / (2.0 * hk);
}

}  // namespace fd

}  // namespace geonuts
