#pragma once

#include "geonuts/phase.hpp"
#include "geonuts/targets.hpp"

#include <random>
#include <vector>

namespace geonuts {

/**
 * @brief The metric evaluated at one position.
 *
 * `inverse_metric` is the matrix that contracts momenta in the kinetic
 * energy. It is stored together with its eigen-factors: for SoftAbs,
 * `eigenvalues` are those of the potential's Hessian and
 * `softabs_eigenvalues` are the regularized metric eigenvalues; for a
 * Euclidean metric both hold the eigenvalues of the mass matrix.
 */
struct MetricAt {
  Vec q;
  Vec eigenvalues;
  Matrix eigenvectors;
  Vec softabs_eigenvalues;
  Matrix inverse_metric;
  /// `B` with `B B^T` equal to the metric (the inverse of `inverse_metric`).
  Matrix momentum_factor;
  double log_det_inverse_metric = 0.0;
  bool position_dependent = false;

  Index dimension() const { return inverse_metric.rows(); }
};

/// Derivatives of the inverse metric with respect to position.
struct MetricGradient {
  MetricAt at;
  /// `d(inverse_metric)/dq_k` for each k.
  std::vector<Matrix> d_inverse_metric;
  /// `d(log det inverse_metric)/dq_k` for each k.
  Vec d_log_det;
};

namespace softabs {

/// Below this |alpha * lambda| the closed forms lose accuracy and series are used.
inline constexpr double kSeriesThreshold = 1e-4;
inline constexpr double kDerivativeSeriesThreshold = 1e-2;
/// Eigenvalue pairs closer than this use the derivative instead of a divided difference.
inline constexpr double kDegenerateGap = 1e-8;

/// `lambda * coth(alpha * lambda)`, with the limit `1 / alpha` at zero.
inline double map(double lambda, double alpha) {
  const double x = alpha * lambda;
  if (std::abs(x) < kSeriesThreshold) return 1.0 / alpha + alpha * lambda * lambda / 3.0;
  return lambda / std::tanh(x);
}

/// `1 / map(lambda, alpha)`.
inline double inverse_map(double lambda, double alpha) {
  const double x = alpha * lambda;
  if (std::abs(x) < kSeriesThreshold) return alpha * (1.0 - x * x / 3.0);
  return std::tanh(x) / lambda;
}

/// Derivative of `inverse_map` with respect to lambda.
inline double inverse_map_derivative(double lambda, double alpha) {
  const double x = alpha * lambda;
  if (std::abs(x) < kDerivativeSeriesThreshold) {
    const double x2 = x * x;
    return alpha * alpha * x * (-2.0 / 3.0 + x2 * (8.0 / 15.0 - x2 * 102.0 / 315.0));
  }
  const double th = std::tanh(x);
  return (x * (1.0 - th * th) - th) / (lambda * lambda);
}

/// Divided differences of `inverse_map` over a set of eigenvalues.
inline Matrix divided_differences(const Vec& lambda, double alpha) {
  const Index d = lambda.size();
  Matrix out(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      const double gap = lambda(i) - lambda(j);
      if (std::abs(gap) < kDegenerateGap) {
        out(i, j) = inverse_map_derivative(0.5 * (lambda(i) + lambda(j)), alpha);
      } else {
        out(i, j) = (inverse_map(lambda(i), alpha) - inverse_map(lambda(j), alpha)) / gap;
      }
    }
  }
  return out;
}

}  // namespace softabs

/**
 * @brief Constant mass matrix; the inverse metric is `M^-1`.
 */
class EuclideanMetric {
 public:
  explicit EuclideanMetric(Matrix mass) : mass_(std::move(mass)) {
    if (mass_.rows() != mass_.cols() || mass_.rows() < 1) {
      throw DimensionError("EuclideanMetric: mass matrix must be square and non-empty");
    }
    if (!mass_.isApprox(mass_.transpose(), 1e-12)) {
      throw NumericalError("EuclideanMetric: mass matrix is not symmetric");
    }
    Eigen::LLT<Matrix> llt(mass_);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("EuclideanMetric: mass matrix is not positive-definite");
    }
    cholesky_ = llt.matrixL();
    inverse_mass_ = llt.solve(Matrix::Identity(dimension(), dimension()));
    inverse_mass_ = 0.5 * (inverse_mass_ + inverse_mass_.transpose());

    const SymmetricEigen eig = symmetric_eigen(mass_);
    cached_.eigenvalues = eig.values;
    cached_.softabs_eigenvalues = eig.values;
    cached_.eigenvectors = eig.vectors;
    cached_.inverse_metric = inverse_mass_;
    cached_.momentum_factor = cholesky_;
    cached_.log_det_inverse_metric = -eig.values.array().log().sum();
    cached_.position_dependent = false;
  }

  static EuclideanMetric identity(Index dim) { return EuclideanMetric(Matrix::Identity(dim, dim)); }

  Index dimension() const { return mass_.rows(); }
  const Matrix& mass() const { return mass_; }
  const Matrix& inverse_mass() const { return inverse_mass_; }
  const Matrix& cholesky() const { return cholesky_; }

  MetricAt at(const Vec& q) const {
    if (q.size() != dimension()) {
      throw DimensionError("EuclideanMetric: position has the wrong dimension");
    }
    MetricAt out = cached_;
    out.q = q;
    return out;
  }

  MetricGradient gradient(const Vec& q) const {
    return {at(q), std::vector<Matrix>(static_cast<std::size_t>(dimension()),
                                       Matrix::Zero(dimension(), dimension())),
            Vec::Zero(dimension())};
  }

 private:
  Matrix mass_;
  Matrix inverse_mass_;
  Matrix cholesky_;
  MetricAt cached_;
};

/**
 * @brief SoftAbs metric built from the Hessian of the potential.
 *
 * With `H = Q diag(lambda) Q^T` the metric is `Q diag(s) Q^T`, where
 * `s = lambda coth(alpha lambda)`, and the inverse metric is
 * `Q diag(1/s) Q^T`.
 */
template <HessianDifferentiableTarget Target>
class SoftAbsMetric {
 public:
  SoftAbsMetric(Target target, double alpha) : target_(std::move(target)), alpha_(alpha) {
    if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) {
      throw NumericalError("SoftAbsMetric: alpha must be positive");
    }
  }

  Index dimension() const { return target_.dimension(); }
  double alpha() const { return alpha_; }
  const Target& target() const { return target_; }

  MetricAt at(const Vec& q) const {
    const SymmetricEigen eig = symmetric_eigen(target_.hessian(q));
    MetricAt out;
    out.q = q;
    out.eigenvalues = eig.values;
    out.eigenvectors = eig.vectors;
    out.softabs_eigenvalues.resize(eig.values.size());
    for (Index i = 0; i < eig.values.size(); ++i) {
      const double s = softabs::map(eig.values(i), alpha_);
      if (!(s > 0.0) || !std::isfinite(s)) {
        throw NumericalError("SoftAbsMetric: non-positive regularized eigenvalue");
      }
      out.softabs_eigenvalues(i) = s;
    }
    const Vec inv_s = out.softabs_eigenvalues.cwiseInverse();
    out.inverse_metric = eig.vectors * inv_s.asDiagonal() * eig.vectors.transpose();
    out.inverse_metric = 0.5 * (out.inverse_metric + out.inverse_metric.transpose());
    out.momentum_factor = eig.vectors * out.softabs_eigenvalues.cwiseSqrt().asDiagonal();
    out.log_det_inverse_metric = -out.softabs_eigenvalues.array().log().sum();
    out.position_dependent = true;
    return out;
  }

  /// Inverse metric and its position derivatives (Daleckii-Krein form).
  MetricGradient gradient(const Vec& q) const {
    MetricGradient out{at(q), {}, Vec::Zero(dimension())};
    const Matrix& basis = out.at.eigenvectors;
    const Matrix divided = softabs::divided_differences(out.at.eigenvalues, alpha_);
    out.d_inverse_metric.reserve(static_cast<std::size_t>(dimension()));
    for (Index k = 0; k < dimension(); ++k) {
      const Matrix rotated = basis.transpose() * target_.hessian_derivative(q, k) * basis;
      const Matrix inner = divided.cwiseProduct(rotated);
      Matrix d = basis * inner * basis.transpose();
      out.d_inverse_metric.push_back(0.5 * (d + d.transpose()));
      // tr(G dLambda) in the eigenbasis
      out.d_log_det(k) = out.at.softabs_eigenvalues.dot(inner.diagonal());
    }
    return out;
  }

 private:
  Target target_;
  double alpha_;
};

template <class M>
concept MetricModel = requires(const M& metric, const Vec& q) {
  { metric.at(q) } -> std::same_as<MetricAt>;
  { metric.gradient(q) } -> std::same_as<MetricGradient>;
  { metric.dimension() } -> std::convertible_to<Index>;
};

/// Position-wise derivatives of the inverse metric.
template <MetricModel Metric>
std::vector<Matrix> metric_derivatives(const Metric& metric, const Vec& q) {
  return metric.gradient(q).d_inverse_metric;
}

/**
 * Kinetic energy. Riemannian metrics include `-0.5 log det inverse_metric`;
 * the constant Euclidean log-determinant is dropped.
 */
inline double kinetic_energy(const MetricAt& at, const Vec& p) {
  const double quad = 0.5 * weighted_inner(p, p, at.inverse_metric);
  return at.position_dependent ? quad - 0.5 * at.log_det_inverse_metric : quad;
}

/// Draw `p ~ N(0, metric)` using the stored factor.
template <class RNG>
Vec sample_momentum(const MetricAt& at, RNG& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec z(at.dimension());
  for (Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return at.momentum_factor * z;
}

}  // namespace geonuts
