#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace geonuts {

/// Dense column vector of doubles.
using Vec = Eigen::VectorXd;

/// Dense matrix of doubles.
using Matrix = Eigen::MatrixXd;

using Index = Eigen::Index;

/// Raised when vector or matrix shapes disagree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for non-finite inputs and failed numerical procedures.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * @brief One point of phase space in coordinates.
 *
 * Position `q` and momentum `p` always have the same dimension.
 */
struct PhasePoint {
  Vec q;
  Vec p;

  PhasePoint() = default;

  PhasePoint(Vec position, Vec momentum)
      : q(std::move(position)), p(std::move(momentum)) {
    if (q.size() < 1 || q.size() != p.size()) {
      throw DimensionError("PhasePoint: q and p must share a dimension >= 1 (got " +
                           std::to_string(q.size()) + " and " + std::to_string(p.size()) +
                           ")");
    }
  }

  Index dimension() const { return q.size(); }

  bool finite() const { return q.allFinite() && p.allFinite(); }
};

/// One recorded state of an integrated trajectory.
struct TraceEntry {
  double t = 0.0;
  PhasePoint state;
  double hamiltonian = 0.0;
  double criterion_classic = 0.0;
  double criterion_generalized = 0.0;

  bool fired_classic() const { return criterion_classic < 0.0; }
  bool fired_generalized() const { return criterion_generalized < 0.0; }
};

/**
 * @brief Time-indexed record of a trajectory.
 *
 * Entries are recorded on a uniform grid `t_k = k * step_size`.
 * `terminated_at` holds the time of the first entry at which the active
 * criterion fired, if it fired at all.
 */
struct TrajectoryTrace {
  std::vector<TraceEntry> entries;
  double step_size = 0.0;
  std::optional<double> terminated_at;
  std::optional<std::size_t> terminated_step;
};

/**
 * @brief A trajectory step whose energy error or numerics blew up.
 *
 * Carries the index of the offending step and, when raised from a whole
 * trajectory integration, the trace recorded up to that step.
 */
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, std::size_t step,
                  std::optional<TrajectoryTrace> partial = std::nullopt)
      : NumericalError(what), step_(step), partial_(std::move(partial)) {}

  std::size_t step() const noexcept { return step_; }
  const std::optional<TrajectoryTrace>& partial_trace() const noexcept { return partial_; }

 private:
  std::size_t step_;
  std::optional<TrajectoryTrace> partial_;
};

inline void require_same_dimension(const Vec& a, const Vec& b, const char* where) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(where) + ": dimension mismatch (" +
                         std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

inline void require_finite(const Vec& v, const char* where) {
  if (!v.allFinite()) {
    throw NumericalError(std::string(where) + ": non-finite input");
  }
}

/// Euclidean contraction `sum_j a_j b_j`.
inline double dot(const Vec& a, const Vec& b) {
  require_same_dimension(a, b, "dot");
  return a.dot(b);
}

/**
 * @brief Inner product of two covectors under a symmetric bilinear form.
 *
 * Computes `sum_jk a_j b_k lambda(j, k)`.
 */
inline double weighted_inner(const Vec& a, const Vec& b, const Matrix& lambda) {
  require_same_dimension(a, b, "weighted_inner");
  if (lambda.rows() != a.size() || lambda.cols() != a.size()) {
    throw DimensionError("weighted_inner: matrix is " + std::to_string(lambda.rows()) + "x" +
                         std::to_string(lambda.cols()) + ", vectors have dimension " +
                         std::to_string(a.size()));
  }
  return a.dot(lambda * b);
}

/// Eigendecomposition of a symmetric matrix with deterministic output.
struct SymmetricEigen {
  Vec values;     ///< ascending
  Matrix vectors; ///< orthonormal columns
};

/**
 * @brief Symmetric eigendecomposition.
 *
 * Eigenvalues come back ascending. Each eigenvector is flipped so that its
 * largest-magnitude component is positive (first such component on ties).
 */
inline SymmetricEigen symmetric_eigen(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() < 1) {
    throw DimensionError("symmetric_eigen: matrix must be square and non-empty");
  }
  if (!a.allFinite()) {
    throw NumericalError("symmetric_eigen: non-finite matrix");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric_eigen: eigendecomposition failed");
  }
  SymmetricEigen out{solver.eigenvalues(), solver.eigenvectors()};
  for (Index j = 0; j < out.vectors.cols(); ++j) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < out.vectors.rows(); ++i) {
      const double mag = std::abs(out.vectors(i, j));
      if (mag > best * (1.0 + 1e-12)) {
        best = mag;
        arg = i;
      }
    }
    if (out.vectors(arg, j) < 0.0) out.vectors.col(j) *= -1.0;
  }
  return out;
}

/// `A^power` for a symmetric positive-definite `A`, through its eigenbasis.
inline Matrix spd_power(const Matrix& a, double power) {
  const SymmetricEigen eig = symmetric_eigen(a);
  if (eig.values.minCoeff() <= 0.0) {
    throw NumericalError("spd_power: matrix is not positive-definite");
  }
  const Vec scaled = eig.values.array().pow(power).matrix();
  return eig.vectors * scaled.asDiagonal() * eig.vectors.transpose();
}

}  // namespace geonuts
