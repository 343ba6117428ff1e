#pragma once

#include "geonuts/phase.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace geonuts::diagnostics {

/// Column means of a draws matrix (one row per draw).
inline Vec mean(const Matrix& draws) { return draws.colwise().mean().transpose(); }

/// Sample covariance with the n - 1 denominator.
inline Matrix covariance(const Matrix& draws) {
  if (draws.rows() < 2) return Matrix::Zero(draws.cols(), draws.cols());
  const Matrix centered = draws.rowwise() - draws.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(draws.rows() - 1);
}

/// Lag-`lag` autocorrelation of a centered series with variance `var0`.
inline double autocorrelation(const Vec& centered, Index lag, double var0) {
  const Index n = centered.size();
  if (lag >= n) return 0.0;
  const double acov =
      centered.head(n - lag).dot(centered.tail(n - lag)) / static_cast<double>(n);
  return acov / var0;
}

/**
 * @brief Effective sample size with Geyer's initial monotone sequence.
 *
 * Pairs of autocorrelations are summed while positive and forced to be
 * non-increasing; ESS = n / (-1 + 2 * sum of pairs).
 */
inline double effective_sample_size(const Vec& chain) {
  const Index n = chain.size();
  if (n < 4) return static_cast<double>(n);
  const Vec centered = chain.array() - chain.mean();
  const double var0 = centered.squaredNorm() / static_cast<double>(n);
  if (!(var0 > 0.0)) return static_cast<double>(n);

  double tau = -1.0;
  double previous_pair = std::numeric_limits<double>::infinity();
  for (Index k = 0; 2 * k + 1 < n; ++k) {
    double pair = autocorrelation(centered, 2 * k, var0) +
                  autocorrelation(centered, 2 * k + 1, var0);
    if (pair <= 0.0) break;
    pair = std::min(pair, previous_pair);
    previous_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(n)));
  return static_cast<double>(n) / tau;
}

inline Vec effective_sample_size(const Matrix& draws) {
  Vec out(draws.cols());
  for (Index j = 0; j < draws.cols(); ++j) out(j) = effective_sample_size(Vec(draws.col(j)));
  return out;
}

}  // namespace geonuts::diagnostics
