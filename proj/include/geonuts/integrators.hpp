#pragma once

#include "geonuts/metrics.hpp"
#include "geonuts/phase.hpp"
#include "geonuts/targets.hpp"

#include <limits>
#include <type_traits>

namespace geonuts {

/// Time direction of a simulation step.
enum class Direction { Backward, Forward };

inline double signed_step(double step_size, Direction dir) {
  return dir == Direction::Forward ? step_size : -step_size;
}

struct IntegratorConfig {
  double step_size = 0.1;
  /// Max-norm change between successive fixed-point iterates that counts as converged.
  double fixed_point_tol = 1e-10;
  int fixed_point_max_iters = 100;

  void validate() const {
    if (!(step_size > 0.0) || !std::isfinite(step_size)) {
      throw std::invalid_argument("step_size must be positive");
    }
    if (!(fixed_point_tol > 0.0)) throw std::invalid_argument("fp_tol must be positive");
    if (fixed_point_max_iters < 1) throw std::invalid_argument("fp_max_iters must be >= 1");
  }
};

/// Total energy `V(q) + T(q, p)`.
template <TargetModel Target, MetricModel Metric>
double hamiltonian(const Target& target, const Metric& metric, const PhasePoint& z) {
  return target.potential(z.q) + kinetic_energy(metric.at(z.q), z.p);
}

template <TargetModel Target>
double hamiltonian(const Target& target, const MetricAt& at, const PhasePoint& z) {
  return target.potential(z.q) + kinetic_energy(at, z.p);
}

/**
 * @brief One kick-drift-kick leapfrog step for a constant mass matrix.
 *
 * A negative `step` integrates backward in time.
 */
template <TargetModel Target>
PhasePoint leapfrog_step(const PhasePoint& z, const Target& target, const EuclideanMetric& metric,
                         double step) {
  Vec p_half = z.p - 0.5 * step * target.gradient(z.q);
  Vec q_new = z.q + step * (metric.inverse_mass() * p_half);
  if (!q_new.allFinite()) throw DivergenceError("leapfrog: non-finite position", 0);
  Vec p_new = p_half - 0.5 * step * target.gradient(q_new);
  PhasePoint out(std::move(q_new), std::move(p_new));
  if (!out.finite()) throw DivergenceError("leapfrog: non-finite state", 0);
  return out;
}

namespace detail {

// dH/dq for a position-dependent metric, given the derivatives at q.
template <TargetModel Target>
Vec position_force(const Target& target, const MetricGradient& g, const Vec& p) {
  Vec out = target.gradient(g.at.q);
  for (Index k = 0; k < out.size(); ++k) {
    out(k) += 0.5 * p.dot(g.d_inverse_metric[static_cast<std::size_t>(k)] * p) -
              0.5 * g.d_log_det(k);
  }
  return out;
}

inline bool converged(const Vec& next, const Vec& prev, double tol) {
  const double change = (next - prev).lpNorm<Eigen::Infinity>();
  const double roundoff = 8.0 * std::numeric_limits<double>::epsilon() *
                          next.lpNorm<Eigen::Infinity>();
  return change <= tol || change <= roundoff;
}

}  // namespace detail

/**
 * @brief Generalized (implicit) leapfrog for a position-dependent metric.
 *
 * 1. p_half = p - (e/2) dH/dq(q, p_half)            (fixed point)
 * 2. q' = q + (e/2) [L(q) + L(q')] p_half           (fixed point)
 * 3. p' = p_half - (e/2) dH/dq(q', p_half)          (explicit)
 *
 * Throws DivergenceError if either fixed-point solve fails to converge
 * within `config.fixed_point_max_iters` or the state goes non-finite.
 */
template <TargetModel Target, MetricModel Metric>
PhasePoint generalized_leapfrog_step(const PhasePoint& z, const Target& target,
                                     const Metric& metric, const IntegratorConfig& config,
                                     Direction dir = Direction::Forward) {
  const double half = 0.5 * signed_step(config.step_size, dir);
  const MetricGradient start = metric.gradient(z.q);

  Vec p_half = z.p - half * detail::position_force(target, start, z.p);
  bool ok = false;
  for (int it = 0; it < config.fixed_point_max_iters; ++it) {
    Vec next = z.p - half * detail::position_force(target, start, p_half);
    if (!next.allFinite()) throw DivergenceError("generalized leapfrog: non-finite momentum", 0);
    ok = detail::converged(next, p_half, config.fixed_point_tol);
    p_half = std::move(next);
    if (ok) break;
  }
  if (!ok) throw DivergenceError("generalized leapfrog: momentum solve did not converge", 0);

  const Vec velocity_start = start.at.inverse_metric * p_half;
  Vec q_new = z.q + 2.0 * half * velocity_start;
  ok = false;
  for (int it = 0; it < config.fixed_point_max_iters; ++it) {
    if (!q_new.allFinite()) throw DivergenceError("generalized leapfrog: non-finite position", 0);
    Vec next = z.q + half * (velocity_start + metric.at(q_new).inverse_metric * p_half);
    ok = detail::converged(next, q_new, config.fixed_point_tol);
    q_new = std::move(next);
    if (ok) break;
  }
  if (!ok) throw DivergenceError("generalized leapfrog: position solve did not converge", 0);

  const MetricGradient end = metric.gradient(q_new);
  Vec p_new = p_half - half * detail::position_force(target, end, p_half);
  PhasePoint out(std::move(q_new), std::move(p_new));
  if (!out.finite()) throw DivergenceError("generalized leapfrog: non-finite state", 0);
  return out;
}

/// Explicit leapfrog for Euclidean metrics, generalized leapfrog otherwise.
template <TargetModel Target, MetricModel Metric>
PhasePoint integrator_step(const PhasePoint& z, const Target& target, const Metric& metric,
                           const IntegratorConfig& config, Direction dir = Direction::Forward) {
  if constexpr (std::is_same_v<Metric, EuclideanMetric>) {
    return leapfrog_step(z, target, metric, signed_step(config.step_size, dir));
  } else {
    return generalized_leapfrog_step(z, target, metric, config, dir);
  }
}

}  // namespace geonuts
