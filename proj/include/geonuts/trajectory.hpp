#pragma once

#include "geonuts/integrators.hpp"
#include "geonuts/termination.hpp"

#include <cmath>
#include <cstddef>

namespace geonuts {

struct TrajectoryOptions {
  /// Criterion that sets `terminated_at`; both values are always recorded.
  CriterionKind criterion = CriterionKind::Generalized;
  /// Lower bound on the number of initial steps whose firings are ignored.
  std::size_t transient_guard = 3;
  double divergence_threshold = 1000.0;
};

/**
 * @brief Integrate a fixed number of steps, recording energy and both
 * termination criteria at every state.
 *
 * Integration always runs to `n_steps`; `terminated_at` marks the first
 * firing of the active criterion past the transient guard. At t = 0 the
 * average momentum is taken to be the initial momentum itself.
 *
 * Throws DivergenceError, with the trace so far attached, if the energy
 * error exceeds `divergence_threshold` or a step fails.
 */
template <TargetModel Target, MetricModel Metric>
TrajectoryTrace integrate_trajectory(const PhasePoint& start, std::size_t n_steps,
                                     const Target& target, const Metric& metric,
                                     const IntegratorConfig& config,
                                     const TrajectoryOptions& options = {}) {
  config.validate();
  if (!start.finite()) throw NumericalError("integrate_trajectory: non-finite start");

  TrajectoryTrace trace;
  trace.step_size = config.step_size;
  trace.entries.reserve(n_steps + 1);

  const MetricAt at0 = metric.at(start.q);
  const double h0 = hamiltonian(target, at0, start);
  trace.entries.push_back({0.0, start, h0, 0.0, weighted_inner(start.p, start.p, at0.inverse_metric)});

  const std::size_t guard = transient_guard_steps(n_steps, options.transient_guard);
  RhoAccumulator acc(start.dimension());
  PhasePoint z = start;

  for (std::size_t k = 1; k <= n_steps; ++k) {
    try {
      z = integrator_step(z, target, metric, config);
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string(e.what()) + " at step " + std::to_string(k), k, trace);
    }
    const MetricAt at = metric.at(z.q);
    const double h = hamiltonian(target, at, z);
    if (!std::isfinite(h) || std::abs(h - h0) > options.divergence_threshold) {
      throw DivergenceError("energy error exceeded threshold at step " + std::to_string(k), k,
                            trace);
    }
    acc.add(z.p, config.step_size);
    const CriterionReport report = evaluate_criteria(z, start.q, acc, at);
    const double t = static_cast<double>(k) * config.step_size;
    trace.entries.push_back({t, z, h, report.classic_value, report.generalized_value});

    const bool fired = options.criterion == CriterionKind::Classic ? report.fired_classic
                                                                    : report.fired_generalized;
    if (fired && k > guard && !trace.terminated_at) {
      trace.terminated_at = t;
      trace.terminated_step = k;
    }
  }
  return trace;
}

}  // namespace geonuts
