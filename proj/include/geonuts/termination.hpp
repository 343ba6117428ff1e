#pragma once

#include "geonuts/metrics.hpp"
#include "geonuts/phase.hpp"

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>

namespace geonuts {

enum class CriterionKind { Classic, Generalized };

inline std::string_view to_string(CriterionKind kind) {
  return kind == CriterionKind::Classic ? "classic" : "generalized";
}

inline CriterionKind parse_criterion_kind(std::string_view name) {
  if (name == "classic") return CriterionKind::Classic;
  if (name == "generalized") return CriterionKind::Generalized;
  throw std::invalid_argument("unknown criterion kind '" + std::string(name) + "'");
}

/**
 * @brief Running sum of transported momenta along a trajectory.
 *
 * Transporting a momentum along the Hamiltonian flow keeps its coordinate
 * components, so the running average is a plain component-wise sum divided
 * by the number of samples. Steps must be uniform.
 */
class RhoAccumulator {
 public:
  RhoAccumulator() = default;
  explicit RhoAccumulator(Index dim) : sum_(Vec::Zero(dim)) {}

  void add(const Vec& p, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("RhoAccumulator: time step must be positive");
    if (sum_.size() == 0) sum_ = Vec::Zero(p.size());
    require_same_dimension(sum_, p, "RhoAccumulator::add");
    if (count_ > 0 && !same_step(dt)) {
      throw std::invalid_argument("RhoAccumulator: non-uniform time step");
    }
    sum_ += p;
    elapsed_ += dt;
    ++count_;
  }

  /// Merge a disjoint accumulator recorded with the same step.
  RhoAccumulator& operator+=(const RhoAccumulator& other) {
    if (other.count_ == 0) return *this;
    if (count_ == 0) return *this = other;
    require_same_dimension(sum_, other.sum_, "RhoAccumulator::merge");
    if (!same_step(other.step())) {
      throw std::invalid_argument("RhoAccumulator: merging different time steps");
    }
    sum_ += other.sum_;
    elapsed_ += other.elapsed_;
    count_ += other.count_;
    return *this;
  }

  friend RhoAccumulator operator+(RhoAccumulator a, const RhoAccumulator& b) { return a += b; }

  const Vec& momentum_sum() const { return sum_; }
  double elapsed() const { return elapsed_; }
  std::size_t count() const { return count_; }
  bool empty() const { return count_ == 0; }
  double step() const { return count_ == 0 ? 0.0 : elapsed_ / static_cast<double>(count_); }

  /// rho: the average transported momentum.
  Vec mean() const {
    if (count_ == 0) throw std::logic_error("RhoAccumulator: empty accumulator has no mean");
    return sum_ / static_cast<double>(count_);
  }

 private:
  bool same_step(double dt) const { return std::abs(dt - step()) <= 1e-9 * std::abs(dt); }

  Vec sum_;
  double elapsed_ = 0.0;
  std::size_t count_ = 0;
};

/// Functional form of `RhoAccumulator::add`.
inline RhoAccumulator accumulate(RhoAccumulator acc, const Vec& p, double dt) {
  acc.add(p, dt);
  return acc;
}

/// Displacement from the trajectory start contracted with the current momentum.
inline double classic_value(const Vec& p_t, const Vec& q_t, const Vec& q_0) {
  require_same_dimension(p_t, q_t, "classic_value");
  require_same_dimension(q_t, q_0, "classic_value");
  return p_t.dot(q_t - q_0);
}

/// `<p_t, rho>` under the inverse metric at the current position.
inline double generalized_value(const Vec& p_t, const RhoAccumulator& acc, const MetricAt& at) {
  if (acc.empty()) throw std::invalid_argument("generalized_value: empty accumulator");
  return weighted_inner(p_t, acc.mean(), at.inverse_metric);
}

struct CriterionReport {
  double classic_value = 0.0;
  double generalized_value = 0.0;
  bool fired_classic = false;
  bool fired_generalized = false;
};

inline CriterionReport evaluate_criteria(const PhasePoint& current, const Vec& q_0,
                                         const RhoAccumulator& acc, const MetricAt& at) {
  CriterionReport r;
  r.classic_value = classic_value(current.p, current.q, q_0);
  r.generalized_value = generalized_value(current.p, acc, at);
  r.fired_classic = r.classic_value < 0.0;
  r.fired_generalized = r.generalized_value < 0.0;
  return r;
}

/// A trajectory end: state plus the metric evaluated there.
struct TreeEnd {
  PhasePoint state;
  MetricAt metric;
};

/**
 * @brief Generalized criterion applied at both ends of a merged subtree.
 *
 * `acc` must hold the momenta of exactly `subtree_size` states, all in
 * forward-time orientation. The backward end is checked with both its
 * momentum and rho reversed, so either check asks whether the trajectory
 * is still opening outward at that end.
 */
inline bool check_subtree_merge(const TreeEnd& fwd_end, const TreeEnd& bwd_end,
                                const RhoAccumulator& acc, std::size_t subtree_size) {
  if (acc.count() != subtree_size) {
    throw std::invalid_argument("check_subtree_merge: accumulator holds " +
                                std::to_string(acc.count()) + " momenta for a subtree of " +
                                std::to_string(subtree_size));
  }
  const Vec rho = acc.mean();
  const double forward = weighted_inner(fwd_end.state.p, rho, fwd_end.metric.inverse_metric);
  const double backward =
      weighted_inner(-bwd_end.state.p, -rho, bwd_end.metric.inverse_metric);
  return forward < 0.0 || backward < 0.0;
}

/// Tree-sampler policy for the generalized criterion.
struct GeneralizedUTurn {
  bool operator()(const TreeEnd& bwd, const TreeEnd& fwd, const RhoAccumulator& acc) const {
    return check_subtree_merge(fwd, bwd, acc, acc.count());
  }
};

/// Tree-sampler policy for the classic endpoint-displacement criterion.
struct ClassicUTurn {
  bool operator()(const TreeEnd& bwd, const TreeEnd& fwd, const RhoAccumulator&) const {
    const Vec span = fwd.state.q - bwd.state.q;
    return span.dot(bwd.state.p) < 0.0 || span.dot(fwd.state.p) < 0.0;
  }
};

/// Number of initial steps whose firings are ignored at trajectory level.
inline std::size_t transient_guard_steps(std::size_t n_steps, std::size_t configured) {
  const auto fraction = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n_steps)));
  return std::max(configured, fraction);
}

}  // namespace geonuts
