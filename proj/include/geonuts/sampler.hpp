#pragma once

#include "geonuts/diagnostics.hpp"
#include "geonuts/integrators.hpp"
#include "geonuts/termination.hpp"

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>
#include <vector>

// REFERENCE: Hoffman, M.D. and Gelman, A., 2014. The No-U-Turn
// sampler: adaptively setting path lengths in Hamiltonian Monte
// Carlo. J. Mach. Learn. Res., 15(1), pp.1593-1623. The tree follows the
// slice-sampling variant with progressive proposal selection.

namespace geonuts {

enum class Algorithm { Nuts, StaticHmc };

enum class TerminationCause { Criterion, MaxDepth, Divergence };

inline std::string_view to_string(TerminationCause cause) {
  switch (cause) {
    case TerminationCause::Criterion: return "criterion";
    case TerminationCause::MaxDepth: return "max_depth";
    case TerminationCause::Divergence: return "divergence";
  }
  return "unknown";
}

struct SamplerConfig {
  Algorithm algorithm = Algorithm::Nuts;
  int max_depth = 10;
  /// Subtrees shallower than this are never checked against the criterion.
  int min_depth_before_termination = 2;
  std::uint64_t seed = 20140101;
  int n_draws = 1000;
  int n_warmup_discard = 0;
  CriterionKind criterion = CriterionKind::Generalized;
  double divergence_threshold = 1000.0;
  /// Leapfrog steps per draw for the static HMC baseline.
  int static_steps = 30;

  void validate() const {
    if (max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
    if (min_depth_before_termination < 0 || min_depth_before_termination >= max_depth) {
      throw std::invalid_argument("min_depth_before_termination must lie in [0, max_depth)");
    }
    if (n_draws < 1) throw std::invalid_argument("n_draws must be >= 1");
    if (n_warmup_discard < 0) throw std::invalid_argument("n_warmup_discard must be >= 0");
    if (!(divergence_threshold > 0.0)) {
      throw std::invalid_argument("divergence_threshold must be positive");
    }
    if (static_steps < 1) throw std::invalid_argument("static_steps must be >= 1");
  }
};

struct DrawStats {
  int tree_depth = 0;
  int n_leapfrog = 0;
  bool divergent = false;
  TerminationCause termination_cause = TerminationCause::MaxDepth;
  /// Energy of the selected state minus the starting energy.
  double energy_error = 0.0;
};

struct Draw {
  Vec q;
  DrawStats stats;
};

namespace detail {

struct Subtree {
  TreeEnd bwd;
  TreeEnd fwd;
  Vec proposal;
  double proposal_energy = 0.0;
  double n_valid = 0.0;
  bool keep_going = true;
  bool divergent = false;
  double divergent_energy = 0.0;
  RhoAccumulator rho;
  int n_leapfrog = 0;
};

template <TargetModel Target, MetricModel Metric, class Criterion, class RNG>
class TreeBuilder {
 public:
  TreeBuilder(const Target& target, const Metric& metric, const IntegratorConfig& integrator,
              const SamplerConfig& sampler, const Criterion& criterion, RNG& rng, double log_u,
              double h0)
      : target_(target), metric_(metric), integrator_(integrator), sampler_(sampler),
        criterion_(criterion), rng_(rng), log_u_(log_u), h0_(h0) {}

  Subtree build(const TreeEnd& from, Direction dir, int depth) {
    if (depth == 0) return leaf(from, dir);

    Subtree first = build(from, dir, depth - 1);
    if (!first.keep_going) return first;
    Subtree second =
        build(dir == Direction::Forward ? first.fwd : first.bwd, dir, depth - 1);

    Subtree out = std::move(first);
    out.n_leapfrog += second.n_leapfrog;
    if (second.divergent) {
      out.divergent = true;
      out.divergent_energy = second.divergent_energy;
      out.keep_going = false;
      return out;
    }
    const double total = out.n_valid + second.n_valid;
    if (total > 0.0 && uniform() < second.n_valid / total) {
      out.proposal = std::move(second.proposal);
      out.proposal_energy = second.proposal_energy;
    }
    out.n_valid = total;
    if (dir == Direction::Forward) {
      out.fwd = std::move(second.fwd);
    } else {
      out.bwd = std::move(second.bwd);
    }
    out.rho += second.rho;
    out.keep_going = second.keep_going &&
                     !(depth >= sampler_.min_depth_before_termination &&
                       criterion_(out.bwd, out.fwd, out.rho));
    return out;
  }

  double uniform() { return unit_(rng_); }

 private:
  Subtree leaf(const TreeEnd& from, Direction dir) {
    Subtree out;
    out.n_leapfrog = 1;
    PhasePoint z;
    try {
      z = integrator_step(from.state, target_, metric_, integrator_, dir);
    } catch (const DivergenceError&) {
      out.divergent = true;
      out.keep_going = false;
      out.divergent_energy = std::numeric_limits<double>::infinity();
      return out;
    }
    MetricAt at = metric_.at(z.q);
    const double h = hamiltonian(target_, at, z);
    if (!std::isfinite(h) || std::abs(h - h0_) > sampler_.divergence_threshold) {
      out.divergent = true;
      out.keep_going = false;
      out.divergent_energy = h;
      return out;
    }
    out.rho = RhoAccumulator(z.dimension());
    out.rho.add(z.p, integrator_.step_size);
    out.proposal = z.q;
    out.proposal_energy = h;
    out.n_valid = log_u_ <= -h ? 1.0 : 0.0;
    out.bwd = TreeEnd{z, at};
    out.fwd = TreeEnd{std::move(z), std::move(at)};
    return out;
  }

  const Target& target_;
  const Metric& metric_;
  const IntegratorConfig& integrator_;
  const SamplerConfig& sampler_;
  const Criterion& criterion_;
  RNG& rng_;
  double log_u_;
  double h0_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

}  // namespace detail

/**
 * @brief One NUTS transition with a pluggable termination criterion.
 *
 * `criterion(bwd, fwd, rho)` returns true when the merged subtree spanning
 * `bwd`..`fwd`, whose momenta are summed in `rho`, should stop growing.
 * On divergence the current position is returned unchanged.
 */
template <TargetModel Target, MetricModel Metric, class Criterion, class RNG>
Draw nuts_draw(RNG& rng, const Vec& current_q, const Target& target, const Metric& metric,
               const IntegratorConfig& integrator, const SamplerConfig& sampler,
               const Criterion& criterion) {
  require_finite(current_q, "nuts_draw");
  MetricAt at0 = metric.at(current_q);
  PhasePoint z0(current_q, sample_momentum(at0, rng));
  const double h0 = hamiltonian(target, at0, z0);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_u = -h0 + std::log1p(-unit(rng));

  detail::Subtree tree;
  tree.rho = RhoAccumulator(z0.dimension());
  tree.rho.add(z0.p, integrator.step_size);
  tree.proposal = current_q;
  tree.proposal_energy = h0;
  tree.n_valid = 1.0;
  tree.bwd = TreeEnd{z0, at0};
  tree.fwd = TreeEnd{std::move(z0), std::move(at0)};

  detail::TreeBuilder builder(target, metric, integrator, sampler, criterion, rng, log_u, h0);
  std::bernoulli_distribution coin(0.5);

  DrawStats stats;
  while (stats.tree_depth < sampler.max_depth) {
    const Direction dir = coin(rng) ? Direction::Forward : Direction::Backward;
    detail::Subtree sub =
        builder.build(dir == Direction::Forward ? tree.fwd : tree.bwd, dir, stats.tree_depth);
    stats.n_leapfrog += sub.n_leapfrog;
    ++stats.tree_depth;

    if (sub.divergent) {
      stats.divergent = true;
      stats.termination_cause = TerminationCause::Divergence;
      stats.energy_error = sub.divergent_energy - h0;
      return {current_q, stats};
    }
    if (sub.keep_going && builder.uniform() < sub.n_valid / tree.n_valid) {
      tree.proposal = std::move(sub.proposal);
      tree.proposal_energy = sub.proposal_energy;
    }
    tree.n_valid += sub.n_valid;
    if (dir == Direction::Forward) {
      tree.fwd = std::move(sub.fwd);
    } else {
      tree.bwd = std::move(sub.bwd);
    }
    tree.rho += sub.rho;

    if (!sub.keep_going ||
        (stats.tree_depth >= sampler.min_depth_before_termination &&
         criterion(tree.bwd, tree.fwd, tree.rho))) {
      stats.termination_cause = TerminationCause::Criterion;
      break;
    }
  }
  stats.energy_error = tree.proposal_energy - h0;
  return {std::move(tree.proposal), stats};
}

/// NUTS transition using the criterion named in the sampler config.
template <TargetModel Target, MetricModel Metric, class RNG>
Draw nuts_draw(RNG& rng, const Vec& current_q, const Target& target, const Metric& metric,
               const IntegratorConfig& integrator, const SamplerConfig& sampler) {
  if (sampler.criterion == CriterionKind::Classic) {
    return nuts_draw(rng, current_q, target, metric, integrator, sampler, ClassicUTurn{});
  }
  return nuts_draw(rng, current_q, target, metric, integrator, sampler, GeneralizedUTurn{});
}

/**
 * Fixed-length HMC: `n_steps` integrator steps, then Metropolis
 * accept/reject on the energy difference.
 */
template <TargetModel Target, MetricModel Metric, class RNG>
Draw static_hmc_draw(RNG& rng, const Vec& current_q, const Target& target, const Metric& metric,
                     const IntegratorConfig& integrator, int n_steps,
                     double divergence_threshold = 1000.0) {
  if (n_steps < 1) throw std::invalid_argument("static_hmc_draw: n_steps must be >= 1");
  require_finite(current_q, "static_hmc_draw");
  const MetricAt at0 = metric.at(current_q);
  PhasePoint z(current_q, sample_momentum(at0, rng));
  const double h0 = hamiltonian(target, at0, z);

  DrawStats stats;
  stats.n_leapfrog = n_steps;
  stats.termination_cause = TerminationCause::MaxDepth;
  try {
    for (int i = 0; i < n_steps; ++i) z = integrator_step(z, target, metric, integrator);
  } catch (const DivergenceError&) {
    stats.divergent = true;
    stats.termination_cause = TerminationCause::Divergence;
    stats.energy_error = std::numeric_limits<double>::infinity();
    return {current_q, stats};
  }
  const double h1 = hamiltonian(target, metric, z);
  stats.energy_error = h1 - h0;
  if (!std::isfinite(h1) || std::abs(h1 - h0) > divergence_threshold) {
    stats.divergent = true;
    stats.termination_cause = TerminationCause::Divergence;
    return {current_q, stats};
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (std::log1p(-unit(rng)) < h0 - h1) return {std::move(z.q), stats};
  return {current_q, stats};
}

struct ChainSummary {
  Vec mean;
  Matrix covariance;
  Vec ess;
  int divergences = 0;
  int n_draws = 0;
};

struct ChainResult {
  Matrix draws;  ///< one row per retained draw
  std::vector<DrawStats> stats;
  ChainSummary summary;
};

inline ChainSummary summarize(const Matrix& draws, const std::vector<DrawStats>& stats) {
  ChainSummary s;
  s.mean = diagnostics::mean(draws);
  s.covariance = diagnostics::covariance(draws);
  s.ess = diagnostics::effective_sample_size(draws);
  s.n_draws = static_cast<int>(draws.rows());
  for (const auto& st : stats) s.divergences += st.divergent ? 1 : 0;
  return s;
}

/// Per-chain generator derived from (seed, chain index).
inline std::mt19937_64 chain_rng(std::uint64_t seed, std::uint64_t chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), static_cast<std::uint32_t>(chain >> 32)};
  return std::mt19937_64(seq);
}

/**
 * @brief Run one chain from `initial_q`.
 *
 * Discards `n_warmup_discard` transitions, then records `n_draws`.
 */
template <TargetModel Target, MetricModel Metric>
ChainResult run_chain(const Target& target, const Metric& metric,
                      const IntegratorConfig& integrator, const SamplerConfig& sampler,
                      const Vec& initial_q, std::uint64_t chain_index = 0) {
  integrator.validate();
  sampler.validate();
  auto rng = chain_rng(sampler.seed, chain_index);

  auto transition = [&](const Vec& q) {
    if (sampler.algorithm == Algorithm::StaticHmc) {
      return static_hmc_draw(rng, q, target, metric, integrator, sampler.static_steps,
                             sampler.divergence_threshold);
    }
    return nuts_draw(rng, q, target, metric, integrator, sampler);
  };

  Vec q = initial_q;
  for (int i = 0; i < sampler.n_warmup_discard; ++i) q = transition(q).q;

  ChainResult out;
  out.draws.resize(sampler.n_draws, initial_q.size());
  out.stats.reserve(static_cast<std::size_t>(sampler.n_draws));
  for (int i = 0; i < sampler.n_draws; ++i) {
    Draw d = transition(q);
    q = std::move(d.q);
    out.draws.row(i) = q.transpose();
    out.stats.push_back(d.stats);
  }
  out.summary = summarize(out.draws, out.stats);
  return out;
}

}  // namespace geonuts
