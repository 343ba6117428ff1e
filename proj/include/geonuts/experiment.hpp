#pragma once

#include "geonuts/config.hpp"
#include "geonuts/harmonic.hpp"
#include "geonuts/sampler.hpp"
#include "geonuts/trajectory.hpp"

#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace geonuts::experiment {

using config::ExperimentConfig;
using config::json;

/// Output file could not be written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using AnyTarget = std::variant<GaussianTarget, BananaTarget>;

inline AnyTarget make_target(const config::TargetSpec& spec) {
  if (spec.kind == config::TargetSpec::Kind::Banana) {
    return BananaTarget(spec.beta, spec.sigma1, spec.sigma2);
  }
  if (spec.covariance) return GaussianTarget(*spec.covariance);
  return GaussianTarget::correlated(spec.rho);
}

inline Vec target_mode(const AnyTarget& target) {
  return std::visit(
      [](const auto& t) -> Vec {
        if constexpr (std::is_same_v<std::decay_t<decltype(t)>, BananaTarget>) {
          return t.mode();
        } else {
          return Vec::Zero(t.dimension());
        }
      },
      target);
}

/// Invoke `f(target, metric)` with the concrete types named in the config.
template <class F>
decltype(auto) with_model(const ExperimentConfig& c, F&& f) {
  const AnyTarget any = make_target(c.target);
  return std::visit(
      [&](const auto& target) -> decltype(auto) {
        using T = std::decay_t<decltype(target)>;
        if (c.metric.kind == config::MetricSpec::Kind::SoftAbs) {
          return f(target, SoftAbsMetric<T>(target, c.metric.alpha));
        }
        Matrix mass = Matrix::Identity(target.dimension(), target.dimension());
        if (c.metric.mass == config::MetricSpec::Mass::Explicit) {
          mass = c.metric.explicit_mass;
        } else if (c.metric.mass == config::MetricSpec::Mass::SigmaInverse) {
          if constexpr (std::is_same_v<T, GaussianTarget>) mass = target.precision();
        }
        return f(target, EuclideanMetric(mass));
      },
      any);
}

/// Shortest decimal form that round-trips a double.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void write_trace_csv(std::ostream& os, const TrajectoryTrace& trace) {
  const Index d = trace.entries.empty() ? 0 : trace.entries.front().state.dimension();
  os << "step,t";
  for (Index i = 1; i <= d; ++i) os << ",q" << i;
  for (Index i = 1; i <= d; ++i) os << ",p" << i;
  os << ",H,crit_classic,crit_generalized,fired_classic,fired_generalized\n";
  for (std::size_t k = 0; k < trace.entries.size(); ++k) {
    const TraceEntry& e = trace.entries[k];
    os << k << ',' << format_double(e.t);
    for (Index i = 0; i < d; ++i) os << ',' << format_double(e.state.q(i));
    for (Index i = 0; i < d; ++i) os << ',' << format_double(e.state.p(i));
    os << ',' << format_double(e.hamiltonian) << ',' << format_double(e.criterion_classic) << ','
       << format_double(e.criterion_generalized) << ',' << (e.fired_classic() ? 1 : 0) << ','
       << (e.fired_generalized() ? 1 : 0) << '\n';
  }
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << contents;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

/// Starting point: configured position (default: the target's mode) and
/// configured momentum (default: drawn from the metric with the seed).
template <class Target, class Metric>
PhasePoint initial_state(const ExperimentConfig& c, const Target& target, const Metric& metric) {
  Vec q = c.initial.q ? *c.initial.q : target_mode(AnyTarget(target));
  if (c.initial.p) return {q, *c.initial.p};
  auto rng = chain_rng(c.sampler.seed, 0);
  return {q, sample_momentum(metric.at(q), rng)};
}

/// Integrate the configured trajectory in memory.
inline TrajectoryTrace run_trajectory(const ExperimentConfig& c) {
  return with_model(c, [&](const auto& target, const auto& metric) {
    TrajectoryOptions opts;
    opts.criterion = c.criterion.kind;
    opts.transient_guard = static_cast<std::size_t>(c.criterion.transient_guard_steps);
    opts.divergence_threshold = c.sampler.divergence_threshold;
    return integrate_trajectory(initial_state(c, target, metric),
                                static_cast<std::size_t>(c.n_steps), target, metric,
                                c.integrator, opts);
  });
}

/**
 * @brief Trajectory mode: integrate and write the trace CSV.
 *
 * On divergence the partial trace is written before the error propagates.
 */
inline TrajectoryTrace run_trajectory_mode(const ExperimentConfig& c) {
  try {
    TrajectoryTrace trace = run_trajectory(c);
    std::ostringstream os;
    write_trace_csv(os, trace);
    write_file(c.output.trace, os.str());
    return trace;
  } catch (const DivergenceError& e) {
    if (e.partial_trace()) {
      std::ostringstream os;
      write_trace_csv(os, *e.partial_trace());
      write_file(c.output.trace, os.str());
    }
    throw;
  }
}

struct SampleResult {
  std::vector<ChainResult> chains;
  ChainSummary pooled;
  double wall_seconds = 0.0;
};

/// Run every configured chain; chains execute on separate threads.
inline SampleResult run_sample(const ExperimentConfig& c) {
  const auto started = std::chrono::steady_clock::now();
  SampleResult out;
  out.chains.resize(static_cast<std::size_t>(c.chains));
  std::vector<std::exception_ptr> errors(out.chains.size());

  with_model(c, [&](const auto& target, const auto& metric) {
    const Vec q0 = c.initial.q ? *c.initial.q : target_mode(AnyTarget(target));
    auto work = [&](std::size_t i) {
      try {
        out.chains[i] = run_chain(target, metric, c.integrator, c.sampler, q0, i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    };
    std::vector<std::thread> threads;
    for (std::size_t i = 1; i < out.chains.size(); ++i) threads.emplace_back(work, i);
    work(0);
    for (auto& t : threads) t.join();
    return 0;
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  Index rows = 0;
  for (const auto& ch : out.chains) rows += ch.draws.rows();
  Matrix all(rows, out.chains.front().draws.cols());
  std::vector<DrawStats> stats;
  Index r = 0;
  for (const auto& ch : out.chains) {
    all.middleRows(r, ch.draws.rows()) = ch.draws;
    r += ch.draws.rows();
    stats.insert(stats.end(), ch.stats.begin(), ch.stats.end());
  }
  out.pooled = summarize(all, stats);
  out.pooled.ess = Vec::Zero(all.cols());
  for (const auto& ch : out.chains) out.pooled.ess += ch.summary.ess;
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

inline void write_draws_csv(std::ostream& os, const SampleResult& result) {
  const Index d = result.chains.front().draws.cols();
  os << "draw";
  for (Index i = 1; i <= d; ++i) os << ",q" << i;
  os << ",tree_depth,n_leapfrog,divergent,energy_error\n";
  std::size_t index = 0;
  for (const auto& ch : result.chains) {
    for (Index k = 0; k < ch.draws.rows(); ++k, ++index) {
      const DrawStats& s = ch.stats[static_cast<std::size_t>(k)];
      os << index;
      for (Index i = 0; i < d; ++i) os << ',' << format_double(ch.draws(k, i));
      os << ',' << s.tree_depth << ',' << s.n_leapfrog << ',' << (s.divergent ? 1 : 0) << ','
         << format_double(s.energy_error) << '\n';
    }
  }
}

inline json summary_json(const ExperimentConfig& c, const SampleResult& result) {
  json per_chain = json::array();
  for (const auto& ch : result.chains) {
    per_chain.push_back({{"mean", config::detail::to_json(ch.summary.mean)},
                         {"ess", config::detail::to_json(ch.summary.ess)},
                         {"divergences", ch.summary.divergences}});
  }
  return {{"chains", c.chains},
          {"draws_per_chain", c.sampler.n_draws},
          {"n_draws", result.pooled.n_draws},
          {"mean", config::detail::to_json(result.pooled.mean)},
          {"covariance", config::detail::to_json(result.pooled.covariance)},
          {"ess", config::detail::to_json(result.pooled.ess)},
          {"divergences", result.pooled.divergences},
          {"wall_time_seconds", result.wall_seconds},
          {"per_chain", per_chain},
          {"config", config::to_json(c)}};
}

inline SampleResult run_sample_mode(const ExperimentConfig& c) {
  SampleResult result = run_sample(c);
  std::ostringstream os;
  write_draws_csv(os, result);
  write_file(c.output.draws, os.str());
  write_file(c.output.summary, summary_json(c, result).dump(2) + "\n");
  return result;
}

/**
 * @brief Normal modes of the configured system at the target's mode.
 *
 * The stiffness is the potential's Hessian there and the mass matrix is
 * the metric there (the inverse of the inverse metric).
 */
inline json modes_report(const ExperimentConfig& c) {
  return with_model(c, [&](const auto& target, const auto& metric) {
    const Vec center = target_mode(AnyTarget(target));
    const Matrix stiffness = target.hessian(center);
    const MetricAt at = metric.at(center);
    Matrix mass = at.inverse_metric.inverse();
    mass = 0.5 * (mass + mass.transpose());
    const harmonic::NormalModes modes = harmonic::eigenfrequencies(mass, stiffness);

    json directions = json::array();
    json periods = json::array();
    json from_rest = json::array();
    const Vec rest_phase = Vec::Constant(1, std::numbers::pi / 2.0);
    for (Index j = 0; j < modes.count(); ++j) {
      directions.push_back(config::detail::to_json(Vec(modes.directions.col(j))));
      periods.push_back(modes.period(j));
      from_rest.push_back(harmonic::first_predicted_zero_time(rest_phase, modes.omega(j),
                                                              harmonic::PhaseRegime::Coherent));
    }
    const double slowest = modes.omega.minCoeff();
    json report = {
        {"mass", config::detail::to_json(mass)},
        {"stiffness", config::detail::to_json(stiffness)},
        {"omega", config::detail::to_json(modes.omega)},
        {"periods", periods},
        {"directions", directions},
        {"degenerate", harmonic::all_degenerate(modes.omega)},
        {"predicted_zero_times",
         {{"coherent_from_rest", from_rest},
          {"incoherent", harmonic::predicted_zero_time(Vec(), slowest, 1,
                                                       harmonic::PhaseRegime::Incoherent)}}},
    };

    if (c.initial.q || c.initial.p) {
      const Vec q0 = c.initial.q ? *c.initial.q : center;
      const Vec p0 = c.initial.p ? *c.initial.p : Vec::Zero(center.size());
      const harmonic::ModeState state = harmonic::fit_initial_conditions(modes, q0 - center, p0);
      std::vector<double> slow_phases;
      for (Index j = 0; j < modes.count(); ++j) {
        if (modes.omega(j) - slowest < harmonic::kDegeneracyTol * modes.omega.maxCoeff() &&
            state.amplitude(j) > 0.0) {
          slow_phases.push_back(state.phase(j));
        }
      }
      json fit = {{"amplitudes", config::detail::to_json(state.amplitude)},
                  {"phases", config::detail::to_json(state.phase)}};
      if (!slow_phases.empty()) {
        const Vec phases = Eigen::Map<const Vec>(slow_phases.data(),
                                                 static_cast<Index>(slow_phases.size()));
        const bool coherent = harmonic::phases_coherent(phases);
        fit["slowest_mode_zero_time"] = harmonic::first_predicted_zero_time(
            phases, slowest,
            coherent ? harmonic::PhaseRegime::Coherent : harmonic::PhaseRegime::Averaged);
      }
      report["initial_fit"] = fit;
    }
    return report;
  });
}

}  // namespace geonuts::experiment
