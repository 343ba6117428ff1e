#pragma once

#include "geonuts/integrators.hpp"
#include "geonuts/sampler.hpp"
#include "geonuts/termination.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace geonuts::config {

using json = nlohmann::json;

/// Invalid experiment configuration. `field` names the offending key path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class Mode { Trajectory, Sample, Modes };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::Trajectory: return "trajectory";
    case Mode::Sample: return "sample";
    case Mode::Modes: return "modes";
  }
  return "trajectory";
}

struct TargetSpec {
  enum class Kind { Gaussian, Banana } kind = Kind::Gaussian;
  double rho = 0.95;
  /// Explicit covariance; replaces `rho` when present.
  std::optional<Matrix> covariance;
  double beta = 0.03;
  double sigma1 = 0.01;
  double sigma2 = 1.0;

  Index dimension() const {
    if (kind == Kind::Banana) return 2;
    return covariance ? covariance->rows() : 2;
  }
};

struct MetricSpec {
  enum class Kind { Euclidean, SoftAbs } kind = Kind::Euclidean;
  enum class Mass { Identity, SigmaInverse, Explicit } mass = Mass::Identity;
  Matrix explicit_mass;
  double alpha = 1.0;
};

struct CriterionSpec {
  CriterionKind kind = CriterionKind::Generalized;
  int transient_guard_steps = 3;
};

struct InitialSpec {
  std::optional<Vec> q;
  std::optional<Vec> p;
};

struct OutputSpec {
  std::string trace = "trajectory.csv";
  std::string draws = "draws.csv";
  std::string summary = "summary.json";
};

struct ExperimentConfig {
  Mode mode = Mode::Trajectory;
  TargetSpec target;
  MetricSpec metric;
  IntegratorConfig integrator;
  CriterionSpec criterion;
  SamplerConfig sampler;
  int n_steps = 1000;
  int chains = 1;
  InitialSpec initial;
  OutputSpec output;
};

/// Command-line values that take precedence over the JSON file.
struct Overrides {
  std::optional<Mode> mode;
  std::optional<std::uint64_t> seed;
  std::optional<double> step_size;
  std::optional<int> n_steps;
  std::optional<int> n_draws;
  std::optional<int> chains;
  std::optional<std::string> criterion;
  std::optional<std::string> trace;
  std::optional<std::string> draws;
  std::optional<std::string> summary;
};

namespace detail {

inline void reject_unknown(const json& obj, const std::string& path,
                           std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!keys.count(key)) {
      throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
    }
  }
}

inline double number(const json& obj, const char* key, const std::string& path, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(path + "." + key, "expected a number");
  return v.get<double>();
}

inline long long integer(const json& obj, const char* key, const std::string& path,
                         long long fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(path + "." + key, "expected an integer");
  return v.get<long long>();
}

inline std::string text(const json& obj, const char* key, const std::string& path,
                        const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(path + "." + key, "expected a string");
  return v.get<std::string>();
}

inline Vec vector(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a non-empty array of numbers");
  Vec out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(path, "expected a non-empty array of numbers");
    out(static_cast<Index>(i)) = v[i].get<double>();
  }
  if (!out.allFinite()) throw ConfigError(path, "values must be finite");
  return out;
}

inline Matrix matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a square array of arrays");
  const auto n = static_cast<Index>(v.size());
  Matrix out(n, n);
  for (Index i = 0; i < n; ++i) {
    const Vec row = vector(v[static_cast<std::size_t>(i)], path);
    if (row.size() != n) throw ConfigError(path, "expected a square array of arrays");
    out.row(i) = row.transpose();
  }
  return out;
}

inline json to_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vec(m.row(i).transpose())));
  return rows;
}

inline Mode parse_mode(const std::string& s, const std::string& path) {
  if (s == "trajectory") return Mode::Trajectory;
  if (s == "sample") return Mode::Sample;
  if (s == "modes") return Mode::Modes;
  throw ConfigError(path, "unknown mode '" + s + "'");
}

inline void parse_target(const json& j, TargetSpec& t) {
  reject_unknown(j, "target", {"kind", "rho", "covariance", "beta", "sigma1", "sigma2"});
  const std::string kind = text(j, "kind", "target", "gaussian");
  if (kind == "gaussian") {
    t.kind = TargetSpec::Kind::Gaussian;
    for (const char* k : {"beta", "sigma1", "sigma2"}) {
      if (j.contains(k)) throw ConfigError(std::string("target.") + k, "not a gaussian parameter");
    }
    if (j.contains("covariance") && j.contains("rho")) {
      throw ConfigError("target.covariance", "give either rho or covariance, not both");
    }
    if (j.contains("covariance")) {
      t.covariance = matrix(j.at("covariance"), "target.covariance");
      if (Eigen::LLT<Matrix>(*t.covariance).info() != Eigen::Success ||
          !t.covariance->isApprox(t.covariance->transpose(), 1e-12)) {
        throw ConfigError("target.covariance", "must be symmetric positive-definite");
      }
    } else {
      t.rho = number(j, "rho", "target", t.rho);
      if (!(t.rho > -1.0 && t.rho < 1.0)) throw ConfigError("target.rho", "must lie in (-1, 1)");
    }
  } else if (kind == "banana") {
    t.kind = TargetSpec::Kind::Banana;
    for (const char* k : {"rho", "covariance"}) {
      if (j.contains(k)) throw ConfigError(std::string("target.") + k, "not a banana parameter");
    }
    t.beta = number(j, "beta", "target", t.beta);
    t.sigma1 = number(j, "sigma1", "target", t.sigma1);
    t.sigma2 = number(j, "sigma2", "target", t.sigma2);
    if (!std::isfinite(t.beta)) throw ConfigError("target.beta", "must be finite");
    if (!(t.sigma1 > 0.0) || !std::isfinite(t.sigma1)) {
      throw ConfigError("target.sigma1", "must be positive");
    }
    if (!(t.sigma2 > 0.0) || !std::isfinite(t.sigma2)) {
      throw ConfigError("target.sigma2", "must be positive");
    }
  } else {
    throw ConfigError("target.kind", "unknown target kind '" + kind + "'");
  }
}

inline void parse_metric(const json& j, MetricSpec& m) {
  reject_unknown(j, "metric", {"kind", "mass", "alpha"});
  const std::string kind = text(j, "kind", "metric", "euclidean");
  if (kind == "euclidean") {
    m.kind = MetricSpec::Kind::Euclidean;
    if (j.contains("alpha")) throw ConfigError("metric.alpha", "only valid for softabs");
    if (j.contains("mass")) {
      const json& mass = j.at("mass");
      if (mass.is_string()) {
        const auto s = mass.get<std::string>();
        if (s == "identity") {
          m.mass = MetricSpec::Mass::Identity;
        } else if (s == "sigma_inverse") {
          m.mass = MetricSpec::Mass::SigmaInverse;
        } else {
          throw ConfigError("metric.mass", "unknown mass '" + s + "'");
        }
      } else {
        m.mass = MetricSpec::Mass::Explicit;
        m.explicit_mass = matrix(mass, "metric.mass");
        if (Eigen::LLT<Matrix>(m.explicit_mass).info() != Eigen::Success ||
            !m.explicit_mass.isApprox(m.explicit_mass.transpose(), 1e-12)) {
          throw ConfigError("metric.mass", "must be symmetric positive-definite");
        }
      }
    }
  } else if (kind == "softabs") {
    m.kind = MetricSpec::Kind::SoftAbs;
    if (j.contains("mass")) throw ConfigError("metric.mass", "only valid for euclidean");
    m.alpha = number(j, "alpha", "metric", m.alpha);
    if (!(m.alpha > 0.0) || !std::isfinite(m.alpha)) {
      throw ConfigError("metric.alpha", "must be positive");
    }
  } else {
    throw ConfigError("metric.kind", "unknown metric kind '" + kind + "'");
  }
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
  const auto end = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(),
                                                 text.begin() + static_cast<long>(end), '\n'));
}

}  // namespace detail

/// Serialize a config with every default filled in.
inline json to_json(const ExperimentConfig& c) {
  json target;
  if (c.target.kind == TargetSpec::Kind::Gaussian) {
    target["kind"] = "gaussian";
    if (c.target.covariance) {
      target["covariance"] = detail::to_json(*c.target.covariance);
    } else {
      target["rho"] = c.target.rho;
    }
  } else {
    target = {{"kind", "banana"}, {"beta", c.target.beta}, {"sigma1", c.target.sigma1},
              {"sigma2", c.target.sigma2}};
  }

  json metric;
  if (c.metric.kind == MetricSpec::Kind::Euclidean) {
    metric["kind"] = "euclidean";
    switch (c.metric.mass) {
      case MetricSpec::Mass::Identity: metric["mass"] = "identity"; break;
      case MetricSpec::Mass::SigmaInverse: metric["mass"] = "sigma_inverse"; break;
      case MetricSpec::Mass::Explicit: metric["mass"] = detail::to_json(c.metric.explicit_mass); break;
    }
  } else {
    metric = {{"kind", "softabs"}, {"alpha", c.metric.alpha}};
  }

  json initial = json::object();
  if (c.initial.q) initial["q"] = detail::to_json(*c.initial.q);
  if (c.initial.p) initial["p"] = detail::to_json(*c.initial.p);

  return {
      {"mode", to_string(c.mode)},
      {"target", target},
      {"metric", metric},
      {"integrator",
       {{"step_size", c.integrator.step_size},
        {"fp_tol", c.integrator.fixed_point_tol},
        {"fp_max_iters", c.integrator.fixed_point_max_iters}}},
      {"criterion",
       {{"kind", std::string(to_string(c.criterion.kind))},
        {"transient_guard_steps", c.criterion.transient_guard_steps}}},
      {"sampler",
       {{"algorithm", c.sampler.algorithm == Algorithm::Nuts ? "nuts" : "static"},
        {"max_depth", c.sampler.max_depth},
        {"min_depth_before_termination", c.sampler.min_depth_before_termination},
        {"seed", c.sampler.seed},
        {"n_draws", c.sampler.n_draws},
        {"n_warmup_discard", c.sampler.n_warmup_discard},
        {"divergence_threshold", c.sampler.divergence_threshold},
        {"static_steps", c.sampler.static_steps},
        {"chains", c.chains}}},
      {"trajectory", {{"n_steps", c.n_steps}}},
      {"initial", initial},
      {"output",
       {{"trace", c.output.trace}, {"draws", c.output.draws}, {"summary", c.output.summary}}},
  };
}

inline std::string canonical_json(const ExperimentConfig& c) { return to_json(c).dump(2); }

/**
 * @brief Parse and validate an experiment config.
 *
 * Layering: defaults < JSON < `env_seed` < `overrides`. Unknown keys and
 * out-of-range values raise ConfigError naming the key. The step size
 * defaults to 0.01 for the banana target or the SoftAbs metric and to
 * 0.1 otherwise.
 */
inline ExperimentConfig parse_config(const std::string& text, const Overrides& overrides = {},
                                     std::optional<std::uint64_t> env_seed = std::nullopt) {
  json root;
  try {
    root = json::parse(text.empty() ? std::string("{}") : text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "malformed JSON at line " +
                              std::to_string(detail::line_of(text, e.byte)) + ": " + e.what());
  }
  detail::reject_unknown(root, "", {"mode", "target", "metric", "integrator", "criterion",
                                    "sampler", "trajectory", "initial", "output"});

  ExperimentConfig c;
  if (root.contains("mode")) c.mode = detail::parse_mode(detail::text(root, "mode", "", ""), "mode");
  if (root.contains("target")) detail::parse_target(root.at("target"), c.target);
  if (root.contains("metric")) detail::parse_metric(root.at("metric"), c.metric);

  const bool riemannian_or_banana = c.target.kind == TargetSpec::Kind::Banana ||
                                    c.metric.kind == MetricSpec::Kind::SoftAbs;
  c.integrator.step_size = riemannian_or_banana ? 0.01 : 0.1;
  if (root.contains("integrator")) {
    const json& j = root.at("integrator");
    detail::reject_unknown(j, "integrator", {"step_size", "fp_tol", "fp_max_iters"});
    c.integrator.step_size = detail::number(j, "step_size", "integrator", c.integrator.step_size);
    c.integrator.fixed_point_tol =
        detail::number(j, "fp_tol", "integrator", c.integrator.fixed_point_tol);
    c.integrator.fixed_point_max_iters = static_cast<int>(
        detail::integer(j, "fp_max_iters", "integrator", c.integrator.fixed_point_max_iters));
  }

  if (root.contains("criterion")) {
    const json& j = root.at("criterion");
    detail::reject_unknown(j, "criterion", {"kind", "transient_guard_steps"});
    const std::string kind = detail::text(j, "kind", "criterion", "generalized");
    try {
      c.criterion.kind = parse_criterion_kind(kind);
    } catch (const std::invalid_argument&) {
      throw ConfigError("criterion.kind", "unknown criterion kind '" + kind + "'");
    }
    c.criterion.transient_guard_steps = static_cast<int>(detail::integer(
        j, "transient_guard_steps", "criterion", c.criterion.transient_guard_steps));
  }

  if (root.contains("sampler")) {
    const json& j = root.at("sampler");
    detail::reject_unknown(j, "sampler",
                           {"algorithm", "max_depth", "min_depth_before_termination", "seed",
                            "n_draws", "n_warmup_discard", "divergence_threshold",
                            "static_steps", "chains"});
    const std::string algo = detail::text(j, "algorithm", "sampler", "nuts");
    if (algo == "nuts") {
      c.sampler.algorithm = Algorithm::Nuts;
    } else if (algo == "static") {
      c.sampler.algorithm = Algorithm::StaticHmc;
    } else {
      throw ConfigError("sampler.algorithm", "unknown algorithm '" + algo + "'");
    }
    auto& s = c.sampler;
    s.max_depth = static_cast<int>(detail::integer(j, "max_depth", "sampler", s.max_depth));
    s.min_depth_before_termination = static_cast<int>(detail::integer(
        j, "min_depth_before_termination", "sampler", s.min_depth_before_termination));
    if (j.contains("seed")) {
      const json& seed = j.at("seed");
      if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0)) {
        throw ConfigError("sampler.seed", "expected a non-negative integer");
      }
      s.seed = seed.get<std::uint64_t>();
    }
    s.n_draws = static_cast<int>(detail::integer(j, "n_draws", "sampler", s.n_draws));
    s.n_warmup_discard =
        static_cast<int>(detail::integer(j, "n_warmup_discard", "sampler", s.n_warmup_discard));
    s.divergence_threshold =
        detail::number(j, "divergence_threshold", "sampler", s.divergence_threshold);
    s.static_steps = static_cast<int>(detail::integer(j, "static_steps", "sampler", s.static_steps));
    c.chains = static_cast<int>(detail::integer(j, "chains", "sampler", c.chains));
  }

  if (root.contains("trajectory")) {
    const json& j = root.at("trajectory");
    detail::reject_unknown(j, "trajectory", {"n_steps"});
    c.n_steps = static_cast<int>(detail::integer(j, "n_steps", "trajectory", c.n_steps));
  }

  if (root.contains("initial")) {
    const json& j = root.at("initial");
    detail::reject_unknown(j, "initial", {"q", "p"});
    if (j.contains("q")) c.initial.q = detail::vector(j.at("q"), "initial.q");
    if (j.contains("p")) c.initial.p = detail::vector(j.at("p"), "initial.p");
  }

  if (root.contains("output")) {
    const json& j = root.at("output");
    detail::reject_unknown(j, "output", {"trace", "draws", "summary"});
    c.output.trace = detail::text(j, "trace", "output", c.output.trace);
    c.output.draws = detail::text(j, "draws", "output", c.output.draws);
    c.output.summary = detail::text(j, "summary", "output", c.output.summary);
  }

  if (env_seed) c.sampler.seed = *env_seed;
  if (overrides.mode) c.mode = *overrides.mode;
  if (overrides.seed) c.sampler.seed = *overrides.seed;
  if (overrides.step_size) c.integrator.step_size = *overrides.step_size;
  if (overrides.n_steps) c.n_steps = *overrides.n_steps;
  if (overrides.n_draws) c.sampler.n_draws = *overrides.n_draws;
  if (overrides.chains) c.chains = *overrides.chains;
  if (overrides.criterion) {
    try {
      c.criterion.kind = parse_criterion_kind(*overrides.criterion);
    } catch (const std::invalid_argument&) {
      throw ConfigError("criterion.kind", "unknown criterion kind '" + *overrides.criterion + "'");
    }
  }
  if (overrides.trace) c.output.trace = *overrides.trace;
  if (overrides.draws) c.output.draws = *overrides.draws;
  if (overrides.summary) c.output.summary = *overrides.summary;

  // Range checks, after every layer has been applied.
  if (!(c.integrator.step_size > 0.0) || !std::isfinite(c.integrator.step_size)) {
    throw ConfigError("integrator.step_size", "must be positive");
  }
  if (!(c.integrator.fixed_point_tol > 0.0)) throw ConfigError("integrator.fp_tol", "must be positive");
  if (c.integrator.fixed_point_max_iters < 1) {
    throw ConfigError("integrator.fp_max_iters", "must be >= 1");
  }
  if (c.criterion.transient_guard_steps < 0) {
    throw ConfigError("criterion.transient_guard_steps", "must be >= 0");
  }
  if (c.sampler.max_depth < 1 || c.sampler.max_depth > 30) {
    throw ConfigError("sampler.max_depth", "must lie in [1, 30]");
  }
  if (c.sampler.min_depth_before_termination < 0 ||
      c.sampler.min_depth_before_termination >= c.sampler.max_depth) {
    throw ConfigError("sampler.min_depth_before_termination", "must lie in [0, max_depth)");
  }
  if (c.sampler.n_draws < 1) throw ConfigError("sampler.n_draws", "must be >= 1");
  if (c.sampler.n_warmup_discard < 0) throw ConfigError("sampler.n_warmup_discard", "must be >= 0");
  if (!(c.sampler.divergence_threshold > 0.0)) {
    throw ConfigError("sampler.divergence_threshold", "must be positive");
  }
  if (c.sampler.static_steps < 1) throw ConfigError("sampler.static_steps", "must be >= 1");
  if (c.chains < 1 || c.chains > 256) throw ConfigError("sampler.chains", "must lie in [1, 256]");
  if (c.n_steps < 0) throw ConfigError("trajectory.n_steps", "must be >= 0");

  const Index d = c.target.dimension();
  if (c.initial.q && c.initial.q->size() != d) {
    throw ConfigError("initial.q", "expected dimension " + std::to_string(d));
  }
  if (c.initial.p && c.initial.p->size() != d) {
    throw ConfigError("initial.p", "expected dimension " + std::to_string(d));
  }
  if (c.metric.mass == MetricSpec::Mass::Explicit && c.metric.explicit_mass.rows() != d) {
    throw ConfigError("metric.mass", "expected a " + std::to_string(d) + "x" + std::to_string(d) +
                                         " matrix");
  }
  if (c.metric.kind == MetricSpec::Kind::Euclidean &&
      c.metric.mass == MetricSpec::Mass::SigmaInverse &&
      c.target.kind != TargetSpec::Kind::Gaussian) {
    throw ConfigError("metric.mass", "sigma_inverse requires a gaussian target");
  }
  c.sampler.criterion = c.criterion.kind;
  return c;
}

}  // namespace geonuts::config
