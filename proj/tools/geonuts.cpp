// geonuts: run trajectory, sampling and normal-mode experiments from a JSON config.
//
// Exit codes: 0 success, 1 config error, 2 I/O error, 3 numerical failure.

#include "geonuts/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumerical = 3;

std::string read_config(const std::string& path) {
  if (path.empty()) return "{}";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw geonuts::config::ConfigError("", "cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("GEONUTS_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long value = std::strtoull(raw, &end, 10);
  if (end == raw || *end != '\0' || raw[0] == '-') {
    throw geonuts::config::ConfigError("GEONUTS_SEED", "expected a non-negative integer");
  }
  return value;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace geonuts;

  CLI::App app{"Hamiltonian Monte Carlo turning-point experiments"};
  app.require_subcommand(1);

  std::string config_path;
  config::Overrides overrides;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON experiment config");
    sub->add_option("--seed", overrides.seed, "RNG seed (overrides config and GEONUTS_SEED)");
    sub->add_option("--step-size", overrides.step_size, "Integrator step size");
    sub->add_option("--criterion", overrides.criterion, "classic | generalized");
  };

  auto* trajectory = app.add_subcommand("trajectory", "Integrate one trajectory and write a CSV trace");
  add_common(trajectory);
  trajectory->add_option("-o,--out", overrides.trace, "Trace CSV path");
  trajectory->add_option("--steps", overrides.n_steps, "Number of integrator steps");

  auto* sample = app.add_subcommand("sample", "Run Markov chains and write draws and a summary");
  add_common(sample);
  sample->add_option("-o,--out", overrides.draws, "Draws CSV path");
  sample->add_option("--summary", overrides.summary, "Summary JSON path");
  sample->add_option("--chains", overrides.chains, "Number of chains");
  sample->add_option("--draws", overrides.n_draws, "Draws per chain");

  auto* modes = app.add_subcommand("modes", "Print normal-mode frequencies and predicted zero times");
  add_common(modes);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (trajectory->parsed()) overrides.mode = config::Mode::Trajectory;
    if (sample->parsed()) overrides.mode = config::Mode::Sample;
    if (modes->parsed()) overrides.mode = config::Mode::Modes;
    const config::ExperimentConfig cfg = config::parse_config(read_config(config_path), overrides,
                                                              env_seed());
    switch (cfg.mode) {
      case config::Mode::Trajectory: {
        const TrajectoryTrace trace = experiment::run_trajectory_mode(cfg);
        config::json info = {{"trace", cfg.output.trace}, {"rows", trace.entries.size()}};
        info["terminated_at"] = trace.terminated_at ? config::json(*trace.terminated_at) : config::json();
        std::cout << info.dump() << "\n";
        break;
      }
      case config::Mode::Sample: {
        const auto result = experiment::run_sample_mode(cfg);
        std::cout << config::json{{"draws", cfg.output.draws},
                                  {"summary", cfg.output.summary},
                                  {"divergences", result.pooled.divergences}}
                         .dump()
                  << "\n";
        break;
      }
      case config::Mode::Modes:
        std::cout << experiment::modes_report(cfg).dump(2) << "\n";
        break;
    }
  } catch (const config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const experiment::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
