// qfb: batch front-end.  Exit codes: 0 ok, 1 internal error, 2 config error,
// 3 convergence error, 4 truncation-health failure.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "qfb/experiments.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

int execute(qfb::RunKind kind, const CommonArgs& args) {
  try {
    qfb::ScenarioConfig cfg = qfb::load_config(args.config, kind);
    if (args.seed) cfg.run.seed = *args.seed;
    if (args.workers) {
      if (*args.workers < 1) throw qfb::ConfigError("--workers: must be >= 1");
      cfg.run.workers = *args.workers;
    }
    const qfb::ExperimentResult res = qfb::run_experiment(cfg, args.out);
    for (const auto& f : res.files) std::cout << f.string() << "\n";
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    return res.truncation_failure ? 4 : 0;
  } catch (const qfb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const qfb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feedback master equations: steady states, sweeps, trajectories, Wigner grids"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("qfb ") + qfb::kVersion);

  struct Entry {
    const char* name;
    const char* help;
    qfb::RunKind kind;
  };
  const Entry entries[] = {
      {"steady", "Stationary state of one scheme", qfb::RunKind::steady},
      {"sweep", "Bures distance to the adiabatic result over a Gamma grid", qfb::RunKind::sweep},
      {"traj", "Quantum-jump ensemble", qfb::RunKind::traj},
      {"wigner", "Wigner grid of a stationary state", qfb::RunKind::wigner},
      {"compare", "Pairwise Bures table across schemes", qfb::RunKind::compare},
  };
  CommonArgs args;
  std::uint64_t seed = 0;
  int workers = 1;
  std::optional<qfb::RunKind> chosen;
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("--config", args.config, "Scenario file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Master seed (overrides run.seed)");
    sub->add_option("--workers", workers, "Worker threads (overrides run.workers)");
    const qfb::RunKind kind = e.kind;
    sub->callback([&, kind, sub]() {
      chosen = kind;
      if (sub->count("--seed")) args.seed = seed;
      if (sub->count("--workers")) args.workers = workers;
    });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return execute(*chosen, args);
}
