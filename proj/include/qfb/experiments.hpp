#pragma once

// Named experiments driven by a ScenarioConfig, writing CSV files.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "qfb/analysis.hpp"
#include "qfb/config.hpp"
#include "qfb/steady.hpp"
#include "qfb/trajectory.hpp"

namespace qfb {

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const ScenarioConfig& cfg, const std::string& experiment) : path_(path) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error("cannot write " + path.string());
    out_ << "# qfb " << kVersion << "\n# experiment = " << experiment << "\n";
    for (const auto& line : describe_config(cfg)) out_ << "# " << line << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

inline std::string num(double v) { return detail::fmt(v); }

struct ExperimentResult {
  std::vector<std::filesystem::path> files;
  std::vector<std::string> warnings;
  bool truncation_failure = false;
};

inline Scheme reference_scheme(Scheme compound) {
  switch (compound) {
    case Scheme::eo_tla_compound: return Scheme::eo_tla_adiabatic;
    case Scheme::ao_tla_compound:
    case Scheme::ao_mode_compound: return Scheme::ao_adiabatic;
    case Scheme::jc_compound: return Scheme::jc_adiabatic;
    case Scheme::eo_mode_trajectory: return Scheme::eo_mode_adiabatic;
    default: throw ConfigError("model.scheme: " + to_string(compound) + " has no adiabatic counterpart");
  }
}

/// Static generator for scheme `s` with ancilla damping `gamma`.
inline SuperOp build_static(const ScenarioConfig& c, Scheme s, double gamma) {
  const SystemParams& sys = c.sys;
  const AncillaParams anc = c.ancilla_for(s, gamma);
  switch (s) {
    case Scheme::none: return build_no_feedback(sys);
    case Scheme::simple: return build_simple_feedback(sys);
    case Scheme::eo_tla_compound: return build_eo_tla_compound(sys, anc);
    case Scheme::eo_tla_adiabatic: return build_eo_tla_adiabatic(sys);
    case Scheme::eo_mode_adiabatic: return build_eo_mode_adiabatic(sys, anc);
    case Scheme::ao_tla_compound: return build_ao_compound(sys, anc, AncillaKind::two_level);
    case Scheme::ao_mode_compound: return build_ao_compound(sys, anc, AncillaKind::mode);
    case Scheme::ao_adiabatic: return build_ao_adiabatic(sys);
    case Scheme::kerr: return build_kerr(sys);
    case Scheme::jc_compound: return build_jc_compound_interaction(sys, anc);
    case Scheme::jc_adiabatic: return build_jc_adiabatic(sys, anc);
    case Scheme::eo_mode_trajectory: break;
  }
  throw ConfigError("model.scheme: " + to_string(s) + " has no static generator");
}

/// Unraveling used by `traj` runs.
inline UnravelSpec build_unravel(const ScenarioConfig& c, double gamma) {
  const SystemParams& sys = c.sys;
  const SpaceSpec s = system_space(sys);
  const Operator a = annihilation(s);
  const Operator hs = parametric_hamiltonian(s, sys.lambda);
  switch (c.scheme) {
    case Scheme::eo_mode_trajectory:
      return UnravelSpec::from_descriptor(build_eo_mode_compound_transformed(sys, c.ancilla_for(c.scheme, gamma)));
    case Scheme::none: return UnravelSpec::plain(hs, {{"system", a, 1.0, false}});
    case Scheme::simple: {
      const Operator u = op_function(feedback_operator(s, sys.chi), ScalarFunction::exp_i_scaled(-1.0));
      return UnravelSpec::plain(hs, {{"system", u * a, 1.0, false}});
    }
    case Scheme::kerr:
      return UnravelSpec::plain(Operator(s, (hs + kerr_hamiltonian(s, sys.chi)).matrix(), true),
                                {{"system", a, 1.0, false}});
    default: break;
  }
  throw ConfigError("model.scheme: traj does not support " + to_string(c.scheme));
}

inline SteadyOptions steady_options(const ScenarioConfig& c) {
  SteadyOptions o;
  o.tol = c.run.tol;
  return o;
}

inline DensityMatrix system_part(const DensityMatrix& rho) {
  return rho.space().factor_count() == 1 ? rho : partial_trace(rho, 0);
}

inline void write_state(const std::filesystem::path& path, const ScenarioConfig& cfg, const std::string& experiment,
                        const DenseMat& rho) {
  CsvWriter w(path, cfg, experiment);
  std::vector<std::string> head{"row"};
  for (long j = 0; j < rho.cols(); ++j) {
    head.push_back("re_" + std::to_string(j));
    head.push_back("im_" + std::to_string(j));
  }
  w.row(head);
  for (long i = 0; i < rho.rows(); ++i) {
    std::vector<std::string> cells{std::to_string(i)};
    for (long j = 0; j < rho.cols(); ++j) {
      cells.push_back(num(rho(i, j).real()));
      cells.push_back(num(rho(i, j).imag()));
    }
    w.row(cells);
  }
}

inline ExperimentResult run_steady(const ScenarioConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ExperimentResult res;
  const SteadyReport rep = steady_state(build_static(cfg, cfg.scheme, cfg.anc.gamma), steady_options(cfg));
  const DensityMatrix sys = system_part(rep.state);
  write_state(dir / "steady_state.csv", cfg, "steady", sys.matrix());
  res.files.push_back(dir / "steady_state.csv");

  CsvWriter w(dir / "steady_summary.csv", cfg, "steady");
  w.row({"quantity", "value"});
  w.row({"residual", num(rep.residual)});
  w.row({"tolerance", num(rep.tolerance)});
  w.row({"method", rep.method});
  w.row({"multiplicity_gap", num(rep.multiplicity_gap)});
  for (std::size_t k = 0; k < rep.truncation_health.size(); ++k)
    w.row({"top_population_factor_" + std::to_string(k), num(rep.truncation_health[k])});
  const Moments m = moments(sys);
  w.row({"n_mean", num(m.n_mean)});
  w.row({"x1_mean", num(m.x1_mean)});
  w.row({"x2_mean", num(m.x2_mean)});
  w.row({"x1_var", num(m.x1_var)});
  w.row({"x2_var", num(m.x2_var)});
  w.row({"parity_defect", num(parity_defect(sys.matrix()))});
  res.files.push_back(w.path());
  for (double p : rep.truncation_health)
    if (p > cfg.run.truncation_limit) res.truncation_failure = true;
  if (res.truncation_failure) res.warnings.push_back("steady state populates the top Fock levels above run.truncation_limit");
  return res;
}

struct TrajectoryPoint {
  EnsembleEstimate estimate;
  double bures = 0.0;
  double bures_stderr = 0.0;
  double bures_half = 0.0;
  DensityMatrix reference;
};

inline TrajectoryPoint trajectory_point(const ScenarioConfig& cfg, double gamma, const DensityMatrix& reference) {
  const UnravelSpec spec = build_unravel(cfg, gamma);
  Vec psi0 = Vec::Zero(spec.space.total_dim());
  psi0(0) = 1.0;
  EnsembleOptions eo;
  eo.workers = cfg.run.workers;
  eo.trajectory.truncation_limit = cfg.run.truncation_limit;
  std::vector<double> samples = cfg.run.sample_times;
  if (std::find(samples.begin(), samples.end(), cfg.run.t_final / 2) == samples.end()) samples.push_back(cfg.run.t_final / 2);
  std::sort(samples.begin(), samples.end());
  samples.erase(std::unique(samples.begin(), samples.end()), samples.end());
  eo.trajectory.sample_times = samples;
  const SpaceSpec& s = spec.space;
  const Operator a = annihilation(s, 0);
  eo.observables = {{"n", number(s, 0)},
                    {"x1", Operator(s, (a + a.adjoint()).matrix(), true)},
                    {"x2", Operator(s, (cplx(0.0, -1.0) * (a - a.adjoint())).matrix(), true)}};
  TrajectoryPoint pt;
  pt.reference = reference;
  pt.estimate = ensemble_average(spec, psi0, cfg.run.t_final, cfg.run.n_traj, cfg.run.seed, eo);
  auto stat = [&](const DensityMatrix& r) { return bures_distance(system_part(r), reference).bures; };
  std::tie(pt.bures, pt.bures_stderr) = jackknife_final(pt.estimate, stat);
  const auto half = std::find(pt.estimate.times.begin(), pt.estimate.times.end(), cfg.run.t_final / 2);
  pt.bures_half = stat(pt.estimate.state_at(static_cast<std::size_t>(half - pt.estimate.times.begin())));
  return pt;
}

inline ExperimentResult run_sweep(const ScenarioConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ExperimentResult res;
  CsvWriter w(dir / "sweep.csv", cfg, "sweep");
  w.row({"gamma", "bures", "bures_stderr", "bures_half_time", "error_annotation", "residual_compound",
         "residual_reference", "system_top_population", "ancilla_top_population", "parity_defect", "method"});
  const Scheme ref = reference_scheme(cfg.scheme);
  for (double gamma : cfg.run.gammas) {
    try {
      const SteadyReport rref = steady_state(build_static(cfg, ref, gamma), steady_options(cfg));
      if (cfg.scheme == Scheme::eo_mode_trajectory) {
        const TrajectoryPoint pt = trajectory_point(cfg, gamma, rref.state);
        const DensityMatrix red = system_part(pt.estimate.final_state());
        const auto th = truncation_health(pt.estimate.space, pt.estimate.rho.back());
        w.row({num(gamma), num(pt.bures), num(pt.bures_stderr), num(pt.bures_half), "one_sided_upper", "nan",
               num(rref.residual), num(th[0]), th.size() > 1 ? num(th[1]) : "nan", num(parity_defect(red.matrix())),
               "trajectories"});
        if (th[0] > cfg.run.truncation_limit || (th.size() > 1 && th[1] > cfg.run.truncation_limit))
          res.truncation_failure = true;
      } else {
        const SteadyReport rc = steady_state(build_static(cfg, cfg.scheme, gamma), steady_options(cfg));
        const DensityMatrix red = system_part(rc.state);
        w.row({num(gamma), num(bures_distance(red, rref.state).bures), "0", "nan", "exact", num(rc.residual),
               num(rref.residual), num(rc.truncation_health[0]),
               rc.truncation_health.size() > 1 ? num(rc.truncation_health[1]) : "nan", num(parity_defect(red.matrix())),
               rc.method});
        for (double p : rc.truncation_health)
          if (p > cfg.run.truncation_limit) res.truncation_failure = true;
      }
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("sweep point gamma = " + num(gamma) + ": " + e.what());
    } catch (const TruncationError& e) {
      throw TruncationError("sweep point gamma = " + num(gamma) + ": " + e.what());
    }
  }
  res.files.push_back(w.path());
  if (res.truncation_failure) res.warnings.push_back("a sweep point populates the top Fock levels above run.truncation_limit");
  return res;
}

inline ExperimentResult run_trajectory(const ScenarioConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ExperimentResult res;
  const Scheme ref = cfg.scheme == Scheme::eo_mode_trajectory ? Scheme::eo_mode_adiabatic : cfg.scheme;
  const SteadyReport rref = steady_state(build_static(cfg, ref, cfg.anc.gamma), steady_options(cfg));
  const TrajectoryPoint pt = trajectory_point(cfg, cfg.anc.gamma, rref.state);
  const EnsembleEstimate& est = pt.estimate;

  CsvWriter obs(dir / "traj_observables.csv", cfg, "traj");
  obs.row({"time", "n_mean", "n_stderr", "x1_mean", "x1_stderr", "x2_mean", "x2_stderr"});
  for (std::size_t s = 0; s < est.times.size(); ++s) {
    std::vector<std::string> cells{num(est.times[s])};
    for (const auto& o : est.observables) {
      cells.push_back(num(o.mean[s]));
      cells.push_back(num(o.stderr_[s]));
    }
    obs.row(cells);
  }
  res.files.push_back(obs.path());
  write_state(dir / "traj_state.csv", cfg, "traj", system_part(est.final_state()).matrix());
  res.files.push_back(dir / "traj_state.csv");

  CsvWriter w(dir / "traj_summary.csv", cfg, "traj");
  w.row({"quantity", "value"});
  w.row({"n_traj", std::to_string(est.n_traj)});
  w.row({"n_discarded", std::to_string(est.n_discarded)});
  w.row({"step", num(est.step)});
  w.row({"max_top_population", num(est.max_top_population)});
  w.row({"reference_scheme", to_string(ref)});
  w.row({"bures_vs_reference", num(pt.bures)});
  w.row({"bures_stderr", num(pt.bures_stderr)});
  w.row({"bures_half_time", num(pt.bures_half)});
  w.row({"error_annotation", "one_sided_upper"});
  res.files.push_back(w.path());
  return res;
}

inline ExperimentResult run_wigner(const ScenarioConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ExperimentResult res;
  const SteadyReport rep = steady_state(build_static(cfg, cfg.scheme, cfg.anc.gamma), steady_options(cfg));
  const WignerGrid g = wigner(system_part(rep.state), cfg.run.wigner_grid);
  {
    CsvWriter w(dir / "wigner.csv", cfg, "wigner");
    std::vector<std::string> head;
    for (std::size_t j = 0; j < g.x1.size(); ++j) head.push_back("c" + std::to_string(j));
    w.row(head);
    for (long i = 0; i < g.values.rows(); ++i) {
      std::vector<std::string> cells;
      for (long j = 0; j < g.values.cols(); ++j) cells.push_back(num(g.values(i, j)));
      w.row(cells);
    }
    res.files.push_back(w.path());
  }
  {
    CsvWriter w(dir / "wigner_axes.csv", cfg, "wigner");
    w.row({"index", "x1", "x2"});
    for (std::size_t i = 0; i < std::max(g.x1.size(), g.x2.size()); ++i)
      w.row({std::to_string(i), i < g.x1.size() ? num(g.x1[i]) : "nan", i < g.x2.size() ? num(g.x2[i]) : "nan"});
    res.files.push_back(w.path());
  }
  {
    CsvWriter w(dir / "wigner_summary.csv", cfg, "wigner");
    w.row({"quantity", "value"});
    w.row({"normalization", num(g.normalization())});
    w.row({"reflection_defect", num(g.reflection_defect())});
    w.row({"support_warning", g.support_warning ? "1" : "0"});
    res.files.push_back(w.path());
  }
  if (g.support_warning) res.warnings.push_back("Wigner grid does not cover the state's support (normalization off)");
  return res;
}

inline ExperimentResult run_compare(const ScenarioConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ExperimentResult res;
  std::vector<DensityMatrix> states;
  CsvWriter ws(dir / "compare_states.csv", cfg, "compare");
  ws.row({"scheme", "residual", "method", "system_top_population", "parity_defect"});
  for (Scheme s : cfg.run.schemes) {
    const SteadyReport rep = steady_state(build_static(cfg, s, cfg.anc.gamma), steady_options(cfg));
    states.push_back(system_part(rep.state));
    ws.row({to_string(s), num(rep.residual), rep.method, num(rep.truncation_health[0]),
            num(parity_defect(states.back().matrix()))});
    if (rep.truncation_health[0] > cfg.run.truncation_limit) res.truncation_failure = true;
  }
  res.files.push_back(ws.path());
  CsvWriter w(dir / "compare.csv", cfg, "compare");
  w.row({"scheme_a", "scheme_b", "bures"});
  for (std::size_t i = 0; i < states.size(); ++i)
    for (std::size_t j = i + 1; j < states.size(); ++j)
      w.row({to_string(cfg.run.schemes[i]), to_string(cfg.run.schemes[j]), num(bures_distance(states[i], states[j]).bures)});
  res.files.push_back(w.path());
  return res;
}

inline ExperimentResult run_experiment(const ScenarioConfig& cfg, const std::filesystem::path& dir) {
  switch (cfg.run.kind) {
    case RunKind::steady: return run_steady(cfg, dir);
    case RunKind::sweep: return run_sweep(cfg, dir);
    case RunKind::traj: return run_trajectory(cfg, dir);
    case RunKind::wigner: return run_wigner(cfg, dir);
    case RunKind::compare: return run_compare(cfg, dir);
  }
  throw ConfigError("run.kind: unknown");
}

}  // namespace qfb
