// Acceptance run: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all ten)

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "qfb/qfb.hpp"

using namespace qfb;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Kept {
  std::string label;
  DensityMatrix rho;
};

std::vector<Kept> g_states;  // system states from criteria 4-9, checked by 10

void keep(const std::string& label, const DensityMatrix& rho) {
  g_states.push_back({label, rho.space().factor_count() == 1 ? rho : partial_trace(rho, 0)});
}

std::string g3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

void log(const std::string& s) { std::cerr << "  .. " << s << std::endl; }

SystemParams params(double lambda, double chi, int n_max) {
  SystemParams s;
  s.lambda = lambda;
  s.chi = chi;
  s.n_max = n_max;
  return s;
}

double bures(const DensityMatrix& a, const DensityMatrix& b) { return bures_distance(a, b).bures; }

int workers() { return std::max(1u, std::thread::hardware_concurrency()); }

Outcome generator_identities() {
  const SystemParams sys = params(2.2, PI / 2, 10);
  const double d1 = superop_distance(build_eo_tla_adiabatic(sys, EoTlaForm::closed),
                                     build_eo_tla_adiabatic(sys, EoTlaForm::quadrature));
  const double d2 = superop_distance(build_ao_adiabatic(sys, AoForm::rational), build_ao_adiabatic(sys, AoForm::arctan));
  return {d1 <= 1e-8 && d2 <= 1e-10, "eo-TLA closed/quadrature " + g3(d1) + " (<= 1e-8), AO rational/arctan " + g3(d2) +
                                         " (<= 1e-10)"};
}

Outcome expansion_orders() {
  const SpaceSpec s = SpaceSpec::fock(10);
  const Operator a = annihilation(s), n = number(s), h = parametric_hamiltonian(s, 0.5);
  const std::vector<double> chis{0.1, 0.05, 0.025};
  auto power = [&](GeneratorForm f1, GeneratorForm f2) {
    return expansion_order_probe(f1, f2, n, a, h, chis).fitted_power;
  };
  const double eo = power(GeneratorForm::simple, GeneratorForm::eo_tla_closed);
  const double ao = power(GeneratorForm::simple, GeneratorForm::ao_rational);
  bool ok = std::abs(eo - 2.0) <= 0.1 && std::abs(ao - 3.0) <= 0.1;
  std::string detail = "simple/eo-TLA " + g3(eo) + ", simple/AO " + g3(ao) + ", third-order:";
  const std::pair<GeneratorForm, GeneratorForm> third[] = {
      {GeneratorForm::simple, GeneratorForm::simple_third_order},
      {GeneratorForm::eo_tla_closed, GeneratorForm::eo_tla_third_order},
      {GeneratorForm::ao_rational, GeneratorForm::ao_third_order}};
  for (const auto& [f1, f2] : third) {
    const double p = power(f1, f2);
    ok = ok && std::abs(p - 4.0) <= 0.2;
    detail += " " + g3(p);
  }
  return {ok, detail};
}

Outcome periodicity() {
  const double chi = PI / 2;
  const double d_simple = superop_distance(build_simple_feedback(params(0.97, chi, 20)),
                                           build_simple_feedback(params(0.97, chi + 2 * PI, 20)));
  const DensityMatrix at_pi = steady_state(build_simple_feedback(params(0.5, PI, 20))).state;
  const DensityMatrix at_zero = steady_state(build_simple_feedback(params(0.5, 0.0, 20))).state;
  const double b = bures(at_pi, at_zero);
  const double d_kerr =
      superop_distance(build_kerr(params(0.97, chi, 20)), build_kerr(params(0.97, chi + 2 * PI, 20)));
  return {d_simple <= 1e-12 && b <= 1e-8 && d_kerr > 0.1,
          "simple chi/chi+2pi " + g3(d_simple) + ", steady chi=pi vs 0 Bures " + g3(b) + ", Kerr chi/chi+2pi " +
              g3(d_kerr)};
}

Outcome threshold() {
  const SteadyReport none = steady_state(build_no_feedback(params(1.2, 0.0, 20)));
  const SteadyReport simple = steady_state(build_simple_feedback(params(2.2, PI / 2, 35)));
  keep("none lambda=1.2", none.state);
  keep("simple lambda=2.2", simple.state);
  const double top_none = none.truncation_health[0], top_simple = simple.truncation_health[0];
  return {top_none > 1e-3 && top_simple < 1e-3,
          "top-level population: no feedback " + g3(top_none) + " (> 1e-3), simple feedback " + g3(top_simple) +
              " (< 1e-3)"};
}

Outcome eo_tla_sweep() {
  const SystemParams sys = params(2.2, PI / 2, 35);
  const DensityMatrix ref = steady_state(build_eo_tla_adiabatic(sys)).state;
  keep("eo_tla_adiabatic lambda=2.2", ref);
  std::vector<double> b;
  std::string detail = "Bures:";
  for (double gamma : {1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0}) {
    const DensityMatrix red = reduced_steady(build_eo_tla_compound(sys, eo_tla_linked(gamma, sys.chi)));
    keep("eo_tla_compound gamma=" + g3(gamma), red);
    b.push_back(bures(red, ref));
    detail += " " + g3(b.back());
    log("eo-TLA gamma " + g3(gamma) + " bures " + g3(b.back()));
  }
  bool ok = b.back() < 0.25 * b.front();
  for (std::size_t i = 1; i < b.size(); ++i) ok = ok && b[i] <= b[i - 1];
  return {ok, detail + "; ratio 100/1 = " + g3(b.back() / b.front()) + " (< 0.25)"};
}

Outcome ao_sweeps() {
  const SystemParams sys = params(0.97, PI / 2, 20);
  const DensityMatrix ref = steady_state(build_ao_adiabatic(sys)).state;
  keep("ao_adiabatic lambda=0.97", ref);
  std::vector<double> b;
  std::string detail = "(a) AO-TLA:";
  DensityMatrix tla10;
  for (double gamma : {1.0, 2.0, 5.0, 10.0}) {
    const DensityMatrix red = reduced_steady(build_ao_compound(sys, ao_linked(gamma, sys.chi), AncillaKind::two_level));
    keep("ao_tla gamma=" + g3(gamma), red);
    b.push_back(bures(red, ref));
    detail += " " + g3(b.back());
    if (gamma == 10.0) tla10 = red;
  }
  bool ok_a = true;
  for (std::size_t i = 1; i < b.size(); ++i) ok_a = ok_a && b[i] < b[i - 1];

  auto mode_state = [&](double gamma, double& anc_top) {
    const SteadyReport r = steady_state(build_ao_compound(sys, ao_linked(gamma, sys.chi, 10), AncillaKind::mode));
    anc_top = r.truncation_health.at(1);
    keep("ao_mode gamma=" + g3(gamma), r.state);
    log("AO-mode gamma " + g3(gamma) + " via " + r.method + ", ancilla top population " + g3(anc_top));
    return partial_trace(r.state, 0);
  };
  double top1 = 0.0, top10 = 0.0;
  const double b_mode1 = bures(mode_state(1.0, top1), ref);
  const bool ok_b = b_mode1 < 0.1;
  const double b_c = bures(mode_state(10.0, top10), tla10);
  const bool ok_c = b_c <= 0.05;
  const bool healthy = top1 < 1e-3 && top10 < 1e-3;
  return {ok_a && ok_b && ok_c && healthy,
          detail + "; (b) AO-mode gamma=1 " + g3(b_mode1) + " (< 0.1); (c) TLA vs mode gamma=10 " + g3(b_c) +
              " (<= 0.05); mode ancilla top population " + g3(std::max(top1, top10)) + " (< 1e-3)"};
}

Vec basis_ket(int d, int k) {
  Vec v = Vec::Zero(d);
  v(k) = 1.0;
  return v;
}

Outcome trajectory_oracle() {
  std::string detail;
  bool ok = true;
  {
    const SpaceSpec s = SpaceSpec::fock(3);
    const UnravelSpec spec =
        UnravelSpec::plain(parametric_hamiltonian(s, 0.0), {JumpChannel{"a", annihilation(s), 1.0, false}});
    EnsembleOptions opt;
    opt.trajectory.sample_times = {0.5, 1.0, 2.0};
    opt.trajectory.truncation_limit = 1.0;
    opt.observables = {{"n", number(s)}};
    opt.workers = workers();
    const EnsembleEstimate est = ensemble_average(spec, basis_ket(3, 2), 2.0, 1000, 7, opt);
    double worst = 0.0;
    for (std::size_t i = 0; i < est.times.size(); ++i) {
      const ObservableEstimate& n = est.observables[0];
      worst = std::max(worst, std::abs(n.mean[i] - 2.0 * std::exp(-est.times[i])) / n.stderr_[i]);
    }
    ok = ok && worst <= 3.0;
    detail += "damping max deviation " + g3(worst) + " se";
  }
  {
    // eps = 0 compound (8 x 4 = 32 states): fixed Lindblad generator.  The
    // reduced system state is compared entry by entry.
    const SystemParams sys = params(0.5, PI / 2, 7);
    AncillaParams anc;
    anc.gamma = 3.0;
    anc.g = 1.5;
    anc.epsilon = 0.0;
    anc.ancilla_dim = 4;
    const GeneratorDescriptor desc = build_eo_mode_compound_transformed(sys, anc);
    const UnravelSpec spec = UnravelSpec::from_descriptor(desc);
    const SpaceSpec s = system_space(sys);
    const int ds = s.total_dim();
    EnsembleOptions opt;
    opt.trajectory.truncation_limit = 1.0;
    opt.workers = workers();
    struct Entry {
      int i, j;
      bool imag;
    };
    std::vector<Entry> entries;
    for (int i = 0; i < ds; ++i)
      for (int j = i; j < ds; ++j) {
        DenseMat m = DenseMat::Zero(ds, ds);
        m(i, j) = 1.0;
        DenseMat re = 0.5 * (m + m.adjoint());
        if (i == j) re = m;
        opt.observables.push_back({"re", tensor_embed(desc.space, {{0, Operator(s, re, true)}})});
        entries.push_back({i, j, false});
        if (i != j) {
          // Tr[rho X] = Im rho_ij for X = i(|i><j| - |j><i|)/2
          const DenseMat im = cplx(0.0, 0.5) * (m - m.adjoint());
          opt.observables.push_back({"im", tensor_embed(desc.space, {{0, Operator(s, im, true)}})});
          entries.push_back({i, j, true});
        }
      }
    const double t_final = 3.0;
    // Top-level populations (~1e-6) come from rare excursions; the normal
    // approximation behind a 3 se band needs the larger ensemble.
    const EnsembleEstimate est = ensemble_average(spec, basis_ket(desc.space.total_dim(), 0), t_final, 10000, 2024, opt);
    DenseMat rho0 = DenseMat::Zero(desc.space.total_dim(), desc.space.total_dim());
    rho0(0, 0) = 1.0;
    const DenseMat exact = partial_trace_matrix(desc.space, oracle::propagate(desc.base, rho0, t_final), 0);
    int outside = 0;
    double worst = 0.0;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const cplx e = exact(entries[k].j, entries[k].i);  // Tr[rho |i><j|] = rho_ji
      const double want = entries[k].imag ? e.imag() : e.real();
      const ObservableEstimate& ob = est.observables[k];
      const double dev = std::abs(ob.mean.back() - want);
      const double allow = 3.0 * ob.stderr_.back() + 1e-12;
      if (dev > allow) {
        ++outside;
        log("entry (" + std::to_string(entries[k].i) + "," + std::to_string(entries[k].j) + (entries[k].imag ? ") im" : ") re") +
            ": ensemble " + g3(ob.mean.back()) + " exact " + g3(want) + " se " + g3(ob.stderr_.back()));
      }
      if (ob.stderr_.back() > 0.0) worst = std::max(worst, dev / ob.stderr_.back());
    }
    ok = ok && outside == 0;
    detail += "; static 8x4 reduced state: " + std::to_string(outside) + " of " + std::to_string(entries.size()) +
              " entries outside 3 se (max " + g3(worst) + " se)";
  }
  {
    const SystemParams sys = params(0.9, PI / 2, 6);
    const UnravelSpec spec =
        UnravelSpec::from_descriptor(build_eo_mode_compound_transformed(sys, eo_mode_linked(4.0, sys.chi, 0.01, 3)));
    EnsembleOptions one;
    one.trajectory.sample_times = {1.0, 2.0};
    one.trajectory.truncation_limit = 1.0;
    one.block = 16;
    EnsembleOptions many = one;
    many.workers = 4;
    const EnsembleEstimate a = ensemble_average(spec, basis_ket(21, 0), 3.0, 100, 5, one);
    const EnsembleEstimate b = ensemble_average(spec, basis_ket(21, 0), 3.0, 100, 5, many);
    bool same = a.rho.size() == b.rho.size();
    for (std::size_t i = 0; same && i < a.rho.size(); ++i) same = a.rho[i] == b.rho[i];
    ok = ok && same;
    detail += same ? "; workers 1 vs 4 bit-exact" : "; workers 1 vs 4 differ";
  }
  return {ok, detail};
}

Outcome eo_mode_trajectories() {
  const SystemParams sys = params(2.2, PI / 2, 40);
  const double diffusion = 0.001;
  const int n_traj = 2000;
  const double t_final = 20.0;
  struct Point {
    double bures, se, half;
    int discarded;
  };
  std::vector<Point> pts;
  for (double gamma : {10.0, 100.0}) {
    const auto t0 = std::chrono::steady_clock::now();
    const AncillaParams anc = eo_mode_linked(gamma, sys.chi, diffusion, 8);
    const DensityMatrix ref = steady_state(build_eo_mode_adiabatic(sys, anc)).state;
    keep("eo_mode_adiabatic gamma=" + g3(gamma), ref);
    const UnravelSpec spec = UnravelSpec::from_descriptor(build_eo_mode_compound_transformed(sys, anc));
    EnsembleOptions opt;
    opt.trajectory.sample_times = {t_final / 2};
    opt.workers = workers();
    const EnsembleEstimate est =
        ensemble_average(spec, basis_ket(spec.space.total_dim(), 0), t_final, n_traj, 20260101, opt);
    auto stat = [&](const DensityMatrix& r) { return bures(partial_trace(r, 0), ref); };
    const auto [b, se] = jackknife_final(est, stat);
    const double half = stat(est.state_at(0));
    keep("eo_mode ensemble gamma=" + g3(gamma), est.final_state());
    pts.push_back({b, se, half, est.n_discarded});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log("eo-mode trajectories gamma " + g3(gamma) + ": Bures " + g3(b) + " +- " + g3(se) + " (T/2: " + g3(half) +
        "), discarded " + std::to_string(est.n_discarded) + ", step " + g3(est.step) + ", " + g3(secs) + " s");
  }
  // Finite-sample bias pushes each estimate away from the reference, so the
  // test is one-sided: the drop must exceed two combined standard errors.
  const double allowance = 2.0 * std::hypot(pts[0].se, pts[1].se);
  const double drop = pts[0].bures - pts[1].bures;
  return {drop > allowance, "Bures gamma=10 " + g3(pts[0].bures) + " +- " + g3(pts[0].se) + ", gamma=100 " +
                                g3(pts[1].bures) + " +- " + g3(pts[1].se) + "; drop " + g3(drop) + " vs allowance " +
                                g3(allowance) + " (T/2 values " + g3(pts[0].half) + ", " + g3(pts[1].half) + ")"};
}

Outcome jc_limit() {
  const SystemParams sys = params(0.97, PI / 2, 20);
  const double gamma = 4.0;
  const AncillaParams lo = jc_linked(gamma, sys.chi, 100.0), hi = jc_linked(gamma, sys.chi, 400.0);
  const double ratio = jc_big_delta(hi) / jc_big_delta(lo);
  const JcExtraTerms e_lo = jc_extra_terms(sys, lo), e_hi = jc_extra_terms(sys, hi);
  const double damp_lo = max_abs(e_lo.damping.matrix()), damp_hi = max_abs(e_hi.damping.matrix());
  const double kerr_lo = max_abs(e_lo.kerr.matrix()), kerr_hi = max_abs(e_hi.kerr.matrix());
  const bool decreasing = damp_hi < damp_lo && kerr_hi < kerr_lo;
  const double p_damp_fixed_z = std::log(damp_lo / damp_hi) / std::log(ratio);
  const double p_kerr_fixed_z = std::log(kerr_lo / kerr_hi) / std::log(ratio);

  // Delta powers at fixed coupling g.
  AncillaParams g_lo = lo, g_hi = lo;
  g_hi.detuning = lo.detuning * ratio;
  const double r_g = jc_big_delta(g_hi) / jc_big_delta(g_lo);
  const JcExtraTerms f_lo = jc_extra_terms(sys, g_lo), f_hi = jc_extra_terms(sys, g_hi);
  const double p_damp = std::log(max_abs(f_lo.damping.matrix()) / max_abs(f_hi.damping.matrix())) / std::log(r_g);
  const double p_kerr = std::log(max_abs(f_lo.kerr.matrix()) / max_abs(f_hi.kerr.matrix())) / std::log(r_g);
  const bool powers = std::abs(p_damp - 2.0) <= 0.2 && std::abs(p_kerr - 3.0) <= 0.3;

  const DensityMatrix ref = steady_state(build_eo_tla_adiabatic(sys)).state;
  const DensityMatrix red_lo = reduced_steady(build_jc_compound_interaction(sys, lo));
  const DensityMatrix red_hi = reduced_steady(build_jc_compound_interaction(sys, hi));
  keep("jc_compound delta=100", red_lo);
  keep("jc_compound delta=400", red_hi);
  const double b_lo = bures(red_lo, ref), b_hi = bures(red_hi, ref);
  return {decreasing && powers && b_hi < b_lo,
          "(a) extra terms at fixed Z_eff: damping " + g3(damp_lo) + " -> " + g3(damp_hi) + ", Kerr " + g3(kerr_lo) +
              " -> " + g3(kerr_hi) + " (powers " + g3(p_damp_fixed_z) + ", " + g3(p_kerr_fixed_z) +
              "); at fixed g powers " + g3(p_damp) + " (2 +- 10%), " + g3(p_kerr) + " (3 +- 10%); (b) Bures " +
              g3(b_lo) + " -> " + g3(b_hi)};
}

Outcome parity_symmetry() {
  if (g_states.empty()) return {false, "no steady states collected (run criteria 4-9 first)"};
  double worst_parity = 0.0, worst_reflection = 0.0;
  std::string worst_label;
  for (const Kept& k : g_states) {
    const double p = parity_defect(k.rho.matrix());
    const double r = wigner(k.rho).reflection_defect();
    if (p > worst_parity) worst_label = k.label;
    worst_parity = std::max(worst_parity, p);
    worst_reflection = std::max(worst_reflection, r);
  }
  return {worst_parity <= 1e-10 && worst_reflection <= 1e-8,
          std::to_string(g_states.size()) + " states: max odd coherence " + g3(worst_parity) + " (<= 1e-10" +
              (worst_label.empty() ? "" : ", worst " + worst_label) + "), max Wigner reflection defect " +
              g3(worst_reflection) + " (<= 1e-8)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"generator identities", generator_identities},
      {"expansion orders", expansion_orders},
      {"feedback periodicity", periodicity},
      {"threshold behaviour", threshold},
      {"eo-TLA gamma sweep", eo_tla_sweep},
      {"AO sweeps", ao_sweeps},
      {"trajectory engine oracle", trajectory_oracle},
      {"eo-mode trajectory sweep", eo_mode_trajectories},
      {"JC large-detuning limit", jc_limit},
      {"parity and Wigner symmetry", parity_symmetry},
  };
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::cerr << "unknown criterion '" << argv[i] << "'\n";
      return 2;
    }
    chosen.insert(k);
  }
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    if (!chosen.empty() && !chosen.count(k)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << k << ". " << criteria[i].first << ": " << o.detail << " ["
              << g3(secs) << " s]" << std::endl;
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
