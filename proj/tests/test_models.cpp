#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qfb/analysis.hpp"
#include "qfb/models.hpp"
#include "qfb/steady.hpp"

using namespace qfb;

namespace {

SystemParams params(double lambda, double chi, int n_max) {
  SystemParams s;
  s.lambda = lambda;
  s.chi = chi;
  s.n_max = n_max;
  return s;
}

void expect_valid_generator(const SuperOp& l, const std::string& what) {
  const double scale = std::max(1.0, max_abs(l.matrix()));
  EXPECT_LE(l.trace_defect(), 1e-10 * scale) << what;
  EXPECT_LE(hermiticity_defect(l, 3), 1e-10) << what;
}

double bures(const DensityMatrix& a, const DensityMatrix& b) { return bures_distance(a, b).bures; }

}  // namespace

TEST(Params, Validation) {
  EXPECT_THROW(build_no_feedback(params(0.5, 0.0, 1)), ContractViolation);
  EXPECT_THROW(build_no_feedback(params(-0.1, 0.0, 5)), ContractViolation);
  AncillaParams bad;
  bad.gamma = 0.0;
  EXPECT_THROW(build_eo_tla_compound(params(0.5, 0.0, 5), bad), ContractViolation);
  AncillaParams small;
  small.ancilla_dim = 1;
  EXPECT_THROW(build_ao_compound(params(0.5, 0.0, 5), small, AncillaKind::mode), ContractViolation);
}

TEST(Linkage, SchemeRelations) {
  const double chi = PI / 2;
  EXPECT_DOUBLE_EQ(eo_tla_linked(20.0, chi).g, 20.0 * PI / 2);
  EXPECT_DOUBLE_EQ(4.0 * ao_linked(10.0, chi).g / 10.0, chi);
  const AncillaParams m = eo_mode_linked(100.0, chi, 0.001);
  EXPECT_NEAR(m.gamma / (2 * m.epsilon * m.epsilon), 0.001, 1e-15);
  EXPECT_NEAR(m.epsilon * m.g / m.gamma, chi, 1e-13);
  EXPECT_NEAR(eo_mode_diffusion_coefficient(m), 0.002, 1e-15);
  const AncillaParams j = jc_linked(4.0, chi, 400.0);
  EXPECT_NEAR(jc_big_delta(j), 400.0, 1e-10);
  EXPECT_NEAR(jc_effective_chi(j), chi, 1e-12);
  EXPECT_THROW(jc_linked(4.0, chi, 5.0), ContractViolation);
}

TEST(NoFeedback, VacuumAtZeroDrive) {
  const SteadyReport r = steady_state(build_no_feedback(params(0.0, 0.0, 10)));
  EXPECT_NEAR(r.state.matrix()(0, 0).real(), 1.0, 1e-12);
  EXPECT_LE(r.residual, 1e-12);
}

TEST(NoFeedback, BelowAndAboveThreshold) {
  const SteadyReport below = steady_state(build_no_feedback(params(0.5, 0.0, 20)));
  EXPECT_LT(below.truncation_health[0], 1e-8);
  const SteadyReport above = steady_state(build_no_feedback(params(1.2, 0.0, 20)));
  EXPECT_GT(above.truncation_health[0], 1e-3);
}

TEST(SimpleFeedback, ReducesToNoFeedbackAtZeroChi) {
  EXPECT_EQ(superop_distance(build_simple_feedback(params(0.7, 0.0, 12)), build_no_feedback(params(0.7, 0.0, 12))), 0.0);
}

TEST(SimpleFeedback, PeriodicInChi) {
  for (double chi : {0.3, PI / 2, 2.0}) {
    const double d = superop_distance(build_simple_feedback(params(0.97, chi, 15)),
                                      build_simple_feedback(params(0.97, chi + 2 * PI, 15)));
    EXPECT_LE(d, 1e-12) << chi;
  }
}

TEST(SimpleFeedback, NoEffectAtFullTurnAndHalfTurn) {
  const DensityMatrix ref = steady_state(build_no_feedback(params(0.5, 0.0, 20))).state;
  EXPECT_LE(bures(steady_state(build_simple_feedback(params(0.5, 2 * PI, 20))).state, ref), 1e-8);
  EXPECT_LE(bures(steady_state(build_simple_feedback(params(0.5, PI, 20))).state, ref), 1e-8);
}

TEST(EoTlaCompound, DecoupledAtZeroCoupling) {
  const SystemParams sys = params(0.5, PI / 2, 12);
  AncillaParams anc;
  anc.gamma = 3.0;
  anc.g = 0.0;
  const DensityMatrix red = reduced_steady(build_eo_tla_compound(sys, anc));
  const DensityMatrix ref = steady_state(build_no_feedback(sys)).state;
  EXPECT_LE(bures(red, ref), 1e-8);
}

TEST(EoTlaCompound, DetuningHasNoEffect) {
  const SystemParams sys = params(0.97, PI / 2, 14);
  AncillaParams a0 = eo_tla_linked(5.0, PI / 2, 0.0), a5 = eo_tla_linked(5.0, PI / 2, 5.0);
  const DensityMatrix r0 = reduced_steady(build_eo_tla_compound(sys, a0));
  const DensityMatrix r5 = reduced_steady(build_eo_tla_compound(sys, a5));
  EXPECT_LE(max_abs(DenseMat(r0.matrix() - r5.matrix())), 1e-10);
}

TEST(EoTlaCompound, FlipUnitaryFromSpectralRoute) {
  const SpaceSpec w = SpaceSpec::fock_tla(3);
  EXPECT_LT(max_abs(DenseMat(atom_flip(w).dense() + I_UNIT * pauli(w, 1, Pauli::x).dense())), 1e-12);
}

TEST(EoTlaAdiabatic, ClosedEqualsQuadrature) {
  for (int n_max : {9, 10}) {
    const SystemParams sys = params(2.2, PI / 2, n_max);
    EXPECT_LE(superop_distance(build_eo_tla_adiabatic(sys, EoTlaForm::closed),
                               build_eo_tla_adiabatic(sys, EoTlaForm::quadrature)),
              1e-8);
  }
}

TEST(EoTlaAdiabatic, ZeroChiIsNoFeedback) {
  const SystemParams sys = params(0.5, 0.0, 10);
  EXPECT_LE(superop_distance(build_eo_tla_adiabatic(sys, EoTlaForm::closed), build_no_feedback(sys)), 1e-15);
  EXPECT_LE(superop_distance(build_eo_tla_adiabatic(sys, EoTlaForm::quadrature), build_no_feedback(sys)), 1e-12);
}

TEST(EoModeAdiabatic, DiffusionTermProperties) {
  const SystemParams sys = params(0.97, PI / 2, 12);
  const SpaceSpec s = system_space(sys);
  const SuperOp diff = dissipator(feedback_operator(s, sys.chi));
  std::mt19937_64 rng(8);
  const DenseMat n = number(s).dense();
  for (int rep = 0; rep < 5; ++rep) {
    const DenseMat rho = oracle::random_density(13, rng);
    const DenseMat out = diff.apply(rho);
    EXPECT_LT(std::abs(out.trace()), 1e-12);
    EXPECT_LT(std::abs((n * out).trace()), 1e-10);
  }
  AncillaParams huge;
  huge.epsilon = 1e9;
  huge.gamma = 1.0;
  EXPECT_LT(superop_distance(build_eo_mode_adiabatic(sys, huge), build_simple_feedback(sys)), 1e-12);
  AncillaParams none;
  EXPECT_THROW(build_eo_mode_adiabatic(sys, none), ContractViolation);
}

TEST(EoModeAdiabatic, CloseToSimpleFeedback) {
  const SystemParams sys = params(2.2, PI / 2, 35);
  const DensityMatrix a = steady_state(build_eo_mode_adiabatic(sys, eo_mode_linked(10.0, sys.chi, 0.001))).state;
  const DensityMatrix b = steady_state(build_simple_feedback(sys)).state;
  EXPECT_LE(bures(a, b), 0.05);
}

TEST(EoModeTransformed, DescriptorShape) {
  const SystemParams sys = params(1.0, PI / 2, 6);
  const AncillaParams anc = eo_mode_linked(10.0, sys.chi, 0.001, 4);
  const GeneratorDescriptor d = build_eo_mode_compound_transformed(sys, anc);
  EXPECT_EQ(d.kind, GeneratorDescriptor::Kind::time_dependent);
  ASSERT_EQ(d.channels.size(), 2u);
  EXPECT_TRUE(d.channels[0].increments_filter);
  EXPECT_FALSE(d.channels[1].increments_filter);
  EXPECT_DOUBLE_EQ(d.channels[0].rate, 1.0);
  EXPECT_DOUBLE_EQ(d.channels[1].rate, 10.0);
  EXPECT_DOUBLE_EQ(d.filter_decay, 5.0);
  ASSERT_TRUE(d.filter_hamiltonian.has_value());
  // f-scaled piece: (g eps / 2) a^dag a, so a unit of f over 2/Gamma adds phase chi per photon
  EXPECT_NEAR(d.filter_hamiltonian->matrix().coeff(4, 4).real() * 2.0 / anc.gamma, sys.chi, 1e-12);
  expect_valid_generator(d.base, "eo-mode base");
  AncillaParams off = anc;
  off.epsilon = 0.0;
  EXPECT_EQ(build_eo_mode_compound_transformed(sys, off).kind, GeneratorDescriptor::Kind::static_superop);
}

TEST(EoModeTransformed, DecoupledSystemFollowsDampedOscillator) {
  const SystemParams sys = params(0.8, PI / 2, 6);
  AncillaParams anc = eo_mode_linked(4.0, sys.chi, 0.001, 3);
  anc.g = 0.0;
  const GeneratorDescriptor d = build_eo_mode_compound_transformed(sys, anc);
  EXPECT_FALSE(d.filter_hamiltonian.has_value());
  DenseMat rho0 = DenseMat::Zero(21, 21);
  rho0(0, 0) = 1.0;
  const DenseMat full = oracle::propagate(d.base, rho0, 1.5);
  DenseMat sys0 = DenseMat::Zero(7, 7);
  sys0(0, 0) = 1.0;
  const DenseMat plain = oracle::propagate(build_no_feedback(sys), sys0, 1.5);
  EXPECT_LT(max_abs(DenseMat(partial_trace_matrix(d.space, full, 0) - plain)), 1e-10);
}

TEST(AoCompound, DecoupledAncilla) {
  const SystemParams sys = params(0.5, PI / 2, 10);
  const DensityMatrix ref = steady_state(build_no_feedback(sys)).state;
  for (AncillaKind k : {AncillaKind::two_level, AncillaKind::mode}) {
    AncillaParams anc;
    anc.gamma = 50.0;
    anc.g = 0.0;
    anc.ancilla_dim = 4;
    EXPECT_LE(bures(reduced_steady(build_ao_compound(sys, anc, k)), ref), 1e-8);
  }
}

TEST(AoAdiabatic, RationalEqualsArctan) {
  const SystemParams sys = params(0.97, PI / 2, 9);
  EXPECT_LE(superop_distance(build_ao_adiabatic(sys, AoForm::rational), build_ao_adiabatic(sys, AoForm::arctan)), 1e-10);
  const SystemParams zero = params(0.97, 0.0, 9);
  EXPECT_LE(superop_distance(build_ao_adiabatic(zero), build_no_feedback(zero)), 1e-15);
}

TEST(AoAdiabatic, ThirdOrderAgainstSimple) {
  auto simple = [](double chi) { return build_simple_feedback(params(0.5, chi, 10)); };
  auto ao = [](double chi) { return build_ao_adiabatic(params(0.5, chi, 10)); };
  EXPECT_NEAR(expansion_order_probe(simple, ao, {0.1, 0.05, 0.025}).fitted_power, 3.0, 0.1);
}

TEST(Kerr, Properties) {
  const SystemParams zero = params(0.97, 0.0, 12);
  EXPECT_EQ(superop_distance(build_kerr(zero), build_no_feedback(zero)), 0.0);
  const double chi = PI / 2;
  EXPECT_GT(superop_distance(build_kerr(params(0.97, chi, 12)), build_kerr(params(0.97, chi + 2 * PI, 12))), 0.1);
  const SpaceSpec s = SpaceSpec::fock(12);
  const DenseMat hk = kerr_hamiltonian(s, chi).dense(), n = number(s).dense();
  EXPECT_LT(max_abs(DenseMat(hk * n - n * hk)), 1e-12);
}

TEST(JaynesCummings, ZeroCouplingAndContract) {
  const SystemParams sys = params(0.5, 0.0, 10);
  AncillaParams anc;
  anc.gamma = 4.0;
  anc.g = 0.0;
  anc.detuning = 30.0;
  const DensityMatrix ref = steady_state(build_no_feedback(sys)).state;
  EXPECT_LE(bures(reduced_steady(build_jc_compound_interaction(sys, anc)), ref), 1e-8);
  EXPECT_LE(superop_distance(build_jc_adiabatic(sys, anc), build_no_feedback(sys)), 1e-15);
  anc.detuning = 0.0;
  EXPECT_THROW(build_jc_compound_interaction(sys, anc), ContractViolation);
  EXPECT_THROW(build_jc_adiabatic(sys, anc), ContractViolation);
}

TEST(JaynesCummings, HierarchyWarnings) {
  EXPECT_TRUE(jc_hierarchy_warnings(jc_linked(4.0, PI / 2, 4000.0)).empty());
  AncillaParams bad;
  bad.gamma = 4.0;
  bad.g = 5.0;
  bad.detuning = 6.0;
  EXPECT_EQ(jc_hierarchy_warnings(bad).size(), 2u);
}

TEST(JaynesCummings, ExtraTermScaling) {
  const SystemParams sys = params(0.97, PI / 2, 10);
  // fixed g: Gamma g^2 / Delta^2 and g^4 / Delta^3
  AncillaParams a1, a2;
  a1.gamma = a2.gamma = 4.0;
  a1.g = a2.g = 10.0;
  a1.detuning = 100.0;
  a2.detuning = 200.0;
  const double delta_ratio = jc_big_delta(a2) / jc_big_delta(a1);
  const JcExtraTerms e1 = jc_extra_terms(sys, a1), e2 = jc_extra_terms(sys, a2);
  const double p_damp = std::log(max_abs(e1.damping.matrix()) / max_abs(e2.damping.matrix())) / std::log(delta_ratio);
  const double p_kerr = std::log(max_abs(e1.kerr.matrix()) / max_abs(e2.kerr.matrix())) / std::log(delta_ratio);
  EXPECT_NEAR(p_damp, 2.0, 1e-9);
  EXPECT_NEAR(p_kerr, 3.0, 1e-9);
  // fixed effective strength: g^2 grows with Delta, both terms fall as 1/Delta
  const JcExtraTerms f1 = jc_extra_terms(sys, jc_linked(4.0, PI / 2, 100.0));
  const JcExtraTerms f2 = jc_extra_terms(sys, jc_linked(4.0, PI / 2, 400.0));
  EXPECT_NEAR(max_abs(f1.damping.matrix()) / max_abs(f2.damping.matrix()), 4.0, 1e-9);
  EXPECT_NEAR(max_abs(f1.kerr.matrix()) / max_abs(f2.kerr.matrix()), 4.0, 1e-9);
}

TEST(JaynesCummings, AdiabaticConvergesToEoTla) {
  const SystemParams sys = params(0.97, PI / 2, 10);
  const SuperOp eo = build_eo_tla_adiabatic(sys);
  double prev = 1e300;
  for (double delta : {100.0, 400.0, 1600.0}) {
    const double d = superop_distance(build_jc_adiabatic(sys, jc_linked(4.0, PI / 2, delta)), eo);
    EXPECT_LT(d, prev);
    prev = d;
  }
}

TEST(Catalog, AllGeneratorsValidAndVacuumAtZeroDrive) {
  const SystemParams sys = params(0.0, PI / 2, 6);
  AncillaParams jc = jc_linked(4.0, PI / 2, 100.0);
  const std::vector<std::pair<std::string, SuperOp>> gens = {
      {"none", build_no_feedback(sys)},
      {"simple", build_simple_feedback(sys)},
      {"eo_tla_compound", build_eo_tla_compound(sys, eo_tla_linked(5.0, sys.chi, 2.0))},
      {"eo_tla_adiabatic", build_eo_tla_adiabatic(sys)},
      {"eo_tla_quadrature", build_eo_tla_adiabatic(sys, EoTlaForm::quadrature)},
      {"eo_mode_adiabatic", build_eo_mode_adiabatic(sys, eo_mode_linked(10.0, sys.chi, 0.001))},
      {"ao_tla", build_ao_compound(sys, ao_linked(5.0, sys.chi), AncillaKind::two_level)},
      {"ao_mode", build_ao_compound(sys, ao_linked(5.0, sys.chi, 4), AncillaKind::mode)},
      {"ao_rational", build_ao_adiabatic(sys)},
      {"ao_arctan", build_ao_adiabatic(sys, AoForm::arctan)},
      {"kerr", build_kerr(sys)},
      {"jc_compound", build_jc_compound_interaction(sys, jc)},
      {"jc_adiabatic", build_jc_adiabatic(sys, jc)},
  };
  for (const auto& [name, l] : gens) {
    expect_valid_generator(l, name);
    const DensityMatrix red = reduced_steady(l);
    EXPECT_NEAR(red.matrix()(0, 0).real(), 1.0, 1e-9) << name;
  }
}

TEST(Catalog, EveryAdiabaticFormAgreesWithSimpleAtFirstOrder) {
  auto make = [](auto builder) {
    return [builder](double chi) { return builder(params(0.5, chi, 8)); };
  };
  auto simple = make([](const SystemParams& s) { return build_simple_feedback(s); });
  const std::vector<std::pair<std::string, std::function<SuperOp(double)>>> others = {
      {"eo_tla", make([](const SystemParams& s) { return build_eo_tla_adiabatic(s); })},
      {"ao", make([](const SystemParams& s) { return build_ao_adiabatic(s); })},
      {"eo_mode", make([](const SystemParams& s) { return build_eo_mode_adiabatic(s, eo_mode_linked(10.0, s.chi, 0.001)); })},
  };
  for (const auto& [name, f] : others)
    EXPECT_GE(expansion_order_probe(simple, f, {0.1, 0.05, 0.025}).fitted_power, 1.9) << name;
}
