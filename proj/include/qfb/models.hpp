#pragma once

// Master-equation builders for the degenerate parametric oscillator
//   H_s = -(i lambda / 4) (a^2 - a^dag^2),   c = a,   Z = chi a^dag a,
// with unit system damping, under direct feedback and under feedback routed
// through a two-level or bosonic ancilla.  Compound spaces are ordered
// (system, ancilla).

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qfb/superop.hpp"

namespace qfb {

struct SystemParams {
  double lambda = 0.0;  // two-photon drive strength
  double chi = 0.0;     // feedback phase per photon
  int n_max = 20;       // highest retained photon number

  void validate() const {
    if (n_max < 2) throw ContractViolation("n_max must be >= 2");
    if (!(lambda >= 0.0)) throw ContractViolation("lambda must be >= 0");
    if (!std::isfinite(chi)) throw ContractViolation("chi must be finite");
  }
  int dim() const { return n_max + 1; }
};

struct AncillaParams {
  double gamma = 1.0;    // ancilla damping rate
  double g = 0.0;        // coupling rate, meaning depends on the scheme
  double epsilon = 0.0;  // feedback drive amplitude (electro-optic mode only)
  int ancilla_dim = 8;   // Fock truncation for mode ancillas
  double detuning = 0.0; // atom detuning delta

  void validate(bool mode_ancilla) const {
    if (!(gamma > 0.0)) throw ContractViolation("ancilla damping gamma must be > 0");
    if (mode_ancilla && ancilla_dim < 2) throw ContractViolation("ancilla_dim must be >= 2");
    if (!std::isfinite(g) || !std::isfinite(epsilon) || !std::isfinite(detuning))
      throw ContractViolation("ancilla parameters must be finite");
  }
};

enum class AncillaKind { two_level, mode };

// Parameter linkages that make each scheme comparable to simple feedback with
// Z = chi a^dag a.

/// Electro-optic via atom: K = Gamma Z, i.e. g = Gamma chi.
inline AncillaParams eo_tla_linked(double gamma, double chi, double detuning = 0.0) {
  AncillaParams p;
  p.gamma = gamma;
  p.g = gamma * chi;
  p.detuning = detuning;
  return p;
}

/// All-optical: Z = 4K / Gamma, i.e. g = Gamma chi / 4.
inline AncillaParams ao_linked(double gamma, double chi, int ancilla_dim = 8) {
  AncillaParams p;
  p.gamma = gamma;
  p.g = gamma * chi / 4.0;
  p.ancilla_dim = ancilla_dim;
  return p;
}

/// Electro-optic via mode: Z = eps K / Gamma with the double-commutator
/// coefficient Gamma / (2 eps^2) fixed to `diffusion`.
inline AncillaParams eo_mode_linked(double gamma, double chi, double diffusion, int ancilla_dim = 8) {
  if (!(diffusion > 0.0)) throw ContractViolation("eo-mode diffusion setting must be > 0");
  AncillaParams p;
  p.gamma = gamma;
  p.epsilon = std::sqrt(gamma / (2.0 * diffusion));
  p.g = gamma * chi / p.epsilon;
  p.ancilla_dim = ancilla_dim;
  return p;
}

/// Jaynes-Cummings coupling with effective feedback strength
/// 2 g^2 / (Gamma Delta) = chi_eff, Delta = delta + g^2 / delta.
inline AncillaParams jc_linked(double gamma, double chi_eff, double big_delta) {
  const double g2 = 0.5 * chi_eff * gamma * big_delta;
  const double disc = big_delta * big_delta - 4.0 * g2;
  if (disc < 0.0) throw ContractViolation("jc_linked: Delta must be at least 2 chi_eff Gamma");
  AncillaParams p;
  p.gamma = gamma;
  p.g = std::sqrt(g2);
  p.detuning = 0.5 * (big_delta + std::sqrt(disc));
  return p;
}

inline double jc_big_delta(const AncillaParams& anc) {
  if (anc.detuning == 0.0) throw ContractViolation("Jaynes-Cummings model needs detuning delta != 0");
  return anc.detuning + anc.g * anc.g / anc.detuning;
}

inline double jc_effective_chi(const AncillaParams& anc) {
  return 2.0 * anc.g * anc.g / (anc.gamma * jc_big_delta(anc));
}

/// Warnings when the delta >> g >> Gamma ordering is not respected (factor 3).
inline std::vector<std::string> jc_hierarchy_warnings(const AncillaParams& anc) {
  std::vector<std::string> out;
  if (std::abs(anc.detuning) < 3.0 * std::abs(anc.g)) out.emplace_back("delta is not >> g");
  if (std::abs(anc.g) < 3.0 * anc.gamma) out.emplace_back("g is not >> Gamma");
  return out;
}

inline SpaceSpec system_space(const SystemParams& sys) { return SpaceSpec::fock(sys.dim()); }

/// -(i lambda / 4) (a^2 - a^dag^2) on the system factor.
inline Operator parametric_hamiltonian(const SpaceSpec& space, double lambda) {
  const Operator a = annihilation(space, 0);
  const Operator ad = a.adjoint();
  const Operator h = cplx(0.0, -lambda / 4.0) * (a * a - ad * ad);
  return Operator(space, h.matrix(), true);
}

inline Operator feedback_operator(const SpaceSpec& space, double chi) { return chi * number(space, 0); }

inline Operator kerr_hamiltonian(const SpaceSpec& space, double chi) {
  const Operator a = annihilation(space, 0);
  const Operator ad = a.adjoint();
  return Operator(space, (0.5 * chi * (ad * ad * a * a)).matrix(), true);
}

inline SuperOp build_no_feedback(const SystemParams& sys) {
  sys.validate();
  const SpaceSpec s = system_space(sys);
  return (commutator(parametric_hamiltonian(s, sys.lambda)) + dissipator(annihilation(s))).with_tp_hint(true);
}

inline SuperOp build_simple_feedback(const SystemParams& sys) {
  sys.validate();
  const SpaceSpec s = system_space(sys);
  return feedback_generator(GeneratorForm::simple, parametric_hamiltonian(s, sys.lambda), annihilation(s),
                            feedback_operator(s, sys.chi));
}

/// exp(-i (pi/2) sigma_x) on the ancilla factor, via the spectral route.
inline Operator atom_flip(const SpaceSpec& space) {
  const Operator half_pi_sx = (PI / 2.0) * pauli(space, 1, Pauli::x);
  return op_function(Operator(space, half_pi_sx.matrix(), true), ScalarFunction::exp_i_scaled(-1.0), false);
}

namespace detail {

inline Operator lift_system(const SpaceSpec& compound, const Operator& sys_op) {
  return tensor_embed(compound, {{0, sys_op}});
}

}  // namespace detail

/// Electro-optic feedback onto a two-level atom, full compound generator:
///   -i[H_s + g s^dag s a^dag a + delta s^dag s, W] + D[e^{-i pi sx / 2} a] W + Gamma D[s] W.
inline SuperOp build_eo_tla_compound(const SystemParams& sys, const AncillaParams& anc) {
  sys.validate();
  anc.validate(false);
  const SpaceSpec w = SpaceSpec::fock_tla(sys.dim());
  const Operator a = annihilation(w, 0);
  const Operator s = pauli(w, 1, Pauli::lower);
  const Operator excited = s.adjoint() * s;
  const Operator hs = detail::lift_system(w, parametric_hamiltonian(system_space(sys), sys.lambda));
  const Operator h = Operator(w, (hs + anc.g * (excited * number(w, 0)) + anc.detuning * excited).matrix(), true);
  return (commutator(h) + dissipator(atom_flip(w) * a) + anc.gamma * dissipator(s)).with_tp_hint(true);
}

enum class EoTlaForm { closed, quadrature };

inline SuperOp build_eo_tla_adiabatic(const SystemParams& sys, EoTlaForm form = EoTlaForm::closed) {
  sys.validate();
  const SpaceSpec s = system_space(sys);
  return feedback_generator(form == EoTlaForm::closed ? GeneratorForm::eo_tla_closed : GeneratorForm::eo_tla_quadrature,
                            parametric_hamiltonian(s, sys.lambda), annihilation(s), feedback_operator(s, sys.chi));
}

/// Coefficient Gamma / eps^2 of the phase-diffusion term D[Z].
inline double eo_mode_diffusion_coefficient(const AncillaParams& anc) {
  if (!(anc.epsilon > 0.0)) throw ContractViolation("eo-mode scheme requires epsilon > 0");
  return anc.gamma / (anc.epsilon * anc.epsilon);
}

/// -i[H_s, rho] + D[e^{-iZ} a] rho + (Gamma / eps^2) D[Z] rho
inline SuperOp build_eo_mode_adiabatic(const SystemParams& sys, const AncillaParams& anc) {
  anc.validate(true);
  const SpaceSpec s = system_space(sys);
  return (build_simple_feedback(sys) + eo_mode_diffusion_coefficient(anc) * dissipator(feedback_operator(s, sys.chi)))
      .with_tp_hint(true);
}

struct JumpChannel {
  std::string name;
  Operator op;
  double rate = 1.0;
  bool increments_filter = false;
};

/// Either a static generator, or the displaced-frame electro-optic mode model
///   H(t) = H0 + f(t) H_f,  f -> f + 1 on each detection of the filter
///   channel, df/dt = -filter_decay f between detections.
struct GeneratorDescriptor {
  enum class Kind { static_superop, time_dependent };
  Kind kind = Kind::static_superop;
  SpaceSpec space;
  SuperOp base;  // generator with f = 0
  Operator hamiltonian;
  std::optional<Operator> filter_hamiltonian;
  std::vector<JumpChannel> channels;
  double filter_decay = 0.0;
};

inline SuperOp lindblad_generator(const Operator& h, const std::vector<JumpChannel>& channels) {
  SuperOp l = commutator(h);
  for (const auto& ch : channels) l = l + ch.rate * dissipator(ch.op);
  return l.with_tp_hint(true);
}

inline GeneratorDescriptor static_descriptor(const Operator& h, std::vector<JumpChannel> channels) {
  GeneratorDescriptor d;
  d.kind = GeneratorDescriptor::Kind::static_superop;
  d.space = h.space();
  d.hamiltonian = h;
  d.channels = std::move(channels);
  d.base = lindblad_generator(h, d.channels);
  return d;
}

/// Electro-optic feedback onto a mode, in the frame displaced by the classical
/// feedback amplitude eps f(t)/2:
///   H(t) = H_s + (g/2) a^dag a (b + b^dag + eps f(t)),   D[a], Gamma D[b],
/// with f incremented by each system detection and decaying at Gamma / 2.
inline GeneratorDescriptor build_eo_mode_compound_transformed(const SystemParams& sys, const AncillaParams& anc) {
  sys.validate();
  anc.validate(true);
  const SpaceSpec w = SpaceSpec::fock_fock(sys.dim(), anc.ancilla_dim);
  const Operator a = annihilation(w, 0);
  const Operator b = annihilation(w, 1);
  const Operator n = number(w, 0);
  const Operator hs = detail::lift_system(w, parametric_hamiltonian(system_space(sys), sys.lambda));
  const Operator h0(w, (hs + (0.5 * anc.g) * (n * (b + b.adjoint()))).matrix(), true);
  GeneratorDescriptor d;
  d.space = w;
  d.hamiltonian = h0;
  d.channels = {{"system", a, 1.0, true}, {"ancilla", b, anc.gamma, false}};
  d.base = lindblad_generator(h0, d.channels);
  d.filter_decay = anc.gamma / 2.0;
  if (anc.epsilon != 0.0 && anc.g != 0.0) {
    d.kind = GeneratorDescriptor::Kind::time_dependent;
    d.filter_hamiltonian = (0.5 * anc.g * anc.epsilon) * n;
  } else {
    d.kind = GeneratorDescriptor::Kind::static_superop;
  }
  return d;
}

/// All-optical (cascaded) feedback through a two-level atom (x = sigma) or a
/// mode (x = b):  -i[H_s + g a^dag a x^dag x, W] + D[a] + Gamma D[x] + cascade.
inline SuperOp build_ao_compound(const SystemParams& sys, const AncillaParams& anc, AncillaKind kind) {
  sys.validate();
  anc.validate(kind == AncillaKind::mode);
  const SpaceSpec w = kind == AncillaKind::two_level ? SpaceSpec::fock_tla(sys.dim())
                                                     : SpaceSpec::fock_fock(sys.dim(), anc.ancilla_dim);
  const Operator a = annihilation(w, 0);
  const Operator x = kind == AncillaKind::two_level ? pauli(w, 1, Pauli::lower) : annihilation(w, 1);
  const Operator hs = detail::lift_system(w, parametric_hamiltonian(system_space(sys), sys.lambda));
  const Operator h(w, (hs + anc.g * (number(w, 0) * (x.adjoint() * x))).matrix(), true);
  return (commutator(h) + dissipator(a) + anc.gamma * dissipator(x) + cascade_term(a, x, anc.gamma))
      .with_tp_hint(true);
}

enum class AoForm { rational, arctan };

inline SuperOp build_ao_adiabatic(const SystemParams& sys, AoForm form = AoForm::rational) {
  sys.validate();
  const SpaceSpec s = system_space(sys);
  return feedback_generator(form == AoForm::rational ? GeneratorForm::ao_rational : GeneratorForm::ao_arctan,
                            parametric_hamiltonian(s, sys.lambda), annihilation(s), feedback_operator(s, sys.chi));
}

/// Reversible analogue: -i[H_s + (chi/2) a^dag^2 a^2, rho] + D[a] rho.
inline SuperOp build_kerr(const SystemParams& sys) {
  sys.validate();
  const SpaceSpec s = system_space(sys);
  const Operator h(s, (parametric_hamiltonian(s, sys.lambda) + kerr_hamiltonian(s, sys.chi)).matrix(), true);
  return (commutator(h) + dissipator(annihilation(s))).with_tp_hint(true);
}

/// Jaynes-Cummings coupling with detuning, interaction picture w.r.t.
/// -g^2 (a^dag a + s^dag s) / delta (the parametric drive is taken as
/// resonant in that frame):
///   -i[H_s + g^2 (a^dag a + s^dag s)/delta + g (a s^dag + s a^dag) + delta s^dag s, W]
///   + Gamma D[s] W + D[e^{-i pi sx / 2} a] W.
inline SuperOp build_jc_compound_interaction(const SystemParams& sys, const AncillaParams& anc) {
  sys.validate();
  anc.validate(false);
  if (anc.detuning == 0.0) throw ContractViolation("Jaynes-Cummings model needs detuning delta != 0");
  const SpaceSpec w = SpaceSpec::fock_tla(sys.dim());
  const Operator a = annihilation(w, 0);
  const Operator s = pauli(w, 1, Pauli::lower);
  const Operator excited = s.adjoint() * s;
  const Operator hs = detail::lift_system(w, parametric_hamiltonian(system_space(sys), sys.lambda));
  const double shift = anc.g * anc.g / anc.detuning;
  const Operator h(w,
                   (hs + shift * (number(w, 0) + excited) + anc.g * (a * s.adjoint() + s * a.adjoint()) +
                    anc.detuning * excited)
                       .matrix(),
                   true);
  return (commutator(h) + anc.gamma * dissipator(s) + dissipator(atom_flip(w) * a)).with_tp_hint(true);
}

struct JcExtraTerms {
  SuperOp damping;  // (Gamma g^2 / Delta^2) D[a]
  SuperOp kerr;     // -i[g^4 a^dag^2 a^2 / Delta^3, .]
};

inline JcExtraTerms jc_extra_terms(const SystemParams& sys, const AncillaParams& anc) {
  const SpaceSpec s = system_space(sys);
  const double big_delta = jc_big_delta(anc);
  const double g2 = anc.g * anc.g;
  const Operator a = annihilation(s);
  const Operator ad = a.adjoint();
  const Operator k(s, ((g2 * g2 / std::pow(big_delta, 3)) * (ad * ad * a * a)).matrix(), true);
  return {(anc.gamma * g2 / (big_delta * big_delta)) * dissipator(a), commutator(k)};
}

/// C[H_s] + D[a] + (Gamma g^2/Delta^2) D[a] - i[g^4 a^dag^2 a^2 / Delta^3, .]
///   + C[Z](1 - C[Z])^{-1} J[a],   Z = 2 g^2 a^dag a / (Gamma Delta).
inline SuperOp build_jc_adiabatic(const SystemParams& sys, const AncillaParams& anc) {
  sys.validate();
  anc.validate(false);
  SystemParams eff = sys;
  eff.chi = jc_effective_chi(anc);
  const JcExtraTerms extra = jc_extra_terms(sys, anc);
  return (build_eo_tla_adiabatic(eff) + extra.damping + extra.kerr).with_tp_hint(true);
}

}  // namespace qfb
