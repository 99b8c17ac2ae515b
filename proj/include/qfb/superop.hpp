#pragma once

// Superoperators on column-stacked density matrices:
//   vec(A rho B) = (B^T (x) A) vec(rho),   vec index of rho(i, j) is i + d*j.
//
// Naming follows the usual feedback literature:
//   C[A]B = -i[A, B],   J[A]B = A B A^dag,   A[A]B = {A^dag A, B}/2,   D = J - A.

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qfb/density.hpp"
#include "qfb/fock.hpp"
#include "qfb/quadrature.hpp"

namespace qfb {

class SuperOp {
 public:
  SuperOp() = default;

  SuperOp(SpaceSpec space, SparseMat matrix, std::optional<bool> tp_hint = std::nullopt)
      : space_(std::move(space)), matrix_(std::move(matrix)), tp_(tp_hint) {
    const long d2 = static_cast<long>(space_.total_dim()) * space_.total_dim();
    if (matrix_.rows() != d2 || matrix_.cols() != d2) throw SpaceMismatch("superoperator dimension");
    matrix_.makeCompressed();
    if (tp_ && *tp_) {
      const double scale = std::max(max_abs(matrix_), 1.0);
      const double defect = trace_defect();
      if (defect > 1e-10 * scale)
        throw ContractViolation("superoperator flagged trace-preserving has trace defect " + std::to_string(defect));
    }
  }

  const SpaceSpec& space() const { return space_; }
  const SparseMat& matrix() const { return matrix_; }
  int dim() const { return space_.total_dim(); }
  std::optional<bool> tp_hint() const { return tp_; }

  /// max_j |sum_i L(i + d i, j)|: how far vec(1)^dag L is from zero.
  double trace_defect() const {
    const int d = dim();
    Eigen::VectorXcd row = Eigen::VectorXcd::Zero(matrix_.cols());
    for (int j = 0; j < matrix_.outerSize(); ++j)
      for (SparseMat::InnerIterator it(matrix_, j); it; ++it)
        if (it.row() % (d + 1) == 0) row(j) += it.value();
    return row.size() ? row.cwiseAbs().maxCoeff() : 0.0;
  }

  DenseMat apply(const DenseMat& rho) const {
    const int d = dim();
    if (rho.rows() != d || rho.cols() != d) throw SpaceMismatch("superoperator apply");
    const Eigen::Map<const Vec> v(rho.data(), static_cast<long>(d) * d);
    Vec out = matrix_ * v;
    return Eigen::Map<DenseMat>(out.data(), d, d);
  }

  friend SuperOp operator+(const SuperOp& a, const SuperOp& b) {
    require_same_space(a.space_, b.space_, "superop +");
    return SuperOp(a.space_, SparseMat(a.matrix_ + b.matrix_), both_tp(a, b));
  }
  friend SuperOp operator-(const SuperOp& a, const SuperOp& b) {
    require_same_space(a.space_, b.space_, "superop -");
    return SuperOp(a.space_, SparseMat(a.matrix_ - b.matrix_), both_tp(a, b));
  }
  friend SuperOp operator*(cplx s, const SuperOp& a) {
    return SuperOp(a.space_, SparseMat(s * a.matrix_), a.tp_);
  }
  friend SuperOp operator*(double s, const SuperOp& a) { return cplx(s) * a; }
  /// Composition (a after b).
  friend SuperOp operator*(const SuperOp& a, const SuperOp& b) {
    require_same_space(a.space_, b.space_, "superop compose");
    return SuperOp(a.space_, SparseMat(a.matrix_ * b.matrix_));
  }

  SuperOp with_tp_hint(bool tp) const { return SuperOp(space_, matrix_, tp); }

 private:
  static std::optional<bool> both_tp(const SuperOp& a, const SuperOp& b) {
    if (a.tp_ && b.tp_ && *a.tp_ && *b.tp_) return true;
    return std::nullopt;
  }

  SpaceSpec space_;
  SparseMat matrix_;
  std::optional<bool> tp_;
};

inline Vec vec(const DenseMat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

inline DenseMat unvec(const Vec& v, int d) { return Eigen::Map<const DenseMat>(v.data(), d, d); }

inline SuperOp zero_superop(const SpaceSpec& space) {
  const long d2 = static_cast<long>(space.total_dim()) * space.total_dim();
  return SuperOp(space, SparseMat(d2, d2), true);
}

/// rho -> A rho
inline SuperOp spre(const Operator& a) {
  return SuperOp(a.space(), detail::kron(sparse_identity(a.dim()), a.matrix()));
}

/// rho -> rho B
inline SuperOp spost(const Operator& b) {
  return SuperOp(b.space(), detail::kron(SparseMat(b.matrix().transpose()), sparse_identity(b.dim())));
}

/// C[H] rho = -i[H, rho].  Hermiticity of H is the caller's business.
inline SuperOp commutator(const Operator& h) {
  SparseMat m = cplx(0.0, -1.0) * (spre(h).matrix() - spost(h).matrix());
  return SuperOp(h.space(), m, true);
}

/// J[c] rho = c rho c^dag
inline SuperOp sandwich(const Operator& c) {
  return SuperOp(c.space(), detail::kron(SparseMat(c.matrix().conjugate()), c.matrix()));
}

/// A[c] rho = {c^dag c, rho} / 2
inline SuperOp anticomm(const Operator& c) {
  const Operator cdc = c.adjoint() * c;
  return SuperOp(c.space(), SparseMat(0.5 * (spre(cdc).matrix() + spost(cdc).matrix())));
}

/// D[c] = J[c] - A[c]
inline SuperOp dissipator(const Operator& c) {
  return SuperOp(c.space(), SparseMat(sandwich(c).matrix() - anticomm(c).matrix()), true);
}

/// Cascaded coupling from the channel c into x:
///   W -> sqrt(rate) ([c W, x^dag] + [x, W c^dag]).
inline SuperOp cascade_term(const Operator& c, const Operator& x, double rate) {
  require_same_space(c.space(), x.space(), "cascade_term");
  if (rate < 0.0) throw ContractViolation("cascade_term: negative rate");
  if (rate == 0.0) return zero_superop(c.space());
  const Operator xd = x.adjoint();
  const Operator cd = c.adjoint();
  SparseMat m = spre(c).matrix() * spost(xd).matrix();
  m -= spre(xd * c).matrix();
  m += SparseMat(spre(x).matrix() * spost(cd).matrix());
  m -= spost(cd * x).matrix();
  return SuperOp(c.space(), SparseMat(std::sqrt(rate) * m));
}

/// max-abs entrywise difference of the two matrices.
inline double superop_distance(const SuperOp& a, const SuperOp& b) {
  require_same_space(a.space(), b.space(), "superop_distance");
  return max_abs(SparseMat(a.matrix() - b.matrix()));
}

/// Elementwise map sigma -> V (w o (V^dag sigma V)) V^dag with weights
/// w(a, b) = weight(z_a, z_b) in the eigenbasis of Z.
inline SuperOp eigenbasis_elementwise(const SpaceSpec& space, const HermitianEigen& eig,
                                      const std::function<cplx(double, double)>& weight) {
  const int d = static_cast<int>(eig.values.size());
  const long d2 = static_cast<long>(d) * d;
  std::vector<Triplet> trips;
  if (eig.diagonal) {
    for (int b = 0; b < d; ++b)
      for (int a = 0; a < d; ++a) {
        const cplx w = weight(eig.values(a), eig.values(b));
        if (w != cplx(0.0)) trips.emplace_back(a + d * b, a + d * b, w);
      }
  } else {
    DenseMat wmat(d, d);
    for (int b = 0; b < d; ++b)
      for (int a = 0; a < d; ++a) wmat(a, b) = weight(eig.values(a), eig.values(b));
    const DenseMat& v = eig.vectors;
    const DenseMat vd = v.adjoint();
    for (int l = 0; l < d; ++l)
      for (int k = 0; k < d; ++k) {
        // V^dag E_kl V = (V^dag e_k)(e_l^T V)
        const DenseMat inner = (vd.col(k) * v.row(l)).cwiseProduct(wmat);
        const DenseMat image = v * inner * vd;
        const long col = k + static_cast<long>(d) * l;
        for (int j = 0; j < d; ++j)
          for (int i = 0; i < d; ++i)
            if (std::abs(image(i, j)) > 1e-15) trips.emplace_back(i + static_cast<long>(d) * j, col, image(i, j));
      }
  }
  SparseMat m(d2, d2);
  m.setFromTriplets(trips.begin(), trips.end());
  return SuperOp(space, m);
}

enum class ResolventForm { eo_tla, ao };

/// Feedback piece of the adiabatic generators.
///   eo_tla: C[Z] (1 - C[Z])^{-1} J[c] = ((1 - C[Z])^{-1} - 1) J[c]
///   ao:     C[Z] J[(1 + iZ/2)^{-1} c]
inline SuperOp resolvent_feedback(const Operator& z, const Operator& c, ResolventForm form) {
  require_same_space(z.space(), c.space(), "resolvent_feedback");
  require_hermitian(z, "resolvent_feedback");
  const HermitianEigen eig = hermitian_eigen(z);
  if (form == ResolventForm::eo_tla) {
    const SuperOp resolvent_minus_one = eigenbasis_elementwise(z.space(), eig, [](double za, double zb) {
      const cplx denom(1.0, za - zb);
      if (std::abs(denom) < 1.0) throw ContractViolation("resolvent denominator below 1");
      return 1.0 / denom - 1.0;
    });
    return resolvent_minus_one * sandwich(c);
  }
  const Operator inv = apply_function(z.space(), eig, ScalarFunction::custom("inv_1_plus_iz_half", [](double x) {
                                        return 1.0 / cplx(1.0, 0.5 * x);
                                      }));
  return commutator(z) * sandwich(inv * c);
}

/// Closed-form and expanded feedback generators for system Hamiltonian H,
/// measured channel c and feedback operator Z.
enum class GeneratorForm {
  simple,                  // C[H] + D[e^{-iZ} c]
  simple_third_order,      // C[H] + D[c] + (C + C^2/2 + C^3/6) J[c]
  eo_tla_closed,           // C[H] + D[c] + C(1-C)^{-1} J[c]
  eo_tla_quadrature,       // C[H] + int_0^inf dq e^{-q} D[e^{-iqZ} c]
  eo_tla_third_order,      // C[H] + D[c] + (C + C^2 + C^3) J[c]
  ao_rational,             // C[H] + D[c] + C J[(1 + iZ/2)^{-1} c]
  ao_arctan,               // C[H] + D[exp(-2i arctan(Z/2)) c]
  ao_third_order,          // C[H] + D[c] + (C + C^2/2 + C(J[Z] - 2A[Z])/4) J[c]
};

inline std::string to_string(GeneratorForm f) {
  switch (f) {
    case GeneratorForm::simple: return "simple";
    case GeneratorForm::simple_third_order: return "simple_third_order";
    case GeneratorForm::eo_tla_closed: return "eo_tla_closed";
    case GeneratorForm::eo_tla_quadrature: return "eo_tla_quadrature";
    case GeneratorForm::eo_tla_third_order: return "eo_tla_third_order";
    case GeneratorForm::ao_rational: return "ao_rational";
    case GeneratorForm::ao_arctan: return "ao_arctan";
    case GeneratorForm::ao_third_order: return "ao_third_order";
  }
  return "?";
}

/// int_0^inf dq e^{-q} D[e^{-iqZ} c] evaluated node by node on the operator
/// level; used as an independent check of the closed resolvent form.
inline SuperOp quadrature_dissipator(const Operator& z, const Operator& c, const QuadratureRule& rule) {
  const HermitianEigen eig = hermitian_eigen(z);
  const long d2 = static_cast<long>(c.dim()) * c.dim();
  SparseMat acc(d2, d2);
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const Operator u = apply_function(z.space(), eig, ScalarFunction::exp_i_scaled(-rule.nodes[k]));
    acc += SparseMat(cplx(rule.weights[k]) * dissipator(u * c).matrix());
  }
  return SuperOp(z.space(), acc);
}

inline SuperOp feedback_generator(GeneratorForm form, const Operator& h, const Operator& c, const Operator& z) {
  require_same_space(h.space(), c.space(), "feedback_generator");
  require_same_space(h.space(), z.space(), "feedback_generator");
  require_hermitian(z, "feedback_generator");
  const SuperOp ch = commutator(h);
  switch (form) {
    case GeneratorForm::simple: {
      const Operator u = op_function(z, ScalarFunction::exp_i_scaled(-1.0));
      return (ch + dissipator(u * c)).with_tp_hint(true);
    }
    case GeneratorForm::eo_tla_closed:
      return (ch + dissipator(c) + resolvent_feedback(z, c, ResolventForm::eo_tla)).with_tp_hint(true);
    case GeneratorForm::eo_tla_quadrature:
      return (ch + quadrature_dissipator(z, c, exp_weighted_halfline_rule())).with_tp_hint(true);
    case GeneratorForm::ao_rational:
      return (ch + dissipator(c) + resolvent_feedback(z, c, ResolventForm::ao)).with_tp_hint(true);
    case GeneratorForm::ao_arctan: {
      const Operator u = op_function(z, ScalarFunction::custom("exp_m2i_arctan_half", [](double x) {
                                       return std::exp(cplx(0.0, -2.0 * std::atan(0.5 * x)));
                                     }, true));
      return (ch + dissipator(u * c)).with_tp_hint(true);
    }
    case GeneratorForm::simple_third_order:
    case GeneratorForm::eo_tla_third_order:
    case GeneratorForm::ao_third_order: {
      const SuperOp cz = commutator(z);
      const SuperOp cz2 = cz * cz;
      SuperOp series = cz;
      if (form == GeneratorForm::simple_third_order) {
        series = series + 0.5 * cz2 + (1.0 / 6.0) * (cz2 * cz);
      } else if (form == GeneratorForm::eo_tla_third_order) {
        series = series + cz2 + cz2 * cz;
      } else {
        series = series + 0.5 * cz2 + 0.25 * (cz * (sandwich(z) - 2.0 * anticomm(z)));
      }
      return (ch + dissipator(c) + series * sandwich(c)).with_tp_hint(true);
    }
  }
  throw ContractViolation("unknown generator form");
}

struct ProbeReport {
  std::vector<double> chis;
  std::vector<double> distances;
  std::vector<double> exponents;  // log(d_i / d_{i+1}) / log(chi_i / chi_{i+1})
  double fitted_power = 0.0;      // exponent of the smallest pair
};

/// Scaling of ||L1(chi) - L2(chi)|| (max-abs) as chi decreases.
inline ProbeReport expansion_order_probe(const std::function<SuperOp(double)>& first,
                                         const std::function<SuperOp(double)>& second,
                                         const std::vector<double>& chis) {
  if (chis.size() < 3) throw ContractViolation("expansion_order_probe needs at least 3 chi values");
  for (std::size_t i = 1; i < chis.size(); ++i)
    if (!(chis[i] < chis[i - 1]) || chis[i] <= 0.0)
      throw ContractViolation("expansion_order_probe: chi values must be positive and decreasing");
  ProbeReport rep;
  rep.chis = chis;
  for (double chi : chis) rep.distances.push_back(superop_distance(first(chi), second(chi)));
  for (std::size_t i = 0; i + 1 < chis.size(); ++i) {
    const double a = rep.distances[i];
    const double b = rep.distances[i + 1];
    rep.exponents.push_back((a == 0.0 && b == 0.0) ? 0.0 : std::log(a / b) / std::log(chis[i] / chis[i + 1]));
  }
  rep.fitted_power = rep.exponents.back();
  return rep;
}

inline ProbeReport expansion_order_probe(GeneratorForm first, GeneratorForm second, const Operator& z_base,
                                         const Operator& c, const Operator& h, const std::vector<double>& chis) {
  return expansion_order_probe([&](double chi) { return feedback_generator(first, h, c, chi * z_base); },
                               [&](double chi) { return feedback_generator(second, h, c, chi * z_base); }, chis);
}

/// max over random Hermitian inputs of |L(rho)^dag - L(rho)| / max(1, |L|).
inline double hermiticity_defect(const SuperOp& l, int samples = 6, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  const int d = l.dim();
  double worst = 0.0;
  const double scale = std::max(1.0, max_abs(l.matrix()));
  for (int s = 0; s < samples; ++s) {
    DenseMat m(d, d);
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) m(i, j) = cplx(gauss(rng), gauss(rng));
    const DenseMat h = 0.5 * (m + m.adjoint());
    const DenseMat out = l.apply(h);
    worst = std::max(worst, max_abs(DenseMat(out - out.adjoint())) / scale);
  }
  return worst;
}

}  // namespace qfb
