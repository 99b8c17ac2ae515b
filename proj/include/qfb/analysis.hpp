#pragma once

// Bures distance, Wigner grids and quadrature moments.  Quadratures are
// X1 = a + a^dag and X2 = -i(a - a^dag).

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "qfb/density.hpp"

namespace qfb {

enum class BuresConvention {
  printed,      // sqrt(2) (1 - F)
  conventional  // sqrt(2 (1 - F))
};

struct ComparisonReport {
  double bures = 0.0;
  double trace_term = 0.0;  // Tr sqrt(sqrt(rho1) rho2 sqrt(rho1))
  int clamped_eigenvalues = 0;
  BuresConvention convention = BuresConvention::printed;
};

namespace detail {

inline constexpr double kClampFloor = -1e-10;

inline DenseMat psd_sqrt(const DenseMat& m, int& clamped, const char* what) {
  Eigen::SelfAdjointEigenSolver<DenseMat> es(0.5 * (m + m.adjoint()));
  if (es.info() != Eigen::Success) throw ConvergenceError("eigensolver failed in Bures distance");
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < kClampFloor)
      throw ContractViolation(std::string(what) + " has eigenvalue " + std::to_string(ev(i)));
    if (ev(i) < 0.0) {
      ev(i) = 0.0;
      ++clamped;
    }
    ev(i) = std::sqrt(ev(i));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

inline ComparisonReport bures_distance(const DenseMat& rho1, const DenseMat& rho2,
                                       BuresConvention conv = BuresConvention::printed) {
  if (rho1.rows() != rho2.rows() || rho1.cols() != rho2.cols()) throw SpaceMismatch("bures_distance dimensions");
  ComparisonReport rep;
  rep.convention = conv;
  const DenseMat s1 = detail::psd_sqrt(rho1, rep.clamped_eigenvalues, "first state");
  const DenseMat s2 = detail::psd_sqrt(rho2, rep.clamped_eigenvalues, "second state");
  // Tr sqrt(s1 rho2 s1) is the sum of singular values of s1 s2.
  const Eigen::JacobiSVD<DenseMat> svd(s1 * s2);
  rep.trace_term = svd.singularValues().sum();
  const double gap = std::max(0.0, 1.0 - rep.trace_term);
  rep.bures = conv == BuresConvention::printed ? std::sqrt(2.0) * gap : std::sqrt(2.0 * gap);
  return rep;
}

inline ComparisonReport bures_distance(const DensityMatrix& rho1, const DensityMatrix& rho2,
                                       BuresConvention conv = BuresConvention::printed) {
  require_same_space(rho1.space(), rho2.space(), "bures_distance");
  return bures_distance(rho1.matrix(), rho2.matrix(), conv);
}

struct WignerSpec {
  double x1_min = -10.0, x1_max = 10.0;
  double x2_min = -10.0, x2_max = 10.0;
  int n1 = 201, n2 = 201;
};

struct WignerGrid {
  std::vector<double> x1, x2;
  Eigen::MatrixXd values;  // values(i2, i1) = W(x1[i1], x2[i2])
  double cell_area = 0.0;
  bool support_warning = false;

  double normalization() const { return values.sum() * cell_area; }

  /// max |W(x) - W(-x)| (meaningful on grids symmetric about the origin).
  double reflection_defect() const {
    const long r = values.rows(), c = values.cols();
    double worst = 0.0;
    for (long i = 0; i < r; ++i)
      for (long j = 0; j < c; ++j) worst = std::max(worst, std::abs(values(i, j) - values(r - 1 - i, c - 1 - j)));
    return worst;
  }
};

namespace detail {

inline std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 2) throw ContractViolation("grid needs at least 2 points per axis");
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
  return out;
}

inline void require_single_fock(const SpaceSpec& space, const char* where) {
  if (space.factor_count() != 1 || space.factor(0).kind != FactorKind::fock)
    throw SpaceMismatch(std::string(where) + " needs a single-mode state; reduce compound states first");
}

// Laguerre-type recursion over Fock matrix elements at alpha = (x1 + i x2)/2.
inline double wigner_point(const DenseMat& rho, cplx alpha, std::vector<cplx>& w) {
  const int m_dim = static_cast<int>(rho.rows());
  w.assign(m_dim, cplx(0.0));
  w[0] = std::exp(-2.0 * std::norm(alpha)) / PI;
  double s = rho(0, 0).real() * w[0].real();
  for (int n = 1; n < m_dim; ++n) {
    w[n] = 2.0 * alpha * w[n - 1] / std::sqrt(static_cast<double>(n));
    s += 2.0 * (rho(0, n) * w[n]).real();
  }
  for (int m = 1; m < m_dim; ++m) {
    const double sm = std::sqrt(static_cast<double>(m));
    cplx temp = w[m];
    w[m] = (2.0 * std::conj(alpha) * temp - sm * w[m - 1]) / sm;
    s += (rho(m, m) * w[m]).real();
    for (int n = m + 1; n < m_dim; ++n) {
      const cplx next = (2.0 * alpha * w[n - 1] - sm * temp) / std::sqrt(static_cast<double>(n));
      temp = w[n];
      w[n] = next;
      s += 2.0 * (rho(m, n) * w[n]).real();
    }
  }
  return 0.5 * s;
}

}  // namespace detail

/// W(X1, X2), normalized so that its integral over the quadrature plane is 1.
inline WignerGrid wigner(const DensityMatrix& rho, const WignerSpec& spec = {}) {
  detail::require_single_fock(rho.space(), "wigner");
  WignerGrid g;
  g.x1 = detail::linspace(spec.x1_min, spec.x1_max, spec.n1);
  g.x2 = detail::linspace(spec.x2_min, spec.x2_max, spec.n2);
  g.cell_area = (g.x1[1] - g.x1[0]) * (g.x2[1] - g.x2[0]);
  g.values.resize(spec.n2, spec.n1);
  std::vector<cplx> scratch;
  for (int i2 = 0; i2 < spec.n2; ++i2)
    for (int i1 = 0; i1 < spec.n1; ++i1)
      g.values(i2, i1) = detail::wigner_point(rho.matrix(), cplx(g.x1[i1], g.x2[i2]) / 2.0, scratch);
  const double norm = g.normalization();
  g.support_warning = norm < 0.99 || norm > 1.01;
  return g;
}

struct Moments {
  double n_mean = 0.0;
  double x1_mean = 0.0, x2_mean = 0.0;
  double x1_var = 0.0, x2_var = 0.0;
};

inline Moments moments(const DensityMatrix& rho) {
  detail::require_single_fock(rho.space(), "moments");
  const SpaceSpec& s = rho.space();
  const Operator a = annihilation(s);
  const Operator ad = a.adjoint();
  const Operator x1 = a + ad;
  const Operator x2 = cplx(0.0, -1.0) * (a - ad);
  Moments m;
  m.n_mean = rho.expect(ad * a).real();
  m.x1_mean = rho.expect(x1).real();
  m.x2_mean = rho.expect(x2).real();
  m.x1_var = rho.expect(x1 * x1).real() - m.x1_mean * m.x1_mean;
  m.x2_var = rho.expect(x2 * x2).real() - m.x2_mean * m.x2_mean;
  return m;
}

/// max |rho_nm| over odd |n - m| on a single-mode state.
inline double parity_defect(const DenseMat& rho) {
  double worst = 0.0;
  for (long j = 0; j < rho.cols(); ++j)
    for (long i = 0; i < rho.rows(); ++i)
      if ((i + j) % 2 == 1) worst = std::max(worst, std::abs(rho(i, j)));
  return worst;
}

}  // namespace qfb
