#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qfb/fock.hpp"

namespace qfb {

struct DensityTolerances {
  double hermitian = 1e-10;
  double trace = 1e-10;
  double min_eigenvalue = -1e-8;
};

/// Hermitian, unit-trace, PSD-within-tolerance state.  Small negative
/// eigenvalues are accepted but never clamped in the stored matrix.
class DensityMatrix {
 public:
  DensityMatrix() = default;

  DensityMatrix(SpaceSpec space, DenseMat matrix, const DensityTolerances& tol = {})
      : space_(std::move(space)), matrix_(std::move(matrix)) {
    validate(tol);
  }

  static DensityMatrix pure(const SpaceSpec& space, const Vec& psi) {
    if (psi.size() != space.total_dim()) throw SpaceMismatch("state vector dimension");
    const Vec n = psi / psi.norm();
    return DensityMatrix(space, n * n.adjoint());
  }

  static DensityMatrix basis(const SpaceSpec& space, int index) {
    Vec psi = Vec::Zero(space.total_dim());
    psi(index) = 1.0;
    return pure(space, psi);
  }

  /// Trace-normalized (rho + rho^dag)/2 of an arbitrary matrix.
  static DensityMatrix symmetrized(const SpaceSpec& space, const DenseMat& m, const DensityTolerances& tol = {}) {
    DenseMat h = 0.5 * (m + m.adjoint());
    const cplx tr = h.trace();
    if (std::abs(tr) == 0.0 || !std::isfinite(std::abs(tr))) throw ConvergenceError("state has zero or non-finite trace");
    h /= tr.real();
    return DensityMatrix(space, h, tol);
  }

  const SpaceSpec& space() const { return space_; }
  const DenseMat& matrix() const { return matrix_; }
  int dim() const { return space_.total_dim(); }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<DenseMat> es(0.5 * (matrix_ + matrix_.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  cplx expect(const Operator& op) const {
    require_same_space(space_, op.space(), "expect");
    return (op.matrix() * matrix_).trace();
  }

 private:
  void validate(const DensityTolerances& tol) const {
    const int d = space_.total_dim();
    if (matrix_.rows() != d || matrix_.cols() != d) throw SpaceMismatch("density matrix dimension");
    if (!matrix_.allFinite()) throw ConvergenceError("density matrix has non-finite entries");
    if (max_abs(DenseMat(matrix_ - matrix_.adjoint())) > tol.hermitian)
      throw ContractViolation("density matrix is not Hermitian");
    if (std::abs(matrix_.trace() - cplx(1.0)) > tol.trace)
      throw ContractViolation("density matrix trace is not 1");
    const double lo = min_eigenvalue();
    if (lo < tol.min_eigenvalue)
      throw ContractViolation("density matrix has eigenvalue " + std::to_string(lo));
  }

  SpaceSpec space_;
  DenseMat matrix_;
};

/// Reduced state on factor `keep`, tracing out every other factor.
inline DenseMat partial_trace_matrix(const SpaceSpec& space, const DenseMat& rho, int keep) {
  space.check_index(keep);
  const int dk = space.factor(keep).dim;
  const int right = space.stride(keep);
  const int left = space.total_dim() / (dk * right);
  DenseMat out = DenseMat::Zero(dk, dk);
  for (int l = 0; l < left; ++l)
    for (int r = 0; r < right; ++r)
      for (int j = 0; j < dk; ++j) {
        const int col = (l * dk + j) * right + r;
        for (int i = 0; i < dk; ++i) out(i, j) += rho((l * dk + i) * right + r, col);
      }
  return out;
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, int keep) {
  return DensityMatrix(rho.space().factor_space(keep), partial_trace_matrix(rho.space(), rho.matrix(), keep));
}

/// Population of the top `levels` Fock levels of each fock factor (0 for
/// two-level factors).
inline std::vector<double> truncation_health(const SpaceSpec& space, const DenseMat& rho, int levels = 2) {
  std::vector<double> out;
  for (int k = 0; k < space.factor_count(); ++k) {
    if (space.factor(k).kind != FactorKind::fock) {
      out.push_back(0.0);
      continue;
    }
    const DenseMat red = space.factor_count() == 1 ? rho : partial_trace_matrix(space, rho, k);
    const int d = static_cast<int>(red.rows());
    double p = 0.0;
    for (int n = std::max(0, d - levels); n < d; ++n) p += red(n, n).real();
    out.push_back(p);
  }
  return out;
}

inline std::vector<double> truncation_health(const DensityMatrix& rho, int levels = 2) {
  return truncation_health(rho.space(), rho.matrix(), levels);
}

}  // namespace qfb
