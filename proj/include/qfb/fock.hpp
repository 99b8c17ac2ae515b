#pragma once

// Truncated Fock / two-level operators on a SpaceSpec: ladder and Pauli
// operators, tensor embedding and functions of Hermitian operators.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "qfb/core.hpp"

namespace qfb {

/// Complex matrix acting on a SpaceSpec.  Stored sparse; `dense()` is cheap
/// for the factor-local operators (dimension <= a few dozen).
class Operator {
 public:
  Operator() = default;

  Operator(SpaceSpec space, SparseMat matrix, std::optional<bool> hermitian_hint = std::nullopt)
      : space_(std::move(space)), matrix_(std::move(matrix)), hermitian_(hermitian_hint) {
    const int d = space_.total_dim();
    if (matrix_.rows() != d || matrix_.cols() != d)
      throw SpaceMismatch("operator matrix is " + std::to_string(matrix_.rows()) + "x" +
                          std::to_string(matrix_.cols()) + ", space has dimension " + std::to_string(d));
    matrix_.makeCompressed();
    if (hermitian_ && *hermitian_) {
      const double scale = max_abs(matrix_);
      const SparseMat diff = matrix_ - SparseMat(matrix_.adjoint());
      if (max_abs(diff) > 1e-12 * std::max(scale, 1e-300))
        throw ContractViolation("operator flagged Hermitian is not Hermitian");
    }
  }

  Operator(SpaceSpec space, const DenseMat& matrix, std::optional<bool> hermitian_hint = std::nullopt)
      : Operator(std::move(space), to_sparse(matrix), hermitian_hint) {}

  const SpaceSpec& space() const { return space_; }
  const SparseMat& matrix() const { return matrix_; }
  DenseMat dense() const { return DenseMat(matrix_); }
  int dim() const { return space_.total_dim(); }
  std::optional<bool> hermitian_hint() const { return hermitian_; }

  /// True when the hint says so, or when checked numerically to 1e-12.
  bool is_hermitian() const {
    if (hermitian_) return *hermitian_;
    const double scale = max_abs(matrix_);
    return max_abs(SparseMat(matrix_ - SparseMat(matrix_.adjoint()))) <= 1e-12 * std::max(scale, 1e-300);
  }

  Operator adjoint() const { return Operator(space_, SparseMat(matrix_.adjoint()), hermitian_); }

  friend Operator operator+(const Operator& a, const Operator& b) {
    require_same_space(a.space_, b.space_, "operator +");
    return Operator(a.space_, SparseMat(a.matrix_ + b.matrix_), both_hermitian(a, b));
  }
  friend Operator operator-(const Operator& a, const Operator& b) {
    require_same_space(a.space_, b.space_, "operator -");
    return Operator(a.space_, SparseMat(a.matrix_ - b.matrix_), both_hermitian(a, b));
  }
  friend Operator operator*(const Operator& a, const Operator& b) {
    require_same_space(a.space_, b.space_, "operator *");
    return Operator(a.space_, SparseMat(a.matrix_ * b.matrix_));
  }
  friend Operator operator*(cplx s, const Operator& a) {
    std::optional<bool> h;
    if (a.hermitian_ && *a.hermitian_ && s.imag() == 0.0) h = true;
    return Operator(a.space_, SparseMat(s * a.matrix_), h);
  }
  friend Operator operator*(double s, const Operator& a) {
    return Operator(a.space_, SparseMat(cplx(s) * a.matrix_), a.hermitian_);
  }

 private:
  static std::optional<bool> both_hermitian(const Operator& a, const Operator& b) {
    if (a.hermitian_ && b.hermitian_ && *a.hermitian_ && *b.hermitian_) return true;
    return std::nullopt;
  }

  SpaceSpec space_;
  SparseMat matrix_;
  std::optional<bool> hermitian_;
};

namespace detail {

inline SparseMat kron(const SparseMat& a, const SparseMat& b) {
  SparseMat out = Eigen::kroneckerProduct(a, b);
  out.makeCompressed();
  return out;
}

// I_left (x) local (x) I_right for factor `index`.
inline SparseMat embed_local(const SpaceSpec& space, int index, const SparseMat& local) {
  space.check_index(index);
  const int d = space.factor(index).dim;
  if (local.rows() != d || local.cols() != d)
    throw SpaceMismatch("local operator dimension " + std::to_string(local.rows()) + " does not match factor " +
                        std::to_string(index) + " of dimension " + std::to_string(d));
  const int right = space.stride(index);
  const int left = space.total_dim() / (d * right);
  SparseMat out = local;
  if (left > 1) out = kron(sparse_identity(left), out);
  if (right > 1) out = kron(out, sparse_identity(right));
  return out;
}

inline void require_kind(const SpaceSpec& space, int index, FactorKind kind, const char* op) {
  space.check_index(index);
  if (space.factor(index).kind != kind)
    throw KindMismatch(std::string(op) + " on factor " + std::to_string(index) + " of kind " +
                       (space.factor(index).kind == FactorKind::fock ? "fock" : "two-level"));
}

}  // namespace detail

inline Operator identity(const SpaceSpec& space) {
  return Operator(space, sparse_identity(space.total_dim()), true);
}

/// Exact finite section of the ladder operator: <n-1|a|n> = sqrt(n).
inline Operator annihilation(const SpaceSpec& space, int factor_index = 0) {
  detail::require_kind(space, factor_index, FactorKind::fock, "annihilation");
  const int d = space.factor(factor_index).dim;
  std::vector<Triplet> trips;
  for (int n = 1; n < d; ++n) trips.emplace_back(n - 1, n, std::sqrt(static_cast<double>(n)));
  SparseMat local(d, d);
  local.setFromTriplets(trips.begin(), trips.end());
  return Operator(space, detail::embed_local(space, factor_index, local));
}

inline Operator creation(const SpaceSpec& space, int factor_index = 0) {
  return annihilation(space, factor_index).adjoint();
}

inline Operator number(const SpaceSpec& space, int factor_index = 0) {
  detail::require_kind(space, factor_index, FactorKind::fock, "number");
  const int d = space.factor(factor_index).dim;
  SparseMat local(d, d);
  for (int n = 0; n < d; ++n) local.insert(n, n) = static_cast<double>(n);
  return Operator(space, detail::embed_local(space, factor_index, local), true);
}

enum class Pauli { x, y, z, lower };

/// Two-level operators in the basis (|down>, |up>): index 0 is the ground
/// state, the eigenvalue-0 state of sigma^dag sigma.
inline Operator pauli(const SpaceSpec& space, int factor_index, Pauli which) {
  detail::require_kind(space, factor_index, FactorKind::two_level, "pauli");
  DenseMat m = DenseMat::Zero(2, 2);
  std::optional<bool> herm = true;
  switch (which) {
    case Pauli::x:
      m(0, 1) = 1.0;
      m(1, 0) = 1.0;
      break;
    case Pauli::y:
      m(0, 1) = I_UNIT;
      m(1, 0) = -I_UNIT;
      break;
    case Pauli::z:
      m(0, 0) = -1.0;
      m(1, 1) = 1.0;
      break;
    case Pauli::lower:
      m(0, 1) = 1.0;  // sigma |up> = |down>
      herm.reset();
      break;
  }
  return Operator(space, detail::embed_local(space, factor_index, to_sparse(m)), herm);
}

/// Product of factor-local operators, each embedded on its factor of `space`.
/// Factors not named are the identity.
inline Operator tensor_embed(const SpaceSpec& space, const std::vector<std::pair<int, Operator>>& parts) {
  std::vector<int> seen;
  SparseMat out = sparse_identity(space.total_dim());
  bool herm = true;
  for (const auto& [index, local] : parts) {
    space.check_index(index);
    if (std::find(seen.begin(), seen.end(), index) != seen.end())
      throw SpaceMismatch("tensor_embed: factor " + std::to_string(index) + " given twice");
    seen.push_back(index);
    if (!(local.space() == space.factor_space(index)))
      throw SpaceMismatch("tensor_embed: local operator on " + local.space().describe() + " for factor " +
                          std::to_string(index) + " of " + space.describe());
    out = SparseMat(out * detail::embed_local(space, index, local.matrix()));
    herm = herm && local.hermitian_hint().value_or(false);
  }
  return Operator(space, out, herm ? std::optional<bool>(true) : std::nullopt);
}

/// Scalar function applied to the spectrum of a Hermitian operator.
struct ScalarFunction {
  enum class Tag { exp_i_scaled, arctan_half, custom };
  Tag tag = Tag::custom;
  double scale = 0.0;
  std::string name;
  std::function<cplx(double)> fn;
  bool unit_modulus = false;

  /// z -> exp(i t z).
  static ScalarFunction exp_i_scaled(double t) {
    ScalarFunction f;
    f.tag = Tag::exp_i_scaled;
    f.scale = t;
    f.name = "exp_i_scaled";
    f.fn = [t](double z) { return std::exp(I_UNIT * (t * z)); };
    f.unit_modulus = true;
    return f;
  }
  /// z -> arctan(z / 2).
  static ScalarFunction arctan_half() {
    ScalarFunction f;
    f.tag = Tag::arctan_half;
    f.name = "arctan_half";
    f.fn = [](double z) { return cplx(std::atan(z / 2.0), 0.0); };
    return f;
  }
  static ScalarFunction custom(std::string name, std::function<cplx(double)> fn, bool unit_modulus = false) {
    ScalarFunction f;
    f.tag = Tag::custom;
    f.name = std::move(name);
    f.fn = std::move(fn);
    f.unit_modulus = unit_modulus;
    return f;
  }

  cplx operator()(double z) const { return fn(z); }
};

/// Orthonormal eigendecomposition of a Hermitian operator.
struct HermitianEigen {
  Eigen::VectorXd values;
  DenseMat vectors;  // columns
  bool diagonal = false;
};

inline bool is_diagonal(const SparseMat& m) {
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMat::InnerIterator it(m, k); it; ++it)
      if (it.row() != it.col() && it.value() != cplx(0.0)) return false;
  return true;
}

inline void require_hermitian(const Operator& z, const char* where) {
  if (!z.is_hermitian()) throw ContractViolation(std::string(where) + ": operator is not Hermitian");
}

/// General path always uses a dense eigensolver; `allow_fast_path` lets a
/// diagonal input skip it.
inline HermitianEigen hermitian_eigen(const Operator& z, bool allow_fast_path = true) {
  require_hermitian(z, "hermitian_eigen");
  HermitianEigen out;
  const int d = z.dim();
  if (allow_fast_path && is_diagonal(z.matrix())) {
    out.values.resize(d);
    for (int i = 0; i < d; ++i) out.values(i) = z.matrix().coeff(i, i).real();
    out.vectors = DenseMat::Identity(d, d);
    out.diagonal = true;
    return out;
  }
  DenseMat m = z.dense();
  m = 0.5 * (m + m.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<DenseMat> es(m);
  if (es.info() != Eigen::Success) throw ConvergenceError("Hermitian eigensolver failed");
  out.values = es.eigenvalues();
  out.vectors = es.eigenvectors();
  for (int j = 0; j < d; ++j) out.vectors.col(j).normalize();
  return out;
}

inline Operator apply_function(const SpaceSpec& space, const HermitianEigen& eig, const ScalarFunction& f) {
  const int d = static_cast<int>(eig.values.size());
  Eigen::VectorXcd fz(d);
  for (int i = 0; i < d; ++i) fz(i) = f(eig.values(i));
  if (eig.diagonal) {
    SparseMat m(d, d);
    for (int i = 0; i < d; ++i) m.insert(i, i) = fz(i);
    return Operator(space, m);
  }
  DenseMat out = eig.vectors * fz.asDiagonal() * eig.vectors.adjoint();
  return Operator(space, to_sparse(out, 1e-300));
}

/// f(Z) for Hermitian Z, computed on an orthonormal eigenbasis.
inline Operator op_function(const Operator& z, const ScalarFunction& f, bool allow_fast_path = true) {
  return apply_function(z.space(), hermitian_eigen(z, allow_fast_path), f);
}

}  // namespace qfb
