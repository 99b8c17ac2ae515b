#pragma once

// Basic numeric types, error hierarchy and the tensor-factor layout shared by
// every other header in the library.

#include <complex>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace qfb {

using cplx = std::complex<double>;
using SparseMat = Eigen::SparseMatrix<cplx>;
using DenseMat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using Triplet = Eigen::Triplet<cplx>;

inline constexpr cplx I_UNIT{0.0, 1.0};
inline constexpr double PI = 3.14159265358979323846;

/// Base class for every error raised by the library.  The exit code is what
/// the command-line front end reports when the error escapes a run.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, int exit_code = 1)
      : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

/// A caller broke a documented precondition (non-Hermitian input where a
/// Hermitian one is required, negative rate, ...).
class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& what) : Error("contract violation: " + what, 1) {}
};

class KindMismatch : public Error {
 public:
  explicit KindMismatch(const std::string& what) : Error("kind mismatch: " + what, 1) {}
};

class SpaceMismatch : public Error {
 public:
  explicit SpaceMismatch(const std::string& what) : Error("space mismatch: " + what, 1) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config error: " + what, 2) {}
};

class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& what) : Error("convergence error: " + what, 3) {}
};

/// Steady-state kernel of dimension > 1.  All models in this library have a
/// unique stationary state, so this always indicates a modelling bug.
class MultiplicityError : public ConvergenceError {
 public:
  explicit MultiplicityError(const std::string& what) : ConvergenceError("degenerate steady manifold: " + what) {}
};

class TruncationError : public Error {
 public:
  explicit TruncationError(const std::string& what) : Error("truncation health: " + what, 4) {}
};

enum class FactorKind { fock, two_level };

struct Factor {
  FactorKind kind;
  int dim;
  bool operator==(const Factor&) const = default;
};

/// Ordered list of tensor factors.  By convention factor 0 is the system and
/// factor 1 (when present) is the ancilla.
class SpaceSpec {
 public:
  SpaceSpec() = default;

  explicit SpaceSpec(std::vector<Factor> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) throw ContractViolation("SpaceSpec needs at least one factor");
    total_ = 1;
    for (const auto& f : factors_) {
      if (f.dim < 1) throw ContractViolation("factor dimension must be positive");
      if (f.kind == FactorKind::two_level && f.dim != 2)
        throw ContractViolation("a two-level factor has dimension exactly 2");
      total_ *= f.dim;
    }
  }

  static SpaceSpec fock(int dim) { return SpaceSpec({{FactorKind::fock, dim}}); }
  static SpaceSpec two_level() { return SpaceSpec({{FactorKind::two_level, 2}}); }
  static SpaceSpec fock_tla(int sys_dim) {
    return SpaceSpec({{FactorKind::fock, sys_dim}, {FactorKind::two_level, 2}});
  }
  static SpaceSpec fock_fock(int sys_dim, int anc_dim) {
    return SpaceSpec({{FactorKind::fock, sys_dim}, {FactorKind::fock, anc_dim}});
  }

  const std::vector<Factor>& factors() const { return factors_; }
  int factor_count() const { return static_cast<int>(factors_.size()); }
  int total_dim() const { return total_; }

  const Factor& factor(int index) const {
    check_index(index);
    return factors_[static_cast<std::size_t>(index)];
  }

  SpaceSpec factor_space(int index) const { return SpaceSpec({factor(index)}); }

  /// Product of the dimensions of the factors after `index`.
  int stride(int index) const {
    check_index(index);
    int s = 1;
    for (std::size_t k = static_cast<std::size_t>(index) + 1; k < factors_.size(); ++k) s *= factors_[k].dim;
    return s;
  }

  void check_index(int index) const {
    if (index < 0 || index >= factor_count())
      throw SpaceMismatch("factor index " + std::to_string(index) + " out of range");
  }

  std::string describe() const {
    std::ostringstream os;
    for (std::size_t k = 0; k < factors_.size(); ++k) {
      if (k) os << " x ";
      os << (factors_[k].kind == FactorKind::fock ? "fock(" : "tla(") << factors_[k].dim << ")";
    }
    return os.str();
  }

  bool operator==(const SpaceSpec& other) const { return factors_ == other.factors_; }

 private:
  std::vector<Factor> factors_;
  int total_ = 0;
};

inline void require_same_space(const SpaceSpec& a, const SpaceSpec& b, const char* where) {
  if (!(a == b)) throw SpaceMismatch(std::string(where) + ": " + a.describe() + " vs " + b.describe());
}

inline double max_abs(const SparseMat& m) {
  double r = 0.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMat::InnerIterator it(m, k); it; ++it) r = std::max(r, std::abs(it.value()));
  return r;
}

inline double max_abs(const DenseMat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline SparseMat sparse_identity(int dim) {
  SparseMat id(dim, dim);
  id.setIdentity();
  return id;
}

inline SparseMat to_sparse(const DenseMat& m, double drop = 0.0) {
  std::vector<Triplet> trips;
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i < m.rows(); ++i)
      if (std::abs(m(i, j)) > drop) trips.emplace_back(i, j, m(i, j));
  SparseMat s(m.rows(), m.cols());
  s.setFromTriplets(trips.begin(), trips.end());
  return s;
}

}  // namespace qfb
