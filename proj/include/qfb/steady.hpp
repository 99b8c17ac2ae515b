#pragma once

// Stationary states of static generators: L rho = 0, Tr rho = 1.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/SparseLU>
#include <unsupported/Eigen/IterativeSolvers>

#include "qfb/density.hpp"
#include "qfb/superop.hpp"

namespace qfb {

struct SteadyOptions {
  double tol = -1.0;                // residual bound; negative means 1e-10 * max|L|
  int replaced_index = 0;           // diagonal element whose balance row carries the trace constraint
  bool check_multiplicity = true;
  long iterative_threshold = 12000; // d^2 above which ILUT + GMRES replaces sparse LU
  double ilut_droptol = 1e-4;
  int ilut_fill = 10;
  int gmres_restart = 80;
  int gmres_max_iter = 4000;
  std::uint64_t seed = 12345;       // random weights for the multiplicity probe
};

struct SteadyReport {
  DensityMatrix state;
  double residual = 0.0;  // max |L vec(rho)|
  double tolerance = 0.0;
  std::string method;
  std::vector<double> truncation_health;
  double multiplicity_gap = 0.0;  // max-abs difference between the two normalizations
  int iterations = 0;
};

namespace detail {

// L with row r replaced by sum_k w_k x_{k(d+1)}.
inline SparseMat replace_row(const SparseMat& l, int d, long r, const std::vector<double>& w) {
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(l.nonZeros()) + d);
  for (int j = 0; j < l.outerSize(); ++j)
    for (SparseMat::InnerIterator it(l, j); it; ++it)
      if (it.row() != r) trips.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < d; ++k) trips.emplace_back(r, static_cast<long>(k) * (d + 1), w[k]);
  SparseMat a(l.rows(), l.cols());
  a.setFromTriplets(trips.begin(), trips.end());
  a.makeCompressed();
  return a;
}

struct LinearSolve {
  Vec x;
  int iterations = 0;
  bool ok = false;
};

inline LinearSolve solve_direct(const SparseMat& a, const Vec& b) {
  Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(a);
  lu.factorize(a);
  LinearSolve out;
  if (lu.info() != Eigen::Success) return out;
  out.x = lu.solve(b);
  out.ok = lu.info() == Eigen::Success && out.x.allFinite();
  return out;
}

inline LinearSolve solve_iterative(const SparseMat& a, const Vec& b, const SteadyOptions& opt, double rel_tol) {
  Eigen::GMRES<SparseMat, Eigen::IncompleteLUT<cplx>> gmres;
  gmres.preconditioner().setDroptol(opt.ilut_droptol);
  gmres.preconditioner().setFillfactor(opt.ilut_fill);
  gmres.set_restart(opt.gmres_restart);
  gmres.setMaxIterations(opt.gmres_max_iter);
  gmres.setTolerance(rel_tol);
  gmres.compute(a);
  LinearSolve out;
  if (gmres.info() != Eigen::Success) return out;
  out.x = gmres.solve(b);
  out.iterations = static_cast<int>(gmres.iterations());
  out.ok = out.x.allFinite();
  return out;
}

inline DenseMat normalized_state(const Vec& x, int d) {
  DenseMat rho = unvec(x, d);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const double tr = rho.trace().real();
  if (!(std::abs(tr) > 0.0) || !std::isfinite(tr)) throw ConvergenceError("steady solve produced zero trace");
  return rho / tr;
}

inline double residual_of(const SparseMat& l, const DenseMat& rho) {
  const Vec r = l * vec(rho);
  return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

// Shifted inverse iteration on L^dag L.
inline Vec inverse_iteration(const SparseMat& l, const DenseMat& start, int sweeps = 6) {
  const double shift = 1e-12 * std::max(1.0, max_abs(l));
  SparseMat m = SparseMat(l.adjoint()) * l;
  m += shift * sparse_identity(static_cast<int>(m.rows()));
  Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(m);
  if (lu.info() != Eigen::Success) throw ConvergenceError("inverse iteration factorization failed");
  Vec x = vec(start);
  for (int s = 0; s < sweeps; ++s) {
    x = lu.solve(x);
    x /= x.norm();
  }
  return x;
}

}  // namespace detail

inline SteadyReport steady_state(const SuperOp& l, const SteadyOptions& opt = {}) {
  if (l.tp_hint() && !*l.tp_hint()) throw ContractViolation("steady_state needs a trace-preserving generator");
  const int d = l.dim();
  if (l.trace_defect() > 1e-10 * std::max(1.0, max_abs(l.matrix())))
    throw ContractViolation("steady_state: generator is not trace-preserving");
  if (opt.replaced_index < 0 || opt.replaced_index >= d) throw ContractViolation("replaced_index out of range");
  const long n = static_cast<long>(d) * d;
  const long r = static_cast<long>(opt.replaced_index) * (d + 1);
  const double scale = std::max(1.0, max_abs(l.matrix()));
  const double tol = opt.tol > 0.0 ? opt.tol : 1e-10 * scale;
  const bool iterative = n > opt.iterative_threshold;

  Vec b = Vec::Zero(n);
  b(r) = 1.0;
  auto solve = [&](const std::vector<double>& w) {
    const SparseMat a = detail::replace_row(l.matrix(), d, r, w);
    return iterative ? detail::solve_iterative(a, b, opt, 1e-3 * tol / scale) : detail::solve_direct(a, b);
  };

  SteadyReport rep;
  rep.tolerance = tol;
  rep.method = iterative ? "ilut_gmres" : "sparse_lu";
  const detail::LinearSolve first = solve(std::vector<double>(d, 1.0));
  DenseMat rho;
  bool have = false;
  if (first.ok) {
    rho = detail::normalized_state(first.x, d);
    rep.residual = detail::residual_of(l.matrix(), rho);
    rep.iterations = first.iterations;
    have = rep.residual <= tol;
  }
  if (!have) {
    const DenseMat mixed = DenseMat::Identity(d, d) / static_cast<double>(d);
    rho = detail::normalized_state(detail::inverse_iteration(l.matrix(), mixed), d);
    rep.residual = detail::residual_of(l.matrix(), rho);
    rep.method = "inverse_iteration";
    if (!(rep.residual <= tol))
      throw ConvergenceError("steady_state residual " + std::to_string(rep.residual) + " exceeds " +
                             std::to_string(tol));
    if (opt.check_multiplicity) {
      std::mt19937_64 rng(opt.seed);
      std::uniform_real_distribution<double> u(0.5, 1.5);
      DenseMat start = DenseMat::Zero(d, d);
      for (int k = 0; k < d; ++k) start(k, k) = u(rng);
      const DenseMat rho2 = detail::normalized_state(detail::inverse_iteration(l.matrix(), start), d);
      rep.multiplicity_gap = max_abs(DenseMat(rho2 - rho));
      if (rep.multiplicity_gap > std::max(1e-6, 1e3 * tol / scale))
        throw MultiplicityError("steady_state: stationary manifold is not one-dimensional (gap " +
                                std::to_string(rep.multiplicity_gap) + ")");
    }
  }

  if (opt.check_multiplicity && rep.method != "inverse_iteration") {
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    std::vector<double> w(d);
    for (auto& x : w) x = u(rng);
    const detail::LinearSolve second = solve(w);
    if (!second.ok) throw MultiplicityError("steady_state: perturbed normalization is singular");
    const DenseMat rho2 = detail::normalized_state(second.x, d);
    rep.multiplicity_gap = max_abs(DenseMat(rho2 - rho));
    if (rep.multiplicity_gap > std::max(1e-6, 1e3 * tol / scale))
      throw MultiplicityError("steady_state: stationary manifold is not one-dimensional (gap " +
                              std::to_string(rep.multiplicity_gap) + ")");
  }

  try {
    rep.state = DensityMatrix(l.space(), rho);
  } catch (const ContractViolation& e) {
    throw ConvergenceError(std::string("steady state fails density checks: ") + e.what());
  }
  rep.truncation_health = truncation_health(l.space(), rho);
  return rep;
}

/// Steady state of a compound generator reduced to factor `keep`.
inline DensityMatrix reduced_steady(const SuperOp& l, int keep = 0, const SteadyOptions& opt = {}) {
  const SteadyReport rep = steady_state(l, opt);
  if (rep.state.space().factor_count() == 1) return rep.state;
  return partial_trace(rep.state, keep);
}

}  // namespace qfb
