#pragma once

// Gauss rules via Golub-Welsch, and a composite rule for integrals of the
// form  int_0^inf e^{-q} f(q) dq  with oscillatory f.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace qfb {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

inline QuadratureRule golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& offdiag, double mu0) {
  const int n = static_cast<int>(diag.size());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) jac(i, i) = diag(i);
  for (int i = 0; i + 1 < n; ++i) jac(i, i + 1) = jac(i + 1, i) = offdiag(i);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  QuadratureRule rule;
  for (int i = 0; i < n; ++i) {
    rule.nodes.push_back(es.eigenvalues()(i));
    const double v = es.eigenvectors()(0, i);
    rule.weights.push_back(mu0 * v * v);
  }
  return rule;
}

}  // namespace detail

/// n-point Gauss-Legendre rule on [-1, 1].
inline QuadratureRule gauss_legendre(int n) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd b(n > 1 ? n - 1 : 0);
  for (int k = 1; k < n; ++k) b(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  return detail::golub_welsch(a, b, 2.0);
}

/// n-point Gauss-Laguerre rule for  int_0^inf e^{-x} f(x) dx.
inline QuadratureRule gauss_laguerre(int n) {
  Eigen::VectorXd a(n);
  Eigen::VectorXd b(n > 1 ? n - 1 : 0);
  for (int k = 0; k < n; ++k) a(k) = 2.0 * k + 1.0;
  for (int k = 1; k < n; ++k) b(k - 1) = k;
  return detail::golub_welsch(a, b, 1.0);
}

/// Composite rule for  int_0^inf e^{-q} f(q) dq:  Gauss-Legendre panels on
/// [0, cutoff] followed by a shifted Gauss-Laguerre tail.  Plain
/// Gauss-Laguerre converges too slowly for f(q) = exp(-i w q) once |w| >~ 5.
inline QuadratureRule exp_weighted_halfline_rule(double panel_width = 0.5, int nodes_per_panel = 16,
                                                 double cutoff = 40.0, int tail_nodes = 64) {
  QuadratureRule out;
  const QuadratureRule gl = gauss_legendre(nodes_per_panel);
  const int panels = static_cast<int>(std::ceil(cutoff / panel_width));
  const double h = cutoff / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * h;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double q = mid + 0.5 * h * gl.nodes[i];
      out.nodes.push_back(q);
      out.weights.push_back(0.5 * h * gl.weights[i] * std::exp(-q));
    }
  }
  const QuadratureRule lag = gauss_laguerre(tail_nodes);
  const double tail_scale = std::exp(-cutoff);
  for (std::size_t i = 0; i < lag.nodes.size(); ++i) {
    out.nodes.push_back(cutoff + lag.nodes[i]);
    out.weights.push_back(tail_scale * lag.weights[i]);
  }
  return out;
}

}  // namespace qfb
