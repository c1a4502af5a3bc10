#pragma once

// Brute-force reference implementations used only by tests. These deliberately
// avoid the library's computation paths: the Leontief inverse comes from the
// power series, stationary visit rates from a dense eigensolve, the map
// equation from explicit transition-matrix sums, potentials from the Laplacian
// pseudo-inverse, and optimal partitions from full enumeration.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ivan/types.hpp"

namespace oracle {

using ivan::FlowNetwork;
using Matrix = ivan::Matrix<double>;
using Vector = ivan::Vector<double>;

/// Sum_k A^k, truncated when the largest entry of the latest term drops
/// below tol.
inline Matrix leontief_series(const Matrix& a, double tol, int max_terms = 100000) {
  const Eigen::Index n = a.rows();
  Matrix sum = Matrix::Identity(n, n);
  Matrix term = Matrix::Identity(n, n);
  for (int k = 1; k <= max_terms; ++k) {
    term = term * a;
    sum += term;
    if (term.cwiseAbs().maxCoeff() < tol) return sum;
  }
  throw std::runtime_error("leontief_series: no convergence within term cap");
}

/// Full transition matrix of the teleporting walk, dangling rows uniform.
inline Matrix transition_matrix(const FlowNetwork<double>& net, double tau) {
  const Eigen::Index n = static_cast<Eigen::Index>(net.size());
  Matrix p(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double strength = net.weights.row(i).sum();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (strength > 0.0)
        p(i, j) = (1.0 - tau) * net.weights(i, j) / strength + tau / static_cast<double>(n);
      else
        p(i, j) = 1.0 / static_cast<double>(n);
    }
  }
  return p;
}

/// Stationary distribution via a dense eigensolve of P^T.
inline Vector stationary_dense(const FlowNetwork<double>& net, double tau) {
  const Matrix p = transition_matrix(net, tau);
  Eigen::EigenSolver<Matrix> solver(p.transpose());
  const auto values = solver.eigenvalues();
  Eigen::Index best = 0;
  double best_distance = std::abs(values(0) - std::complex<double>(1.0, 0.0));
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    const double distance = std::abs(values(i) - std::complex<double>(1.0, 0.0));
    if (distance < best_distance) {
      best_distance = distance;
      best = i;
    }
  }
  Vector pi = solver.eigenvectors().col(best).real();
  if (pi.sum() < 0.0) pi = -pi;
  return pi / pi.sum();
}

/// Eq-style two-level description length from explicit per-step transition
/// probabilities: exit rates are literal sums of p_alpha * P(alpha -> beta)
/// over module-leaving steps.
inline double codelength_direct(const FlowNetwork<double>& net, double tau,
                                const Vector& visits, const std::vector<int>& assignment) {
  const Eigen::Index n = static_cast<Eigen::Index>(net.size());
  const Matrix p = transition_matrix(net, tau);
  int modules = 0;
  for (int m : assignment) modules = std::max(modules, m + 1);

  std::vector<double> exit(static_cast<std::size_t>(modules), 0.0);
  std::vector<double> visit(static_cast<std::size_t>(modules), 0.0);
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto m = static_cast<std::size_t>(assignment[static_cast<std::size_t>(a)]);
    visit[m] += visits(a);
    for (Eigen::Index b = 0; b < n; ++b)
      if (assignment[static_cast<std::size_t>(b)] != static_cast<int>(m))
        exit[m] += visits(a) * p(a, b);
  }
  double exit_total = 0.0;
  for (double q : exit) exit_total += q;

  double length = 0.0;
  if (exit_total > 0.0) {
    double entropy = 0.0;
    for (double q : exit)
      if (q > 0.0) entropy -= (q / exit_total) * std::log2(q / exit_total);
    length += exit_total * entropy;
  }
  for (std::size_t m = 0; m < exit.size(); ++m) {
    const double inside = visit[m] + exit[m];
    if (inside <= 0.0) continue;
    double entropy = 0.0;
    if (exit[m] > 0.0) entropy -= (exit[m] / inside) * std::log2(exit[m] / inside);
    for (Eigen::Index a = 0; a < n; ++a)
      if (assignment[static_cast<std::size_t>(a)] == static_cast<int>(m) && visits(a) > 0.0)
        entropy -= (visits(a) / inside) * std::log2(visits(a) / inside);
    length += inside * entropy;
  }
  return length;
}

struct BruteforceResult {
  std::vector<int> assignment;
  double codelength = 0.0;
};

/// Exhaustive minimum of the map equation over all set partitions
/// (restricted-growth-string enumeration); n is capped by the Bell-number
/// blowup.
inline BruteforceResult partition_bruteforce(const FlowNetwork<double>& net, double tau) {
  const std::size_t n = net.size();
  if (n == 0 || n > 8) throw std::invalid_argument("partition_bruteforce: n must be in [1, 8]");
  const Vector visits = stationary_dense(net, tau);

  std::vector<int> rgs(n, 0);  // restricted growth string
  std::vector<int> max_prefix(n, 0);
  BruteforceResult best;
  best.codelength = std::numeric_limits<double>::infinity();

  while (true) {
    const double length = codelength_direct(net, tau, visits, rgs);
    if (length < best.codelength - 1e-15) {
      best.codelength = length;
      best.assignment = rgs;
    }
    // next restricted growth string
    std::size_t i = n;
    while (i-- > 1) {
      if (rgs[i] <= max_prefix[i - 1]) {
        ++rgs[i];
        const int new_max = std::max(max_prefix[i - 1], rgs[i]);
        max_prefix[i] = new_max;
        for (std::size_t j = i + 1; j < n; ++j) {
          rgs[j] = 0;
          max_prefix[j] = new_max;
        }
        break;
      }
      if (i == 1) return best;
    }
    if (n == 1) return best;
  }
}

/// Potentials via the Moore-Penrose pseudo-inverse of the pair-weight
/// Laplacian; circular flow as the residual. Mirrors the decomposition
/// definitionally, one eigendecomposition per call.
struct PseudoinverseDecomposition {
  Vector phi;
  Matrix circular;  // antisymmetric
  Matrix net_flow;  // antisymmetrized input
};

inline PseudoinverseDecomposition hodge_pseudoinverse(const FlowNetwork<double>& net) {
  const Eigen::Index n = static_cast<Eigen::Index>(net.size());
  Matrix w = Matrix::Zero(n, n);
  Matrix net_flow = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      if (net.weights(i, j) + net.weights(j, i) > 0.0) {
        w(i, j) = 1.0;
        net_flow(i, j) = net.weights(i, j) - net.weights(j, i);
      }
    }
  Matrix laplacian = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    laplacian(i, i) = w.row(i).sum();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) laplacian(i, j) = -w(i, j);
  }
  const Vector divergence = net_flow.rowwise().sum();

  Eigen::SelfAdjointEigenSolver<Matrix> solver(laplacian);
  const Vector values = solver.eigenvalues();
  const Matrix vectors = solver.eigenvectors();
  const double cutoff = values.size() > 0
                            ? 1e-10 * std::max(1.0, values.cwiseAbs().maxCoeff())
                            : 0.0;
  Vector phi = Vector::Zero(n);
  for (Eigen::Index k = 0; k < values.size(); ++k)
    if (values(k) > cutoff)
      phi += vectors.col(k) * (vectors.col(k).dot(divergence) / values(k));

  PseudoinverseDecomposition out;
  out.phi = phi;
  out.net_flow = net_flow;
  out.circular = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (w(i, j) > 0.0) out.circular(i, j) = net_flow(i, j) - w(i, j) * (phi(i) - phi(j));
  return out;
}

}  // namespace oracle
