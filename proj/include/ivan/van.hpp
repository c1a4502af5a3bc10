#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/LU>

#include "ivan/types.hpp"

namespace ivan {

/// Demand-driven Leontief system derived from an IO table. Columns with zero
/// total output get a zero A-column and V entry, so inactive sectors induce
/// and receive nothing.
template <class Scalar = double>
struct LeontiefSystem {
  std::vector<NodeLabel> nodes;
  Matrix<Scalar> coefficients;     // A, A_ij = Z_ij / T_j
  Matrix<Scalar> inverse;          // L = (I - A)^-1
  Vector<Scalar> value_added_share;  // V = VA / T, clamped into [0, 1]
  Vector<Scalar> final_demand;       // F, row sums of FD
  Scalar spectral_radius = Scalar(0);  // power-iteration estimate on |A|
  int clamped_shares = 0;              // V entries forced back into range
};

namespace detail {

/// Power-iteration estimate of the Perron root of |A|; upper-bounds the
/// spectral radius relevant for convergence of the Neumann series.
template <class Scalar>
Scalar spectral_radius_bound(const Matrix<Scalar>& a, int iterations = 200) {
  const Eigen::Index n = a.rows();
  if (n == 0) return Scalar(0);
  Matrix<Scalar> abs_a = a.cwiseAbs();
  Vector<Scalar> v = Vector<Scalar>::Ones(n);
  Scalar estimate = Scalar(0);
  for (int it = 0; it < iterations; ++it) {
    Vector<Scalar> next = abs_a * v;
    const Scalar norm = next.template lpNorm<Eigen::Infinity>();
    if (norm == Scalar(0)) return Scalar(0);
    const Scalar previous = estimate;
    estimate = norm;
    v = next / norm;
    if (it > 10 && std::abs(estimate - previous) <= Scalar(1e-12) * estimate) break;
  }
  return estimate;
}

}  // namespace detail

template <class Scalar>
LeontiefSystem<Scalar> build_leontief(const IOTable<Scalar>& table) {
  const auto n = static_cast<Eigen::Index>(table.node_count());
  if (table.intermediate.rows() != n || table.intermediate.cols() != n ||
      table.value_added.size() != n || table.total_output.size() != n ||
      table.final_demand.rows() != n)
    throw std::invalid_argument("build_leontief: inconsistent table dimensions");

  LeontiefSystem<Scalar> sys;
  sys.nodes = table.labels();
  sys.coefficients.resize(n, n);
  sys.value_added_share.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Scalar total = table.total_output(j);
    if (total > Scalar(0)) {
      sys.coefficients.col(j) = table.intermediate.col(j) / total;
      Scalar share = table.value_added(j) / total;
      if (share < Scalar(0)) {
        share = Scalar(0);
        ++sys.clamped_shares;
      } else if (share > Scalar(1) + Scalar(1e-9)) {
        share = Scalar(1);
        ++sys.clamped_shares;
      }
      sys.value_added_share(j) = share;
    } else {
      sys.coefficients.col(j).setZero();
      sys.value_added_share(j) = Scalar(0);
    }
  }
  sys.final_demand = table.final_demand.rowwise().sum();

  sys.spectral_radius = detail::spectral_radius_bound(sys.coefficients);
  if (sys.spectral_radius >= Scalar(1))
    throw std::runtime_error("build_leontief: spectral radius estimate " +
                             std::to_string(static_cast<double>(sys.spectral_radius)) +
                             " >= 1, Leontief series diverges");

  Matrix<Scalar> eye_minus_a = Matrix<Scalar>::Identity(n, n) - sys.coefficients;
  Eigen::PartialPivLU<Matrix<Scalar>> lu(eye_minus_a);
  if (lu.rcond() < Eigen::NumTraits<Scalar>::epsilon())
    throw std::runtime_error("build_leontief: I - A is numerically singular");
  sys.inverse = lu.solve(Matrix<Scalar>::Identity(n, n));
  return sys;
}

struct GvanStats {
  int clamped_negative = 0;  // induced flows below zero stored as absent
};

/// G_ij = V_i * L_ij * F_j: value added in i induced by final demand for j.
template <class Scalar>
FlowNetwork<Scalar> build_gvan(const LeontiefSystem<Scalar>& sys, GvanStats* stats = nullptr) {
  FlowNetwork<Scalar> net;
  net.nodes = sys.nodes;
  net.kind = NetworkKind::gvan;
  net.weights = sys.value_added_share.asDiagonal() * sys.inverse *
                sys.final_demand.asDiagonal();
  int clamped = 0;
  for (Eigen::Index j = 0; j < net.weights.cols(); ++j)
    for (Eigen::Index i = 0; i < net.weights.rows(); ++i)
      if (net.weights(i, j) < Scalar(0)) {
        net.weights(i, j) = Scalar(0);
        ++clamped;
      }
  if (stats) stats->clamped_negative = clamped;
  return net;
}

/// Copy of the GVAN with every within-country cell (diagonal blocks) zeroed.
/// Idempotent; accepts GVAN or IVAN input.
template <class Scalar>
FlowNetwork<Scalar> build_ivan(const FlowNetwork<Scalar>& gvan, std::size_t sectors_per_country) {
  if (gvan.kind == NetworkKind::subnetwork)
    throw std::invalid_argument("build_ivan: input must be a GVAN or IVAN");
  if (sectors_per_country == 0 || gvan.size() % sectors_per_country != 0)
    throw std::invalid_argument("build_ivan: node count " + std::to_string(gvan.size()) +
                                " not divisible by sector count " +
                                std::to_string(sectors_per_country));
  FlowNetwork<Scalar> net = gvan;
  net.kind = NetworkKind::ivan;
  for (std::size_t i = 0; i < net.size(); ++i)
    for (std::size_t j = 0; j < net.size(); ++j)
      if (net.nodes[i].country == net.nodes[j].country)
        net.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = Scalar(0);
  return net;
}

struct ThresholdInfo {
  std::size_t requested = 0;
  std::size_t retained = 0;
  bool truncated = false;  // fewer nonzero links than requested
};

/// Keeps the k largest-weight links, ties broken by (source, target) order;
/// everything else becomes absent. k beyond the available links keeps all.
template <class Scalar>
FlowNetwork<Scalar> threshold_top_k(const FlowNetwork<Scalar>& net, std::size_t k,
                                    ThresholdInfo* info = nullptr) {
  if (k < 1) throw std::invalid_argument("threshold_top_k: k must be >= 1");
  using Link = std::tuple<Scalar, Eigen::Index, Eigen::Index>;
  std::vector<Link> links;
  for (Eigen::Index i = 0; i < net.weights.rows(); ++i)
    for (Eigen::Index j = 0; j < net.weights.cols(); ++j)
      if (net.weights(i, j) > Scalar(0)) links.emplace_back(net.weights(i, j), i, j);

  if (info) {
    info->requested = k;
    info->retained = std::min(k, links.size());
    info->truncated = k > links.size();
  }
  FlowNetwork<Scalar> out = net;
  if (k >= links.size()) return out;

  auto heavier = [](const Link& a, const Link& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  };
  std::nth_element(links.begin(), links.begin() + static_cast<std::ptrdiff_t>(k), links.end(),
                   heavier);
  out.weights.setZero();
  for (std::size_t r = 0; r < k; ++r) {
    const auto& [w, i, j] = links[r];
    out.weights(i, j) = w;
  }
  return out;
}

}  // namespace ivan
