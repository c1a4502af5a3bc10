#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include "ivan/types.hpp"

namespace ivan {

/// Split of the net flows F'_ij = F_ij - F_ji into a gradient part
/// w_ij (phi_i - phi_j) and a divergence-free circular part. Pair weights are
/// one on every connected pair; potentials are gauged to sum to zero per
/// connected component of the undirected support.
template <class Scalar = double>
struct HodgeDecomposition {
  std::vector<NodeLabel> nodes;
  Vector<Scalar> phi;
  Matrix<Scalar> pair_weight;     // w, symmetric 0/1
  Matrix<Scalar> circular;        // F^(c), antisymmetric
  Matrix<Scalar> potential_flow;  // F^(p) = w (phi_i - phi_j), antisymmetric
  Scalar residual = Scalar(0);            // max |F' - F^(c) - F^(p)|
  Scalar laplacian_residual = Scalar(0);  // ||L phi - div||_inf / ||div||_inf
  std::vector<int> component;             // component id per node

  /// s^c_i: total circular magnitude over pairs incident to i, each pair
  /// counted once from the node's own side.
  Vector<Scalar> circular_strength() const {
    const Eigen::Index n = circular.rows();
    Vector<Scalar> s = Vector<Scalar>::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) s(i) += std::abs(circular(i, j));
    return s;
  }
};

template <class Scalar>
HodgeDecomposition<Scalar> decompose(const FlowNetwork<Scalar>& net) {
  const Eigen::Index n = static_cast<Eigen::Index>(net.size());
  HodgeDecomposition<Scalar> dec;
  dec.nodes = net.nodes;
  dec.phi = Vector<Scalar>::Zero(n);
  dec.pair_weight = Matrix<Scalar>::Zero(n, n);
  dec.circular = Matrix<Scalar>::Zero(n, n);
  dec.potential_flow = Matrix<Scalar>::Zero(n, n);
  dec.component.assign(static_cast<std::size_t>(n), -1);
  if (n == 0) return dec;

  Matrix<Scalar> net_flow = Matrix<Scalar>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Scalar forward = net.weights(i, j);
      const Scalar backward = net.weights(j, i);
      if (forward + backward > Scalar(0)) {
        dec.pair_weight(i, j) = Scalar(1);
        dec.pair_weight(j, i) = Scalar(1);
        net_flow(i, j) = forward - backward;
        net_flow(j, i) = -net_flow(i, j);
      }
    }

  // components of the undirected support
  int component_count = 0;
  {
    std::vector<Eigen::Index> stack;
    for (Eigen::Index start = 0; start < n; ++start) {
      if (dec.component[static_cast<std::size_t>(start)] >= 0) continue;
      const int id = component_count++;
      stack.push_back(start);
      dec.component[static_cast<std::size_t>(start)] = id;
      while (!stack.empty()) {
        const Eigen::Index v = stack.back();
        stack.pop_back();
        for (Eigen::Index u = 0; u < n; ++u)
          if (dec.pair_weight(v, u) > Scalar(0) &&
              dec.component[static_cast<std::size_t>(u)] < 0) {
            dec.component[static_cast<std::size_t>(u)] = id;
            stack.push_back(u);
          }
      }
    }
  }

  const Vector<Scalar> divergence = net_flow.rowwise().sum();

  for (int comp = 0; comp < component_count; ++comp) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index v = 0; v < n; ++v)
      if (dec.component[static_cast<std::size_t>(v)] == comp) members.push_back(v);
    const auto m = static_cast<Eigen::Index>(members.size());
    if (m < 2) continue;  // isolated node keeps phi = 0

    Matrix<Scalar> laplacian = Matrix<Scalar>::Zero(m, m);
    Vector<Scalar> rhs(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      Scalar degree = Scalar(0);
      for (Eigen::Index b = 0; b < m; ++b) {
        if (b == a) continue;
        const Scalar w = dec.pair_weight(members[static_cast<std::size_t>(a)],
                                         members[static_cast<std::size_t>(b)]);
        laplacian(a, b) = -w;
        degree += w;
      }
      laplacian(a, a) = degree;
      rhs(a) = divergence(members[static_cast<std::size_t>(a)]);
    }

    // ground the last node, solve the reduced SPD system, then re-center
    Eigen::LDLT<Matrix<Scalar>> solver(laplacian.topLeftCorner(m - 1, m - 1));
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("decompose: Laplacian factorization failed");
    Vector<Scalar> reduced = solver.solve(rhs.head(m - 1));
    Vector<Scalar> phi(m);
    phi.head(m - 1) = reduced;
    phi(m - 1) = Scalar(0);
    phi.array() -= phi.mean();
    for (Eigen::Index a = 0; a < m; ++a)
      dec.phi(members[static_cast<std::size_t>(a)]) = phi(a);
  }

  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (dec.pair_weight(i, j) > Scalar(0)) {
        const Scalar grad = dec.pair_weight(i, j) * (dec.phi(i) - dec.phi(j));
        dec.potential_flow(i, j) = grad;
        dec.potential_flow(j, i) = -grad;
        const Scalar circ = net_flow(i, j) - grad;
        dec.circular(i, j) = circ;
        dec.circular(j, i) = -circ;
      }

  dec.residual = (net_flow - dec.circular - dec.potential_flow)
                     .cwiseAbs()
                     .maxCoeff();
  const Scalar div_norm = divergence.cwiseAbs().maxCoeff();
  if (div_norm > Scalar(0)) {
    // Laplacian acting on phi vs divergence, over all nodes at once
    Vector<Scalar> lap_phi = Vector<Scalar>::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i && dec.pair_weight(i, j) > Scalar(0))
          lap_phi(i) += dec.pair_weight(i, j) * (dec.phi(i) - dec.phi(j));
    dec.laplacian_residual = (lap_phi - divergence).cwiseAbs().maxCoeff() / div_norm;
  }
  return dec;
}

/// Two-node loop flow removed by net-flow antisymmetrization:
/// B_ij = min(F_ij, F_ji) per unordered pair, reported symmetrically.
template <class Scalar>
Matrix<Scalar> bilateral_circulation(const FlowNetwork<Scalar>& net) {
  const Eigen::Index n = static_cast<Eigen::Index>(net.size());
  Matrix<Scalar> b = Matrix<Scalar>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Scalar loop = std::min(net.weights(i, j), net.weights(j, i));
      if (loop > Scalar(0)) {
        b(i, j) = loop;
        b(j, i) = loop;
      }
    }
  return b;
}

enum class GroupBy { country, sector };

/// Sums flows between node groups (per country or per sector); within-group
/// flows become self-loops and are dropped. Group order follows first
/// appearance in the node list.
template <class Scalar>
FlowNetwork<Scalar> aggregate(const FlowNetwork<Scalar>& net, GroupBy group_by) {
  std::vector<std::string> groups;
  std::map<std::string, std::size_t> index_of;
  std::vector<std::size_t> group_of(net.size());
  for (std::size_t a = 0; a < net.size(); ++a) {
    const std::string& key =
        group_by == GroupBy::country ? net.nodes[a].country : net.nodes[a].sector;
    auto [it, inserted] = index_of.try_emplace(key, groups.size());
    if (inserted) groups.push_back(key);
    group_of[a] = it->second;
  }

  FlowNetwork<Scalar> out;
  out.kind = NetworkKind::subnetwork;
  out.tag = net.tag.empty() ? std::string("aggregated")
                            : net.tag + (group_by == GroupBy::country ? ":by-country"
                                                                      : ":by-sector");
  out.nodes.reserve(groups.size());
  for (const auto& g : groups) {
    NodeLabel label;
    if (group_by == GroupBy::country)
      label.country = g;
    else
      label.sector = g;
    out.nodes.push_back(std::move(label));
  }
  const auto m = static_cast<Eigen::Index>(groups.size());
  out.weights = Matrix<Scalar>::Zero(m, m);
  for (std::size_t a = 0; a < net.size(); ++a)
    for (std::size_t b = 0; b < net.size(); ++b) {
      if (group_of[a] == group_of[b]) continue;
      out.weights(static_cast<Eigen::Index>(group_of[a]),
                  static_cast<Eigen::Index>(group_of[b])) +=
          net.weights(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
  return out;
}

struct RankedEntry {
  std::string label;
  double value = 0.0;
};

struct PotentialRanking {
  std::vector<RankedEntry> highest;  // phi descending
  std::vector<RankedEntry> lowest;   // phi ascending
};

template <class Scalar>
PotentialRanking rank_potentials(const HodgeDecomposition<Scalar>& dec, std::size_t top) {
  std::vector<std::size_t> order(dec.nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto by_phi_desc = [&](std::size_t a, std::size_t b) {
    const auto pa = dec.phi(static_cast<Eigen::Index>(a));
    const auto pb = dec.phi(static_cast<Eigen::Index>(b));
    if (pa != pb) return pa > pb;
    return dec.nodes[a].name() < dec.nodes[b].name();
  };
  std::sort(order.begin(), order.end(), by_phi_desc);
  PotentialRanking ranking;
  const std::size_t count = std::min(top, order.size());
  for (std::size_t i = 0; i < count; ++i)
    ranking.highest.push_back({dec.nodes[order[i]].name(),
                               static_cast<double>(dec.phi(static_cast<Eigen::Index>(order[i])))});

  auto by_phi_asc = [&](std::size_t a, std::size_t b) {
    const auto pa = dec.phi(static_cast<Eigen::Index>(a));
    const auto pb = dec.phi(static_cast<Eigen::Index>(b));
    if (pa != pb) return pa < pb;
    return dec.nodes[a].name() < dec.nodes[b].name();
  };
  std::sort(order.begin(), order.end(), by_phi_asc);
  for (std::size_t i = 0; i < count; ++i)
    ranking.lowest.push_back({dec.nodes[order[i]].name(),
                              static_cast<double>(dec.phi(static_cast<Eigen::Index>(order[i])))});
  return ranking;
}

template <class Scalar>
std::vector<RankedEntry> rank_circulation(const HodgeDecomposition<Scalar>& dec,
                                          std::size_t top) {
  const Vector<Scalar> strength = dec.circular_strength();
  std::vector<std::size_t> order(dec.nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto sa = strength(static_cast<Eigen::Index>(a));
    const auto sb = strength(static_cast<Eigen::Index>(b));
    if (sa != sb) return sa > sb;
    return dec.nodes[a].name() < dec.nodes[b].name();
  });
  std::vector<RankedEntry> out;
  const std::size_t count = std::min(top, order.size());
  for (std::size_t i = 0; i < count; ++i)
    out.push_back({dec.nodes[order[i]].name(),
                   static_cast<double>(strength(static_cast<Eigen::Index>(order[i])))});
  return out;
}

/// Scatter-ready (phi, circular strength) pairs, one per node.
template <class Scalar>
std::vector<std::pair<Scalar, Scalar>> v_curve_data(const HodgeDecomposition<Scalar>& dec) {
  const Vector<Scalar> strength = dec.circular_strength();
  std::vector<std::pair<Scalar, Scalar>> out;
  out.reserve(dec.nodes.size());
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(dec.nodes.size()); ++i)
    out.emplace_back(dec.phi(i), strength(i));
  return out;
}

}  // namespace ivan
