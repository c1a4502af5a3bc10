#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace ivan {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// (country, sector) pair identifying a node. Aggregated networks leave the
/// irrelevant part empty.
struct NodeLabel {
  std::string country;
  std::string sector;

  std::string name() const {
    if (country.empty()) return sector;
    if (sector.empty()) return country;
    return country + ":" + sector;
  }

  friend bool operator==(const NodeLabel&, const NodeLabel&) = default;
  friend auto operator<=>(const NodeLabel&, const NodeLabel&) = default;
};

/// One year's world input-output accounts. Node k corresponds to
/// (country k / n_s, sector k % n_s); all monetary fields share one unit.
template <class Scalar = double>
struct IOTable {
  std::vector<std::string> countries;
  std::vector<std::string> sectors;
  Matrix<Scalar> intermediate;  // Z, n x n
  Matrix<Scalar> final_demand;  // FD, n x n_c (one column per demand country)
  Vector<Scalar> value_added;   // VA, n
  Vector<Scalar> total_output;  // T, n
  int year = 0;

  std::size_t country_count() const { return countries.size(); }
  std::size_t sector_count() const { return sectors.size(); }
  std::size_t node_count() const { return countries.size() * sectors.size(); }

  std::size_t node_index(std::size_t country, std::size_t sector) const {
    return country * sector_count() + sector;
  }
  std::size_t country_of(std::size_t node) const { return node / sector_count(); }
  std::size_t sector_of(std::size_t node) const { return node % sector_count(); }

  NodeLabel label(std::size_t node) const {
    return {countries[country_of(node)], sectors[sector_of(node)]};
  }
  std::vector<NodeLabel> labels() const {
    std::vector<NodeLabel> out;
    out.reserve(node_count());
    for (std::size_t k = 0; k < node_count(); ++k) out.push_back(label(k));
    return out;
  }
};

enum class NetworkKind { gvan, ivan, subnetwork };

inline std::string to_string(NetworkKind kind) {
  switch (kind) {
    case NetworkKind::gvan: return "gvan";
    case NetworkKind::ivan: return "ivan";
    default: return "subnetwork";
  }
}

/// Directed weighted network over labeled nodes; weights(i, j) is the flow
/// i -> j, zero meaning no link. Weights are kept non-negative.
template <class Scalar = double>
struct FlowNetwork {
  std::vector<NodeLabel> nodes;
  Matrix<Scalar> weights;
  NetworkKind kind = NetworkKind::subnetwork;
  std::string tag;

  std::size_t size() const { return nodes.size(); }

  std::size_t link_count() const {
    std::size_t links = 0;
    for (Eigen::Index j = 0; j < weights.cols(); ++j)
      for (Eigen::Index i = 0; i < weights.rows(); ++i)
        if (weights(i, j) > Scalar(0)) ++links;
    return links;
  }

  Scalar total_flow() const { return weights.sum(); }
};

/// country -> region classification; unmapped countries resolve to "".
struct RegionMap {
  std::map<std::string, std::string> region_of;

  std::string lookup(const std::string& country) const {
    auto it = region_of.find(country);
    return it == region_of.end() ? std::string() : it->second;
  }
  bool empty() const { return region_of.empty(); }
};

/// Induced subnetwork on `keep` (indices into net.nodes, in the given order).
template <class Scalar>
FlowNetwork<Scalar> restrict_network(const FlowNetwork<Scalar>& net,
                                     const std::vector<std::size_t>& keep,
                                     std::string tag = {}) {
  FlowNetwork<Scalar> sub;
  sub.kind = NetworkKind::subnetwork;
  sub.tag = std::move(tag);
  sub.nodes.reserve(keep.size());
  for (std::size_t k : keep) sub.nodes.push_back(net.nodes[k]);
  const auto m = static_cast<Eigen::Index>(keep.size());
  sub.weights.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      sub.weights(i, j) = net.weights(static_cast<Eigen::Index>(keep[i]),
                                      static_cast<Eigen::Index>(keep[j]));
  return sub;
}

}  // namespace ivan
