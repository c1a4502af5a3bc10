#pragma once

#include <cmath>
#include <type_traits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ivan/hhd.hpp"
#include "ivan/types.hpp"

namespace ivan {

enum class CirculationMode { net_only, net_plus_bilateral };

inline std::string to_string(CirculationMode mode) {
  return mode == CirculationMode::net_only ? "net-only" : "net-plus-bilateral";
}

/// Community-level economic integration: aggregate circular-flow magnitude of
/// the community's cross-border network over the community's total
/// value-added flow (domestic links included).
struct IntegrationReport {
  int year = 0;
  int community = 0;
  std::vector<std::size_t> nodes;  // indices into the full GVAN
  std::optional<double> index;     // absent when the denominator vanishes
  double numerator = 0.0;
  double denominator = 0.0;
  CirculationMode mode = CirculationMode::net_only;
  std::map<std::string, double> sectoral;  // E_k, defined sectors only
};

namespace detail {

/// Sum of |F^(c)| over unordered pairs restricted to `subset` (indices into
/// the decomposition), plus the bilateral loop flow in that subset when
/// requested.
template <class Scalar>
double circular_magnitude(const HodgeDecomposition<Scalar>& dec,
                          const Matrix<Scalar>* bilateral,
                          const std::vector<std::size_t>& subset) {
  double total = 0.0;
  for (std::size_t a = 0; a < subset.size(); ++a)
    for (std::size_t b = a + 1; b < subset.size(); ++b) {
      const auto i = static_cast<Eigen::Index>(subset[a]);
      const auto j = static_cast<Eigen::Index>(subset[b]);
      total += std::abs(static_cast<double>(dec.circular(i, j)));
      if (bilateral) total += static_cast<double>((*bilateral)(i, j));
    }
  return total;
}

}  // namespace detail

/// E for one community. The decomposition (and bilateral matrix, for the
/// net-plus-bilateral mode) must come from the cross-border network restricted
/// to the community, in the order given by `community`. The denominator sums
/// GVAN flow over community node pairs, the full network when
/// `restrict_denominator` is false.
template <class Scalar>
IntegrationReport integration_index(const HodgeDecomposition<Scalar>& ivan_circular,
                                    const FlowNetwork<Scalar>& gvan,
                                    const std::vector<std::size_t>& community,
                                    CirculationMode mode = CirculationMode::net_only,
                                    const std::type_identity_t<Matrix<Scalar>>* bilateral = nullptr,
                                    bool restrict_denominator = true) {
  if (ivan_circular.nodes.size() != community.size())
    throw std::invalid_argument("integration_index: decomposition/community size mismatch");
  if (mode == CirculationMode::net_plus_bilateral && bilateral == nullptr)
    throw std::invalid_argument("integration_index: bilateral matrix required for this mode");
  for (std::size_t k : community)
    if (k >= gvan.size()) throw std::invalid_argument("integration_index: node outside GVAN");

  IntegrationReport report;
  report.community = 0;
  report.nodes = community;
  report.mode = mode;

  std::vector<std::size_t> all(community.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  report.numerator = detail::circular_magnitude(
      ivan_circular, mode == CirculationMode::net_plus_bilateral ? bilateral : nullptr, all);

  double denominator = 0.0;
  if (restrict_denominator) {
    for (std::size_t a : community)
      for (std::size_t b : community)
        denominator += static_cast<double>(
            gvan.weights(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
  } else {
    denominator = static_cast<double>(gvan.weights.sum());
  }
  report.denominator = denominator;
  if (denominator > 0.0) report.index = report.numerator / denominator;

  // sectoral components over same-sector node groups within the community
  std::map<std::string, std::vector<std::size_t>> sectors;  // local indices
  for (std::size_t i = 0; i < community.size(); ++i)
    sectors[ivan_circular.nodes[i].sector].push_back(i);
  for (const auto& [sector, members] : sectors) {
    if (members.size() < 2) continue;
    double sector_denominator = 0.0;
    for (std::size_t a : members)
      for (std::size_t b : members)
        sector_denominator += static_cast<double>(
            gvan.weights(static_cast<Eigen::Index>(community[a]),
                         static_cast<Eigen::Index>(community[b])));
    if (sector_denominator <= 0.0) continue;
    const double sector_numerator = detail::circular_magnitude(
        ivan_circular, mode == CirculationMode::net_plus_bilateral ? bilateral : nullptr,
        members);
    report.sectoral[sector] = sector_numerator / sector_denominator;
  }
  return report;
}

/// E_k for a single sector, following the same rules as the sectoral map in
/// integration_index; absent when fewer than two community nodes share the
/// sector or the sector's GVAN flow is zero.
template <class Scalar>
std::optional<double> sectoral_index(const HodgeDecomposition<Scalar>& ivan_circular,
                                     const FlowNetwork<Scalar>& gvan,
                                     const std::vector<std::size_t>& community,
                                     const std::string& sector,
                                     CirculationMode mode = CirculationMode::net_only,
                                     const std::type_identity_t<Matrix<Scalar>>* bilateral = nullptr) {
  const auto report =
      integration_index(ivan_circular, gvan, community, mode, bilateral, true);
  auto it = report.sectoral.find(sector);
  if (it == report.sectoral.end()) return std::nullopt;
  return it->second;
}

}  // namespace ivan
