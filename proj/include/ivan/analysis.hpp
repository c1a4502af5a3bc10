#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ivan/community.hpp"
#include "ivan/hhd.hpp"
#include "ivan/integration.hpp"
#include "ivan/types.hpp"
#include "ivan/van.hpp"

namespace ivan {

/// Knobs for the per-year pipeline; defaults match the analysis the library
/// was built around (2408-node networks, 240-node community floor).
struct AnalysisParams {
  double teleport_prob = 0.15;
  bool recorded_teleport = true;
  int seeds = 10;
  std::uint64_t rng_seed = 1;
  double visit_tol = 1e-13;
  std::size_t k_min = 6500;
  std::size_t k_max = 11000;
  std::size_t k_step = 500;
  std::size_t size_floor = 240;
  CirculationMode mode = CirculationMode::net_only;
  bool rank_aggregate_first = true;   // aggregate to groups, then decompose
  bool restrict_denominator = true;   // integration denominator over community only
  std::size_t top_rank = 5;
  std::size_t top_links = 20;
};

/// Everything derived for one detected large community.
struct CommunityAnalysis {
  int id = 0;
  std::vector<std::size_t> node_ids;  // global IVAN indices, ascending
  std::string dominant_region;
  double purity = 0.0;
  FlowNetwork<double> restricted;  // full-weight IVAN restricted to the community
  HodgeDecomposition<double> node_decomp;
  Matrix<double> node_bilateral;
  FlowNetwork<double> country_net, sector_net;
  HodgeDecomposition<double> country_decomp, sector_decomp;
  IntegrationReport integration_net;            // net-only circulation
  IntegrationReport integration_net_bilateral;  // plus two-node loop flow
};

struct YearAnalysis {
  int year = 0;
  double spectral_radius = 0.0;
  int clamped_shares = 0;
  int clamped_flows = 0;
  FlowNetwork<double> gvan, ivan;
  ScanResult scan;
  std::vector<int> assignment;  // full node set; -1 = not in any community
  bool thresholded = false;     // scan produced a usable threshold
  std::size_t selected_k = 0;
  double partition_codelength = 0.0;
  std::size_t community_count = 0;
  std::vector<CommunityAnalysis> communities;  // large communities only
};

/// Scan plus the partition actually used downstream: the selected threshold's
/// partition when the scan finds one, otherwise the unthresholded partition.
struct YearPartition {
  ScanResult scan;
  std::vector<int> assignment;  // -1 = not in any community
  bool thresholded = false;
  std::size_t selected_k = 0;
  double codelength = 0.0;
  std::size_t communities = 0;
};

YearPartition partition_year(const FlowNetwork<double>& ivan, const AnalysisParams& params);

/// Per-community decomposition, aggregation and integration for one detected
/// community of the given IVAN/GVAN pair.
CommunityAnalysis analyze_community(int id, const std::vector<std::size_t>& node_ids,
                                    const FlowNetwork<double>& ivan,
                                    const FlowNetwork<double>& gvan,
                                    const AnalysisParams& params, int year);

/// Full single-year pipeline: networks, threshold scan, community detection
/// (falling back to the unthresholded partition when no threshold yields two
/// large communities), then per-community decomposition and integration.
YearAnalysis analyze_year(const IOTable<double>& table, const AnalysisParams& params,
                          const RegionMap& regions);

struct SeriesResult {
  std::vector<IntegrationReport> reports;            // both modes, year-major order
  std::vector<std::pair<int, std::string>> failures;  // (year, reason)
};

/// Runs analyze_year over each table; failing years are reported and skipped.
/// When `details` is non-null it receives the successful YearAnalysis objects.
SeriesResult integration_series(const std::vector<IOTable<double>>& tables,
                                const AnalysisParams& params, const RegionMap& regions,
                                std::vector<YearAnalysis>* details = nullptr);

/// Group-level view of a node-level decomposition: circular flows summed per
/// group pair, potentials averaged with node throughflow weights. Used by the
/// alternative ranking mode.
HodgeDecomposition<double> aggregate_decomposition(const HodgeDecomposition<double>& node_dec,
                                                   const FlowNetwork<double>& restricted,
                                                   GroupBy group_by);

}  // namespace ivan
