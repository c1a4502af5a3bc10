#include "ivan/analysis.hpp"

#include <algorithm>
#include <exception>
#include <map>

namespace ivan {

HodgeDecomposition<double> aggregate_decomposition(const HodgeDecomposition<double>& node_dec,
                                                   const FlowNetwork<double>& restricted,
                                                   GroupBy group_by) {
  std::vector<std::string> groups;
  std::map<std::string, std::size_t> index_of;
  std::vector<std::size_t> group_of(node_dec.nodes.size());
  for (std::size_t a = 0; a < node_dec.nodes.size(); ++a) {
    const std::string& key =
        group_by == GroupBy::country ? node_dec.nodes[a].country : node_dec.nodes[a].sector;
    auto [it, inserted] = index_of.try_emplace(key, groups.size());
    if (inserted) groups.push_back(key);
    group_of[a] = it->second;
  }
  const auto m = static_cast<Eigen::Index>(groups.size());
  const auto n = static_cast<Eigen::Index>(node_dec.nodes.size());

  HodgeDecomposition<double> out;
  out.nodes.reserve(groups.size());
  for (const auto& g : groups) {
    NodeLabel label;
    if (group_by == GroupBy::country)
      label.country = g;
    else
      label.sector = g;
    out.nodes.push_back(std::move(label));
  }
  out.circular = Matrix<double>::Zero(m, m);
  out.pair_weight = Matrix<double>::Zero(m, m);
  out.potential_flow = Matrix<double>::Zero(m, m);
  out.phi = Vector<double>::Zero(m);
  out.component.assign(static_cast<std::size_t>(m), 0);

  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto gi = static_cast<Eigen::Index>(group_of[static_cast<std::size_t>(i)]);
      const auto gj = static_cast<Eigen::Index>(group_of[static_cast<std::size_t>(j)]);
      if (gi == gj) continue;
      out.circular(gi, gj) += node_dec.circular(i, j);
      if (node_dec.pair_weight(i, j) > 0.0) out.pair_weight(gi, gj) = 1.0;
    }

  // potentials: throughflow-weighted mean of member potentials
  Vector<double> weight_sum = Vector<double>::Zero(m);
  Vector<double> phi_sum = Vector<double>::Zero(m);
  Vector<double> member_count = Vector<double>::Zero(m);
  Vector<double> plain_sum = Vector<double>::Zero(m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto gi = static_cast<Eigen::Index>(group_of[static_cast<std::size_t>(i)]);
    const double throughflow =
        restricted.weights.row(i).sum() + restricted.weights.col(i).sum();
    weight_sum(gi) += throughflow;
    phi_sum(gi) += throughflow * node_dec.phi(i);
    member_count(gi) += 1.0;
    plain_sum(gi) += node_dec.phi(i);
  }
  for (Eigen::Index g = 0; g < m; ++g)
    out.phi(g) = weight_sum(g) > 0.0 ? phi_sum(g) / weight_sum(g)
                                     : plain_sum(g) / member_count(g);
  for (Eigen::Index gi = 0; gi < m; ++gi)
    for (Eigen::Index gj = 0; gj < m; ++gj)
      if (gi != gj && out.pair_weight(gi, gj) > 0.0)
        out.potential_flow(gi, gj) = out.phi(gi) - out.phi(gj);
  return out;
}

CommunityAnalysis analyze_community(int id, const std::vector<std::size_t>& node_ids,
                                    const FlowNetwork<double>& ivan,
                                    const FlowNetwork<double>& gvan,
                                    const AnalysisParams& params, int year) {
  CommunityAnalysis community;
  community.id = id;
  community.node_ids = node_ids;
  community.restricted =
      restrict_network(ivan, node_ids, "community-" + std::to_string(id));
  community.node_decomp = decompose(community.restricted);
  community.node_bilateral = bilateral_circulation(community.restricted);

  community.country_net = aggregate(community.restricted, GroupBy::country);
  community.sector_net = aggregate(community.restricted, GroupBy::sector);
  if (params.rank_aggregate_first) {
    community.country_decomp = decompose(community.country_net);
    community.sector_decomp = decompose(community.sector_net);
  } else {
    community.country_decomp =
        aggregate_decomposition(community.node_decomp, community.restricted, GroupBy::country);
    community.sector_decomp =
        aggregate_decomposition(community.node_decomp, community.restricted, GroupBy::sector);
  }

  community.integration_net =
      integration_index(community.node_decomp, gvan, node_ids, CirculationMode::net_only,
                        nullptr, params.restrict_denominator);
  community.integration_net.year = year;
  community.integration_net.community = id;
  community.integration_net_bilateral = integration_index(
      community.node_decomp, gvan, node_ids, CirculationMode::net_plus_bilateral,
      &community.node_bilateral, params.restrict_denominator);
  community.integration_net_bilateral.year = year;
  community.integration_net_bilateral.community = id;
  return community;
}

YearPartition partition_year(const FlowNetwork<double>& ivan, const AnalysisParams& params) {
  DetectOptions detect;
  detect.teleport_prob = params.teleport_prob;
  detect.recorded_teleport = params.recorded_teleport;
  detect.seeds = params.seeds;
  detect.rng_seed = params.rng_seed;
  detect.visit_tol = params.visit_tol;

  YearPartition out;
  out.scan = threshold_scan(ivan, params.k_min, params.k_max, params.k_step, params.size_floor,
                            detect);
  if (const ScanEntry* entry = out.scan.selected()) {
    out.thresholded = true;
    out.selected_k = entry->k;
    out.assignment = entry->assignment;
    out.codelength = entry->codelength;
    out.communities = entry->communities;
  } else {
    // no threshold exposes two large communities; analyze the plain partition
    const Partition partition = detect_communities(ivan, detect);
    out.thresholded = false;
    out.assignment = partition.assignment;
    out.codelength = partition.codelength;
    out.communities = partition.communities;
  }
  return out;
}

YearAnalysis analyze_year(const IOTable<double>& table, const AnalysisParams& params,
                          const RegionMap& regions) {
  YearAnalysis year;
  year.year = table.year;

  auto leontief = build_leontief(table);
  year.spectral_radius = static_cast<double>(leontief.spectral_radius);
  year.clamped_shares = leontief.clamped_shares;
  GvanStats stats;
  year.gvan = build_gvan(leontief, &stats);
  year.clamped_flows = stats.clamped_negative;
  year.ivan = build_ivan(year.gvan, table.sector_count());

  YearPartition partition = partition_year(year.ivan, params);
  year.scan = std::move(partition.scan);
  year.assignment = std::move(partition.assignment);
  year.thresholded = partition.thresholded;
  year.selected_k = partition.selected_k;
  year.partition_codelength = partition.codelength;
  year.community_count = partition.communities;

  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t a = 0; a < year.assignment.size(); ++a)
    if (year.assignment[a] >= 0) members[year.assignment[a]].push_back(a);

  const auto region_info = label_regions(year.assignment, year.ivan.nodes, regions);
  for (const auto& [id, node_ids] : members) {
    if (node_ids.size() <= params.size_floor) continue;
    auto community =
        analyze_community(id, node_ids, year.ivan, year.gvan, params, year.year);
    for (const auto& info : region_info)
      if (info.community == id) {
        community.dominant_region = info.dominant_region;
        community.purity = info.purity;
      }
    year.communities.push_back(std::move(community));
  }
  return year;
}

SeriesResult integration_series(const std::vector<IOTable<double>>& tables,
                                const AnalysisParams& params, const RegionMap& regions,
                                std::vector<YearAnalysis>* details) {
  SeriesResult result;
  for (const auto& table : tables) {
    try {
      YearAnalysis year = analyze_year(table, params, regions);
      for (const auto& community : year.communities) {
        result.reports.push_back(community.integration_net);
        result.reports.push_back(community.integration_net_bilateral);
      }
      if (details) details->push_back(std::move(year));
    } catch (const std::exception& e) {
      result.failures.emplace_back(table.year, e.what());
    }
  }
  return result;
}

}  // namespace ivan
