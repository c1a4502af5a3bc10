#include "ivan/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "csv_util.hpp"
#include "ivan/exports.hpp"
#include "ivan/ingest.hpp"

namespace ivan {

namespace {

using nlohmann::json;

std::mutex log_mutex;

void log_line(const std::string& line) {
  std::lock_guard<std::mutex> lock(log_mutex);
  std::cerr << line << "\n";
}

CirculationMode parse_mode(const std::string& s) {
  if (s == "net-only") return CirculationMode::net_only;
  if (s == "net-plus-bilateral") return CirculationMode::net_plus_bilateral;
  throw std::runtime_error("config: unknown hhd_mode '" + s + "'");
}

LogBase parse_log_base(const std::string& s) {
  if (s == "natural") return LogBase::natural;
  if (s == "base10") return LogBase::base10;
  throw std::runtime_error("config: unknown log_base '" + s + "'");
}

// --- paths -------------------------------------------------------------------

struct OutPaths {
  std::filesystem::path root;

  std::filesystem::path gvan_bin(int year) const {
    return root / "cache" / (std::to_string(year) + "_gvan.bin");
  }
  std::filesystem::path ivan_bin(int year) const {
    return root / "cache" / (std::to_string(year) + "_ivan.bin");
  }
  std::filesystem::path gvan_edges(int year) const {
    return root / "build" / (std::to_string(year) + "_gvan_edges.csv");
  }
  std::filesystem::path ivan_edges(int year) const {
    return root / "build" / (std::to_string(year) + "_ivan_edges.csv");
  }
  std::filesystem::path partition(int year) const {
    return root / "communities" / (std::to_string(year) + "_partition.csv");
  }
  std::filesystem::path scan(int year) const {
    return root / "communities" / (std::to_string(year) + "_scan.csv");
  }
  std::filesystem::path sankey() const { return root / "communities" / "sankey.json"; }
  std::filesystem::path community_file(int year, int community, const std::string& what,
                                       const std::string& ext) const {
    return root / "decompose" /
           (std::to_string(year) + "_c" + std::to_string(community) + "_" + what + "." + ext);
  }
  std::filesystem::path metrics_json(int year) const {
    return root / "metrics" / (std::to_string(year) + "_metrics.json");
  }
  std::filesystem::path ccdf(int year, const std::string& direction) const {
    return root / "metrics" / (std::to_string(year) + "_ccdf_" + direction + ".csv");
  }
  std::filesystem::path series() const { return root / "integrate" / "integration_series.csv"; }
  std::filesystem::path sectoral() const {
    return root / "integrate" / "integration_sectoral.csv";
  }
  std::filesystem::path run_config() const { return root / "run_config.json"; }
};

Metadata make_meta(const RunConfig& config, const std::string& stage, int version) {
  Metadata meta;
  meta.stage = stage;
  meta.stage_version = version;
  meta.config_hash = config.config_hash;
  meta.config_echo = config.config_echo;
  return meta;
}

bool file_fresh(const std::filesystem::path& path, const std::string& hash) {
  return std::filesystem::exists(path) && sniff_config_hash(path) == hash;
}

bool bin_fresh(const std::filesystem::path& path, const std::string& hash) {
  return std::filesystem::exists(path) && read_network_bin_hash(path) == hash;
}

FlowNetwork<double> load_checked_bin(const std::filesystem::path& path,
                                     const RunConfig& config, const char* hint) {
  if (!std::filesystem::exists(path))
    throw std::runtime_error("missing cache " + path.string() + "; run '" + hint + "' first");
  CachedNetwork cached = load_network_bin(path);
  if (cached.config_hash != config.config_hash)
    throw std::runtime_error("stale cache " + path.string() +
                             " (config changed); rerun '" + std::string(hint) + "' or use --force");
  return std::move(cached.net);
}

std::vector<int> load_checked_partition(const std::filesystem::path& path,
                                        const RunConfig& config,
                                        std::vector<NodeLabel>* nodes_out = nullptr) {
  if (!std::filesystem::exists(path))
    throw std::runtime_error("missing partition " + path.string() +
                             "; run 'communities' first");
  if (sniff_config_hash(path) != config.config_hash)
    throw std::runtime_error("stale partition " + path.string() +
                             " (config changed); rerun 'communities'");
  PartitionFile file = load_partition_csv(path);
  if (nodes_out) *nodes_out = std::move(file.nodes);
  return std::move(file.assignment);
}

std::map<int, std::vector<std::size_t>> large_communities(const std::vector<int>& assignment,
                                                          std::size_t size_floor) {
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t a = 0; a < assignment.size(); ++a)
    if (assignment[a] >= 0) members[assignment[a]].push_back(a);
  for (auto it = members.begin(); it != members.end();)
    it = it->second.size() <= size_floor ? members.erase(it) : std::next(it);
  return members;
}

// --- stages ------------------------------------------------------------------

void do_build_year(const RunConfig& config, int year, const std::filesystem::path& manifest,
                   bool force) {
  const OutPaths paths{config.out_dir};
  if (!force && bin_fresh(paths.gvan_bin(year), config.config_hash) &&
      bin_fresh(paths.ivan_bin(year), config.config_hash) &&
      file_fresh(paths.gvan_edges(year), config.config_hash) &&
      file_fresh(paths.ivan_edges(year), config.config_hash)) {
    log_line("[build " + std::to_string(year) + "] cached");
    return;
  }

  LoadOptions options;
  options.rel_tol = config.rel_tol;
  options.strict = config.strict;
  IOTable<double> table = load_io_table(manifest, options);
  if (table.year != year)
    throw std::runtime_error("manifest year " + std::to_string(table.year) +
                             " does not match expected " + std::to_string(year));
  if (!config.drop_countries.empty()) {
    ValidationReport recheck;
    table = drop_regions(table, config.drop_countries, &recheck);
    if (!recheck.pass)
      log_line("[build " + std::to_string(year) +
               "] note: identities out of balance after dropping regions (expected): " +
               recheck.summary());
  }

  auto leontief = build_leontief(table);
  GvanStats stats;
  FlowNetwork<double> gvan = build_gvan(leontief, &stats);
  FlowNetwork<double> ivan = build_ivan(gvan, table.sector_count());

  Metadata meta = make_meta(config, "build", 1);
  meta.extra.emplace_back("year", std::to_string(year));
  meta.extra.emplace_back("spectral_radius", csv::format_double(leontief.spectral_radius));
  meta.extra.emplace_back("clamped_value_added_shares", std::to_string(leontief.clamped_shares));
  meta.extra.emplace_back("clamped_negative_flows", std::to_string(stats.clamped_negative));

  save_network_bin(gvan, year, paths.gvan_bin(year), config.config_hash);
  save_network_bin(ivan, year, paths.ivan_bin(year), config.config_hash);
  {
    Metadata m = meta;
    m.extra.emplace_back("network", "gvan");
    write_edge_csv(gvan, paths.gvan_edges(year), m);
  }
  {
    Metadata m = meta;
    m.extra.emplace_back("network", "ivan");
    write_edge_csv(ivan, paths.ivan_edges(year), m);
  }
  log_line("[build " + std::to_string(year) + "] done (" + std::to_string(gvan.size()) +
           " nodes)");
}

void do_communities_year(const RunConfig& config, int year, const RegionMap& regions,
                         bool force) {
  const OutPaths paths{config.out_dir};
  if (!force && file_fresh(paths.partition(year), config.config_hash) &&
      file_fresh(paths.scan(year), config.config_hash)) {
    log_line("[communities " + std::to_string(year) + "] cached");
    return;
  }
  const FlowNetwork<double> ivan = load_checked_bin(paths.ivan_bin(year), config, "build");
  const YearPartition partition = partition_year(ivan, config.params);
  const auto region_info = label_regions(partition.assignment, ivan.nodes, regions);

  Metadata meta = make_meta(config, "communities", 1);
  meta.extra.emplace_back("year", std::to_string(year));
  meta.extra.emplace_back("thresholded", partition.thresholded ? "true" : "false");
  meta.extra.emplace_back("selected_k", partition.thresholded
                                            ? std::to_string(partition.selected_k)
                                            : std::string("none"));
  meta.extra.emplace_back("codelength", csv::format_double(partition.codelength));
  meta.extra.emplace_back("communities", std::to_string(partition.communities));

  write_scan_csv(partition.scan, paths.scan(year), meta);
  write_partition_csv(partition.assignment, ivan.nodes, region_info, paths.partition(year),
                      meta);
  log_line("[communities " + std::to_string(year) + "] done (" +
           std::to_string(partition.communities) + " communities, " +
           (partition.thresholded ? "k=" + std::to_string(partition.selected_k)
                                  : std::string("no threshold")) +
           ")");
}

void do_sankey(const RunConfig& config) {
  const OutPaths paths{config.out_dir};
  std::vector<SankeyPair> pairs;
  for (std::size_t i = 0; i + 1 < config.year_manifests.size(); ++i) {
    const int year_a = config.year_manifests[i].first;
    const int year_b = config.year_manifests[i + 1].first;
    if (!std::filesystem::exists(paths.partition(year_a)) ||
        !std::filesystem::exists(paths.partition(year_b)))
      continue;
    const PartitionFile a = load_partition_csv(paths.partition(year_a));
    const PartitionFile b = load_partition_csv(paths.partition(year_b));
    SankeyPair pair;
    pair.year_a = year_a;
    pair.year_b = year_b;
    pair.links = partition_overlap(a.assignment, a.nodes, b.assignment, b.nodes);
    pairs.push_back(std::move(pair));
  }
  Metadata meta = make_meta(config, "communities", 1);
  write_sankey_json(pairs, paths.sankey(), meta);
}

void do_decompose_year(const RunConfig& config, int year, bool force) {
  const OutPaths paths{config.out_dir};
  const std::vector<int> assignment =
      load_checked_partition(paths.partition(year), config);
  const auto members = large_communities(assignment, config.params.size_floor);

  static const char* kCsvParts[] = {"potentials_nodes", "potentials_country",
                                    "potentials_sector", "circular_nodes",
                                    "circular_country",  "circular_sector",
                                    "rankings_country",  "rankings_sector"};
  if (!force) {
    bool fresh = true;
    for (const auto& [id, nodes] : members) {
      for (const char* part : kCsvParts)
        fresh = fresh && file_fresh(paths.community_file(year, id, part, "csv"),
                                    config.config_hash);
      fresh = fresh && file_fresh(paths.community_file(year, id, "topk_country", "gexf"),
                                  config.config_hash) &&
              file_fresh(paths.community_file(year, id, "topk_sector", "gexf"),
                         config.config_hash);
    }
    if (fresh) {
      log_line("[decompose " + std::to_string(year) + "] cached");
      return;
    }
  }

  const FlowNetwork<double> ivan = load_checked_bin(paths.ivan_bin(year), config, "build");
  const FlowNetwork<double> gvan = load_checked_bin(paths.gvan_bin(year), config, "build");

  for (const auto& [id, node_ids] : members) {
    const CommunityAnalysis ca =
        analyze_community(id, node_ids, ivan, gvan, config.params, year);
    Metadata meta = make_meta(config, "decompose", 1);
    meta.extra.emplace_back("year", std::to_string(year));
    meta.extra.emplace_back("community", std::to_string(id));
    meta.extra.emplace_back("community_size", std::to_string(node_ids.size()));
    meta.extra.emplace_back("rank_level", config.params.rank_aggregate_first
                                              ? "aggregate-then-decompose"
                                              : "node-then-aggregate");

    write_potentials_csv(ca.node_decomp, paths.community_file(year, id, "potentials_nodes", "csv"),
                         meta);
    write_potentials_csv(ca.country_decomp,
                         paths.community_file(year, id, "potentials_country", "csv"), meta);
    write_potentials_csv(ca.sector_decomp,
                         paths.community_file(year, id, "potentials_sector", "csv"), meta);

    write_circular_csv(ca.node_decomp, &ca.node_bilateral,
                       paths.community_file(year, id, "circular_nodes", "csv"), meta);
    const Matrix<double> country_bilateral = bilateral_circulation(ca.country_net);
    write_circular_csv(ca.country_decomp, &country_bilateral,
                       paths.community_file(year, id, "circular_country", "csv"), meta);
    const Matrix<double> sector_bilateral = bilateral_circulation(ca.sector_net);
    write_circular_csv(ca.sector_decomp, &sector_bilateral,
                       paths.community_file(year, id, "circular_sector", "csv"), meta);

    write_rankings_csv(rank_potentials(ca.country_decomp, config.params.top_rank),
                       rank_circulation(ca.country_decomp, config.params.top_rank),
                       paths.community_file(year, id, "rankings_country", "csv"), meta);
    write_rankings_csv(rank_potentials(ca.sector_decomp, config.params.top_rank),
                       rank_circulation(ca.sector_decomp, config.params.top_rank),
                       paths.community_file(year, id, "rankings_sector", "csv"), meta);

    write_topk_circular_gexf(ca.country_decomp, config.params.top_links,
                             paths.community_file(year, id, "topk_country", "gexf"), meta);
    write_topk_circular_gexf(ca.sector_decomp, config.params.top_links,
                             paths.community_file(year, id, "topk_sector", "gexf"), meta);
  }
  log_line("[decompose " + std::to_string(year) + "] done (" + std::to_string(members.size()) +
           " communities)");
}

json report_to_json(const StructuralReport& report) {
  json j;
  j["nodes"] = report.nodes;
  j["links"] = report.links;
  j["density"] = report.density;
  j["reciprocity"] = report.reciprocity;
  j["clustering_coefficient"] = report.clustering_coefficient;
  j["diameter"] = report.diameter;
  j["average_path_length"] = report.average_path_length;
  j["average_betweenness"] = report.average_betweenness;
  j["assortativity"] = report.assortativity;
  j["assortativity_out_in"] = report.assortativity_out_in;
  j["assortativity_out_out"] = report.assortativity_out_out;
  j["assortativity_in_in"] = report.assortativity_in_in;
  j["assortativity_in_out"] = report.assortativity_in_out;
  j["average_in_degree"] = report.average_in_degree;
  j["average_out_degree"] = report.average_out_degree;
  j["averages_over_nonzero"] = report.averages_over_nonzero;
  j["all_pairs_reachable"] = report.all_pairs_reachable;
  j["reachable_pair_fraction"] = report.reachable_pair_fraction;
  return j;
}

void do_metrics_year(const RunConfig& config, int year, bool force) {
  const OutPaths paths{config.out_dir};
  if (!force && file_fresh(paths.metrics_json(year), config.config_hash) &&
      file_fresh(paths.ccdf(year, "in"), config.config_hash) &&
      file_fresh(paths.ccdf(year, "out"), config.config_hash)) {
    log_line("[metrics " + std::to_string(year) + "] cached");
    return;
  }
  const FlowNetwork<double> ivan = load_checked_bin(paths.ivan_bin(year), config, "build");
  const std::vector<int> assignment =
      load_checked_partition(paths.partition(year), config);
  if (!std::filesystem::exists(paths.scan(year)))
    throw std::runtime_error("missing scan " + paths.scan(year).string() +
                             "; run 'communities' first");
  const auto selected_k = load_scan_selected_k(paths.scan(year));

  json doc;
  doc["year"] = year;
  doc["networks"] = json::array();
  {
    json entry;
    entry["name"] = "ivan";
    entry["report"] = report_to_json(structural_report(ivan, config.workers));
    doc["networks"].push_back(std::move(entry));
  }
  if (selected_k) {
    const auto cut = threshold_top_k(ivan, *selected_k);
    std::vector<std::size_t> active;
    for (std::size_t a = 0; a < cut.size(); ++a) {
      const auto ai = static_cast<Eigen::Index>(a);
      if (cut.weights.row(ai).sum() > 0.0 || cut.weights.col(ai).sum() > 0.0)
        active.push_back(a);
    }
    const auto sub = restrict_network(cut, active, "cut");
    json entry;
    entry["name"] = "cut_ivan";
    entry["k"] = *selected_k;
    entry["active_nodes"] = active.size();
    entry["report"] = report_to_json(structural_report(sub, config.workers));
    doc["networks"].push_back(std::move(entry));
  }
  for (const auto& [id, node_ids] : large_communities(assignment, config.params.size_floor)) {
    const auto sub = restrict_network(ivan, node_ids, "community-" + std::to_string(id));
    json entry;
    entry["name"] = "community_" + std::to_string(id);
    entry["community"] = id;
    entry["report"] = report_to_json(structural_report(sub, config.workers));
    doc["networks"].push_back(std::move(entry));
  }

  const auto fit = strength_fit(ivan, config.log_base);
  json strength;
  strength["log_base"] = config.log_base == LogBase::natural ? "natural" : "base10";
  strength["mu_in"] = fit.mu_in;
  strength["sigma_in"] = fit.sigma_in;
  strength["mu_out"] = fit.mu_out;
  strength["sigma_out"] = fit.sigma_out;
  doc["strength_fit"] = std::move(strength);

  Metadata meta = make_meta(config, "metrics", 1);
  meta.extra.emplace_back("year", std::to_string(year));
  doc["metadata"] = json::parse("{}");
  doc["metadata"]["stage"] = meta.stage;
  doc["metadata"]["stage_version"] = meta.stage_version;
  doc["metadata"]["config_hash"] = meta.config_hash;
  doc["metadata"]["config"] = json::parse(meta.config_echo);
  doc["metadata"]["year"] = year;

  write_file_atomic(paths.metrics_json(year), doc.dump(2) + "\n");
  write_ccdf_csv(fit.ccdf_in, paths.ccdf(year, "in"), meta);
  write_ccdf_csv(fit.ccdf_out, paths.ccdf(year, "out"), meta);
  log_line("[metrics " + std::to_string(year) + "] done");
}

void do_integrate(const RunConfig& config, const RegionMap& regions,
                  std::vector<StageFailure>& failures) {
  const OutPaths paths{config.out_dir};
  std::vector<SeriesRow> series;
  std::vector<SectoralRow> sectoral;

  for (const auto& [year, manifest] : config.year_manifests) {
    (void)manifest;
    try {
      std::vector<NodeLabel> nodes;
      const std::vector<int> assignment =
          load_checked_partition(paths.partition(year), config, &nodes);
      const FlowNetwork<double> gvan =
          load_checked_bin(paths.gvan_bin(year), config, "build");
      const auto region_info = label_regions(assignment, nodes, regions);
      const auto members = large_communities(assignment, config.params.size_floor);

      for (const auto& [id, node_ids] : members) {
        const auto circular_path = paths.community_file(year, id, "circular_nodes", "csv");
        if (!std::filesystem::exists(circular_path))
          throw std::runtime_error("missing " + circular_path.string() +
                                   "; run 'decompose' first");
        if (sniff_config_hash(circular_path) != config.config_hash)
          throw std::runtime_error("stale " + circular_path.string() +
                                   " (config changed); rerun 'decompose'");
        const auto edges = load_circular_csv(circular_path);

        double numerator_net = 0.0, numerator_bilateral = 0.0;
        for (const auto& edge : edges) {
          numerator_net += edge.circular;
          numerator_bilateral += edge.circular + edge.bilateral;
        }
        double denominator = 0.0;
        if (config.params.restrict_denominator) {
          for (std::size_t a : node_ids)
            for (std::size_t b : node_ids)
              denominator += gvan.weights(static_cast<Eigen::Index>(a),
                                          static_cast<Eigen::Index>(b));
        } else {
          denominator = gvan.weights.sum();
        }

        std::string region;
        for (const auto& info : region_info)
          if (info.community == id) region = info.dominant_region;

        auto make_row = [&](double numerator, CirculationMode mode) {
          SeriesRow row;
          row.year = year;
          row.community = id;
          row.region = region;
          row.size = node_ids.size();
          row.numerator = numerator;
          row.denominator = denominator;
          if (denominator > 0.0) row.index = numerator / denominator;
          row.mode = to_string(mode);
          return row;
        };
        series.push_back(make_row(numerator_net, CirculationMode::net_only));
        series.push_back(make_row(numerator_bilateral, CirculationMode::net_plus_bilateral));

        // sectoral components: same-sector pairs only, sectors with >= 2
        // community nodes and positive GVAN flow
        std::map<std::string, std::vector<std::size_t>> sector_members;
        for (std::size_t a : node_ids) sector_members[nodes[a].sector].push_back(a);
        auto sector_of = [](const std::string& name) {
          const auto colon = name.find(':');
          return colon == std::string::npos ? std::string() : name.substr(colon + 1);
        };
        std::map<std::string, std::pair<double, double>> sector_numerators;
        for (const auto& edge : edges) {
          const std::string s = sector_of(edge.source);
          if (s.empty() || s != sector_of(edge.target)) continue;
          auto& [net_sum, bilateral_sum] = sector_numerators[s];
          net_sum += edge.circular;
          bilateral_sum += edge.circular + edge.bilateral;
        }
        for (const auto& [sector, group] : sector_members) {
          if (group.size() < 2) continue;
          double sector_denominator = 0.0;
          for (std::size_t a : group)
            for (std::size_t b : group)
              sector_denominator += gvan.weights(static_cast<Eigen::Index>(a),
                                                 static_cast<Eigen::Index>(b));
          if (sector_denominator <= 0.0) continue;
          const auto it = sector_numerators.find(sector);
          const double net_sum = it == sector_numerators.end() ? 0.0 : it->second.first;
          const double bilateral_sum =
              it == sector_numerators.end() ? 0.0 : it->second.second;
          sectoral.push_back({year, id, sector, net_sum / sector_denominator,
                              to_string(CirculationMode::net_only)});
          sectoral.push_back({year, id, sector, bilateral_sum / sector_denominator,
                              to_string(CirculationMode::net_plus_bilateral)});
        }
      }
    } catch (const std::exception& e) {
      failures.push_back({year, "integrate", e.what()});
      log_line("[integrate " + std::to_string(year) + "] failed: " + e.what());
    }
  }

  Metadata meta = make_meta(config, "integrate", 1);
  meta.extra.emplace_back("default_mode", to_string(config.params.mode));
  meta.extra.emplace_back("denominator", config.params.restrict_denominator
                                             ? "community-restricted"
                                             : "global");
  write_series_csv(series, paths.series(), meta);
  write_sectoral_csv(sectoral, paths.sectoral(), meta);
  log_line("[integrate] done (" + std::to_string(series.size()) + " rows)");
}

// --- year worker pool -----------------------------------------------------------

template <class Fn>
void pooled_years(const RunConfig& config, const std::string& stage, Fn fn,
                  std::vector<StageFailure>& failures) {
  std::mutex state_mutex;
  std::size_t next = 0;
  auto worker = [&]() {
    while (true) {
      std::size_t index;
      {
        std::lock_guard<std::mutex> lock(state_mutex);
        if (next >= config.year_manifests.size()) return;
        index = next++;
      }
      const auto& [year, manifest] = config.year_manifests[index];
      try {
        fn(year, manifest);
      } catch (const std::exception& e) {
        {
          std::lock_guard<std::mutex> lock(state_mutex);
          failures.push_back({year, stage, e.what()});
        }
        log_line("[" + stage + " " + std::to_string(year) + "] failed: " + e.what());
      }
    }
  };
  const int workers =
      std::max(1, std::min<int>(config.workers,
                                static_cast<int>(config.year_manifests.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& thread : pool) thread.join();
  }
}

}  // namespace

// --- config ----------------------------------------------------------------------

RunConfig RunConfig::load(const std::filesystem::path& config_path,
                          const std::optional<std::string>& out_override,
                          bool strict_override) {
  std::ifstream in(config_path);
  if (!in) throw std::runtime_error("cannot open config: " + config_path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error(config_path.string() + ": invalid JSON: " + e.what());
  }

  static const std::set<std::string> known_keys = {
      "manifests",      "regions_csv",  "drop_countries", "rel_tol",
      "strict",         "k_min",        "k_max",          "k_step",
      "size_floor",     "teleport_prob", "recorded_teleport", "seeds",
      "rng_seed",       "visit_tol",    "hhd_mode",       "rank_level",
      "global_denominator",             "log_base",       "top_rank",
      "top_links",      "out_dir"};
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (!known_keys.count(key))
      throw std::runtime_error(config_path.string() + ": unknown config key '" + key + "'");
  }

  RunConfig config;
  const auto base = config_path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path = p;
    return path.is_absolute() ? path : base / path;
  };

  if (!doc.contains("manifests") || !doc["manifests"].is_array() || doc["manifests"].empty())
    throw std::runtime_error(config_path.string() + ": 'manifests' must be a non-empty array");
  config.manifest_entries = doc["manifests"].get<std::vector<std::string>>();

  if (doc.contains("regions_csv")) {
    config.regions_entry = doc["regions_csv"].get<std::string>();
    config.regions_csv = resolve(config.regions_entry);
  }
  if (doc.contains("drop_countries")) {
    const auto drops = doc["drop_countries"].get<std::vector<std::string>>();
    config.drop_countries.insert(drops.begin(), drops.end());
  }
  config.rel_tol = doc.value("rel_tol", 1e-6);
  config.strict = doc.value("strict", false) || strict_override;
  config.params.k_min = doc.value("k_min", std::size_t(6500));
  config.params.k_max = doc.value("k_max", std::size_t(11000));
  config.params.k_step = doc.value("k_step", std::size_t(500));
  config.params.size_floor = doc.value("size_floor", std::size_t(240));
  config.params.teleport_prob = doc.value("teleport_prob", 0.15);
  config.params.recorded_teleport = doc.value("recorded_teleport", true);
  config.params.seeds = doc.value("seeds", 10);
  config.params.rng_seed = doc.value("rng_seed", std::uint64_t(1));
  config.params.visit_tol = doc.value("visit_tol", 1e-13);
  config.params.mode = parse_mode(doc.value("hhd_mode", std::string("net-only")));
  const std::string rank_level = doc.value("rank_level", std::string("aggregate-then-decompose"));
  if (rank_level == "aggregate-then-decompose")
    config.params.rank_aggregate_first = true;
  else if (rank_level == "node-then-aggregate")
    config.params.rank_aggregate_first = false;
  else
    throw std::runtime_error("config: unknown rank_level '" + rank_level + "'");
  config.params.restrict_denominator = !doc.value("global_denominator", false);
  config.log_base = parse_log_base(doc.value("log_base", std::string("natural")));
  config.params.top_rank = doc.value("top_rank", std::size_t(5));
  config.params.top_links = doc.value("top_links", std::size_t(20));
  config.out_dir = out_override ? std::filesystem::path(*out_override)
                                : std::filesystem::path(doc.value("out_dir", std::string("out")));

  if (const char* env = std::getenv("IVAN_WORKERS")) {
    const int workers = std::atoi(env);
    if (workers >= 1) config.workers = std::min(workers, 64);
  }

  // years from the manifests themselves; duplicates are configuration errors
  for (const auto& entry : config.manifest_entries) {
    const auto path = resolve(entry);
    std::ifstream manifest_in(path);
    if (!manifest_in) throw std::runtime_error("cannot open manifest: " + path.string());
    json manifest;
    try {
      manifest_in >> manifest;
    } catch (const json::exception& e) {
      throw std::runtime_error(path.string() + ": invalid JSON: " + e.what());
    }
    const int year = manifest.at("year").get<int>();
    for (const auto& [existing, p] : config.year_manifests) {
      (void)p;
      if (existing == year)
        throw std::runtime_error("duplicate year " + std::to_string(year) +
                                 " across manifests (one manifest per year)");
    }
    config.year_manifests.emplace_back(year, path);
  }
  std::sort(config.year_manifests.begin(), config.year_manifests.end());

  // canonical echo: analysis keys only, alphabetical via nlohmann's ordering
  json echo;
  echo["drop_countries"] = std::vector<std::string>(config.drop_countries.begin(),
                                                    config.drop_countries.end());
  echo["global_denominator"] = !config.params.restrict_denominator;
  echo["hhd_mode"] = to_string(config.params.mode);
  echo["k_max"] = config.params.k_max;
  echo["k_min"] = config.params.k_min;
  echo["k_step"] = config.params.k_step;
  echo["log_base"] = config.log_base == LogBase::natural ? "natural" : "base10";
  echo["manifests"] = config.manifest_entries;
  echo["rank_level"] = rank_level;
  echo["recorded_teleport"] = config.params.recorded_teleport;
  echo["regions_csv"] = config.regions_entry;
  echo["rel_tol"] = config.rel_tol;
  echo["rng_seed"] = config.params.rng_seed;
  echo["seeds"] = config.params.seeds;
  echo["size_floor"] = config.params.size_floor;
  echo["strict"] = config.strict;
  echo["teleport_prob"] = config.params.teleport_prob;
  echo["top_links"] = config.params.top_links;
  echo["top_rank"] = config.params.top_rank;
  echo["visit_tol"] = config.params.visit_tol;
  config.config_echo = echo.dump();
  config.config_hash = csv::hex64(csv::fnv1a64(config.config_echo));
  return config;
}

// --- dispatch ----------------------------------------------------------------------

PipelineResult run_pipeline(const RunConfig& config, const std::string& stage, bool force) {
  PipelineResult result;
  const OutPaths paths{config.out_dir};
  std::filesystem::create_directories(config.out_dir);
  write_file_atomic(paths.run_config(), json::parse(config.config_echo).dump(2) + "\n");

  RegionMap regions;
  if (!config.regions_csv.empty()) regions = load_region_map(config.regions_csv);

  const bool do_all = stage == "all";
  if (do_all || stage == "build" || stage == "communities" || stage == "decompose") {
    pooled_years(
        config, do_all ? "all" : stage,
        [&](int year, const std::filesystem::path& manifest) {
          if (do_all || stage == "build") do_build_year(config, year, manifest, force);
          if (do_all || stage == "communities")
            do_communities_year(config, year, regions, force);
          if (do_all || stage == "decompose") do_decompose_year(config, year, force);
        },
        result.failures);
  }
  if (do_all || stage == "communities") do_sankey(config);
  if (do_all || stage == "metrics") {
    for (const auto& [year, manifest] : config.year_manifests) {
      (void)manifest;
      bool already_failed = false;
      for (const auto& failure : result.failures) already_failed |= failure.year == year;
      if (already_failed) continue;
      try {
        do_metrics_year(config, year, force);
      } catch (const std::exception& e) {
        result.failures.push_back({year, "metrics", e.what()});
        log_line("[metrics " + std::to_string(year) + "] failed: " + e.what());
      }
    }
  }
  if (do_all || stage == "integrate") do_integrate(config, regions, result.failures);

  if (stage != "all" && stage != "build" && stage != "communities" && stage != "decompose" &&
      stage != "metrics" && stage != "integrate")
    throw std::runtime_error("unknown stage '" + stage + "'");
  return result;
}

}  // namespace ivan
