#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ivan/community.hpp"
#include "ivan/hhd.hpp"
#include "ivan/integration.hpp"
#include "ivan/metrics.hpp"
#include "ivan/types.hpp"

namespace ivan {

/// Header block stamped into every output file: stage id/version, the config
/// hash, the canonical config itself, plus stage-specific key/value pairs.
struct Metadata {
  std::string stage;
  int stage_version = 1;
  std::string config_hash;
  std::string config_echo;  // canonical one-line JSON
  std::vector<std::pair<std::string, std::string>> extra;

  std::string csv_header() const;
  std::string gexf_description() const;
};

/// Writes via a temp file plus rename so readers never observe partial files.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// First config_hash found in a file's metadata ('#' lines, JSON metadata
/// object, or GEXF description); empty when absent or unreadable.
std::string sniff_config_hash(const std::filesystem::path& path);

// --- network exports -------------------------------------------------------

void write_edge_csv(const FlowNetwork<double>& net, const std::filesystem::path& path,
                    const Metadata& meta);

void write_gexf(const FlowNetwork<double>& net, const std::filesystem::path& path,
                const Metadata& meta);

/// GEXF of the k largest circular-flow pairs, oriented along the positive
/// direction; node size attribute is sqrt(degree) within the exported graph.
void write_topk_circular_gexf(const HodgeDecomposition<double>& dec, std::size_t k,
                              const std::filesystem::path& path, const Metadata& meta);

// --- community exports ------------------------------------------------------

void write_partition_csv(const std::vector<int>& assignment,
                         const std::vector<NodeLabel>& nodes,
                         const std::vector<CommunityRegionInfo>& regions,
                         const std::filesystem::path& path, const Metadata& meta);

struct PartitionFile {
  std::vector<NodeLabel> nodes;
  std::vector<int> assignment;
};
PartitionFile load_partition_csv(const std::filesystem::path& path);

void write_scan_csv(const ScanResult& scan, const std::filesystem::path& path,
                    const Metadata& meta);
std::optional<std::size_t> load_scan_selected_k(const std::filesystem::path& path);

struct SankeyPair {
  int year_a = 0;
  int year_b = 0;
  std::vector<OverlapLink> links;
};
void write_sankey_json(const std::vector<SankeyPair>& pairs, const std::filesystem::path& path,
                       const Metadata& meta);

// --- decomposition exports --------------------------------------------------

void write_potentials_csv(const HodgeDecomposition<double>& dec,
                          const std::filesystem::path& path, const Metadata& meta);

/// One row per connected unordered pair, oriented so circular_flow >= 0.
void write_circular_csv(const HodgeDecomposition<double>& dec, const Matrix<double>* bilateral,
                        const std::filesystem::path& path, const Metadata& meta);

struct CircularEdge {
  std::string source, target;
  double circular = 0.0;
  double bilateral = 0.0;
};
std::vector<CircularEdge> load_circular_csv(const std::filesystem::path& path);

void write_rankings_csv(const PotentialRanking& potentials,
                        const std::vector<RankedEntry>& circulation,
                        const std::filesystem::path& path, const Metadata& meta);

// --- metrics and integration exports ----------------------------------------

void write_ccdf_csv(const std::vector<std::pair<double, double>>& points,
                    const std::filesystem::path& path, const Metadata& meta);

struct SeriesRow {
  int year = 0;
  int community = 0;
  std::string region;
  std::size_t size = 0;
  std::optional<double> index;
  double numerator = 0.0;
  double denominator = 0.0;
  std::string mode;
};
void write_series_csv(const std::vector<SeriesRow>& rows, const std::filesystem::path& path,
                      const Metadata& meta);

struct SectoralRow {
  int year = 0;
  int community = 0;
  std::string sector;
  double index = 0.0;
  std::string mode;
};
void write_sectoral_csv(const std::vector<SectoralRow>& rows,
                        const std::filesystem::path& path, const Metadata& meta);

// --- binary network cache ----------------------------------------------------

void save_network_bin(const FlowNetwork<double>& net, int year,
                      const std::filesystem::path& path, const std::string& config_hash);

struct CachedNetwork {
  FlowNetwork<double> net;
  int year = 0;
  std::string config_hash;
};
CachedNetwork load_network_bin(const std::filesystem::path& path);

/// Config hash from a cache file's header without loading the matrix; empty
/// when the file is missing or malformed.
std::string read_network_bin_hash(const std::filesystem::path& path);

}  // namespace ivan
