#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ivan/ingest.hpp"
#include "ivan/types.hpp"

namespace testutil {

inline std::filesystem::path fixtures_dir() {
  if (const char* env = std::getenv("IVAN_FIXTURES_DIR")) return env;
  return std::filesystem::path("tests") / "fixtures";
}

inline ivan::IOTable<double> load_toy6() {
  return ivan::load_io_table(fixtures_dir() / "toy6" / "manifest.json");
}

inline ivan::IOTable<double> load_blocky8() {
  return ivan::load_io_table(fixtures_dir() / "blocky8" / "manifest.json");
}

inline ivan::RegionMap toy_regions() {
  return ivan::load_region_map(fixtures_dir() / "regions_toy.csv");
}

/// Fresh scratch directory under the system temp root.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("ivan_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Directed weighted network with the given link density; weights uniform in
/// (0.1, 1.1). Guarantees at least one link.
inline ivan::FlowNetwork<double> random_network(std::size_t n, double density,
                                                std::mt19937_64& rng,
                                                bool allow_self_loops = false) {
  ivan::FlowNetwork<double> net;
  net.kind = ivan::NetworkKind::subnetwork;
  for (std::size_t i = 0; i < n; ++i)
    net.nodes.push_back({"N" + std::to_string(i), "s"});
  net.weights = ivan::Matrix<double>::Zero(static_cast<Eigen::Index>(n),
                                           static_cast<Eigen::Index>(n));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_real_distribution<double> weight(0.1, 1.1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j && !allow_self_loops) continue;
      if (coin(rng) < density)
        net.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = weight(rng);
    }
  if (net.weights.sum() == 0.0) net.weights(0, n > 1 ? 1 : 0) = 1.0;
  return net;
}

/// Two complete 30-node blocks with heavy internal weights and sparse weak
/// cross links.
inline ivan::FlowNetwork<double> planted_two_blocks(std::size_t block = 30,
                                                    double weight_ratio = 10.0,
                                                    std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> inside(0.9 * weight_ratio, 1.1 * weight_ratio);
  std::uniform_real_distribution<double> cross(0.9, 1.1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const std::size_t n = 2 * block;
  ivan::FlowNetwork<double> net;
  for (std::size_t i = 0; i < n; ++i)
    net.nodes.push_back({"N" + std::to_string(i), "s"});
  net.weights = ivan::Matrix<double>::Zero(static_cast<Eigen::Index>(n),
                                           static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool same_block = (i < block) == (j < block);
      if (same_block)
        net.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = inside(rng);
      else if (coin(rng) < 0.2)
        net.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cross(rng);
    }
  return net;
}

/// Small directed network from an explicit edge list.
inline ivan::FlowNetwork<double> network_from_edges(
    std::size_t n, const std::vector<std::tuple<int, int, double>>& edges) {
  ivan::FlowNetwork<double> net;
  for (std::size_t i = 0; i < n; ++i)
    net.nodes.push_back({"N" + std::to_string(i), "s"});
  net.weights = ivan::Matrix<double>::Zero(static_cast<Eigen::Index>(n),
                                           static_cast<Eigen::Index>(n));
  for (const auto& [i, j, w] : edges) net.weights(i, j) = w;
  return net;
}

/// Set-partition equality up to community relabeling.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

}  // namespace testutil
