#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

#include "ivan/types.hpp"

namespace ivan {

/// Structural indices of one network. Path-based quantities treat the network
/// as unweighted and directed; clustering and assortativity use the
/// undirected projection. Degree and betweenness averages run over nodes with
/// nonzero values only.
struct StructuralReport {
  std::size_t nodes = 0;
  std::size_t links = 0;  // directed links, self-loops excluded
  double density = 0.0;
  double reciprocity = 0.0;
  double clustering_coefficient = 0.0;
  std::size_t diameter = 0;
  double average_path_length = 0.0;
  double average_betweenness = 0.0;
  double assortativity = 0.0;          // undirected projection
  double assortativity_out_in = 0.0;   // directed variants, labeled by
  double assortativity_out_out = 0.0;  // (source degree, target degree)
  double assortativity_in_in = 0.0;
  double assortativity_in_out = 0.0;
  double average_in_degree = 0.0;   // over nodes with in-degree > 0
  double average_out_degree = 0.0;  // over nodes with out-degree > 0
  bool averages_over_nonzero = true;
  bool all_pairs_reachable = true;  // false: path metrics cover reachable pairs only
  double reachable_pair_fraction = 1.0;
};

namespace detail {

struct UnweightedGraph {
  std::size_t n = 0;
  std::vector<std::vector<int>> out, in;
  std::vector<std::vector<std::uint64_t>> undirected_bits;  // adjacency masks
  std::vector<int> degree;                                  // undirected

  bool undirected_edge(std::size_t a, std::size_t b) const {
    return (undirected_bits[a][b >> 6] >> (b & 63)) & 1u;
  }
};

template <class Scalar>
UnweightedGraph unweighted_view(const FlowNetwork<Scalar>& net) {
  UnweightedGraph g;
  g.n = net.size();
  g.out.resize(g.n);
  g.in.resize(g.n);
  const std::size_t words = (g.n + 63) / 64;
  g.undirected_bits.assign(g.n, std::vector<std::uint64_t>(words, 0));
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < g.n; ++j) {
      if (i == j) continue;
      if (net.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > Scalar(0)) {
        g.out[i].push_back(static_cast<int>(j));
        g.in[j].push_back(static_cast<int>(i));
        g.undirected_bits[i][j >> 6] |= std::uint64_t(1) << (j & 63);
        g.undirected_bits[j][i >> 6] |= std::uint64_t(1) << (i & 63);
      }
    }
  g.degree.resize(g.n);
  for (std::size_t i = 0; i < g.n; ++i) {
    int degree = 0;
    for (auto word : g.undirected_bits[i]) degree += std::popcount(word);
    g.degree[i] = degree;
  }
  return g;
}

/// Per-source BFS results folded together: distance sums, eccentricity, and
/// Brandes dependency accumulation for betweenness.
struct PathAccumulator {
  std::vector<double> betweenness;
  double distance_sum = 0.0;
  std::size_t reachable_pairs = 0;
  std::size_t eccentricity = 0;

  explicit PathAccumulator(std::size_t n) : betweenness(n, 0.0) {}

  void merge(const PathAccumulator& other) {
    for (std::size_t i = 0; i < betweenness.size(); ++i) betweenness[i] += other.betweenness[i];
    distance_sum += other.distance_sum;
    reachable_pairs += other.reachable_pairs;
    eccentricity = std::max(eccentricity, other.eccentricity);
  }
};

inline void bfs_brandes(const UnweightedGraph& g, int source, PathAccumulator& acc,
                        std::vector<int>& dist, std::vector<double>& sigma,
                        std::vector<double>& delta, std::vector<int>& order) {
  const int unreachable = -1;
  std::fill(dist.begin(), dist.end(), unreachable);
  std::fill(sigma.begin(), sigma.end(), 0.0);
  std::fill(delta.begin(), delta.end(), 0.0);
  order.clear();

  dist[static_cast<std::size_t>(source)] = 0;
  sigma[static_cast<std::size_t>(source)] = 1.0;
  std::size_t head = 0;
  order.push_back(source);
  while (head < order.size()) {
    const int v = order[head++];
    for (int w : g.out[static_cast<std::size_t>(v)]) {
      if (dist[static_cast<std::size_t>(w)] == unreachable) {
        dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(v)] + 1;
        order.push_back(w);
      }
      if (dist[static_cast<std::size_t>(w)] == dist[static_cast<std::size_t>(v)] + 1)
        sigma[static_cast<std::size_t>(w)] += sigma[static_cast<std::size_t>(v)];
    }
  }

  for (std::size_t k = 1; k < order.size(); ++k) {
    const int d = dist[static_cast<std::size_t>(order[k])];
    acc.distance_sum += d;
    ++acc.reachable_pairs;
    acc.eccentricity = std::max(acc.eccentricity, static_cast<std::size_t>(d));
  }

  // dependency accumulation in reverse BFS order via in-neighbors
  for (std::size_t k = order.size(); k-- > 1;) {
    const int w = order[k];
    for (int v : g.in[static_cast<std::size_t>(w)]) {
      if (dist[static_cast<std::size_t>(v)] != unreachable &&
          dist[static_cast<std::size_t>(v)] + 1 == dist[static_cast<std::size_t>(w)]) {
        delta[static_cast<std::size_t>(v)] +=
            sigma[static_cast<std::size_t>(v)] / sigma[static_cast<std::size_t>(w)] *
            (1.0 + delta[static_cast<std::size_t>(w)]);
      }
    }
    if (w != source) acc.betweenness[static_cast<std::size_t>(w)] += delta[static_cast<std::size_t>(w)];
  }
}

/// Pearson correlation of (x, y) pairs; NaN when either variance vanishes.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

/// All eleven structural indices. BFS work is split into fixed 64-source
/// blocks merged in block order, so results are identical for any thread
/// count.
template <class Scalar>
StructuralReport structural_report(const FlowNetwork<Scalar>& net, int threads = 1) {
  const std::size_t n = net.size();
  if (n == 0) throw std::invalid_argument("structural_report: empty network");
  const auto g = detail::unweighted_view(net);

  StructuralReport report;
  report.nodes = n;
  std::size_t links = 0, mutual = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (int j : g.out[i]) {
      ++links;
      const auto ji = static_cast<std::size_t>(j);
      if (std::find(g.out[ji].begin(), g.out[ji].end(), static_cast<int>(i)) != g.out[ji].end())
        ++mutual;
    }
  report.links = links;
  report.density = n > 1 ? static_cast<double>(links) / (static_cast<double>(n) *
                                                         static_cast<double>(n - 1))
                         : 0.0;
  report.reciprocity = links > 0 ? static_cast<double>(mutual) / static_cast<double>(links) : 0.0;

  // clustering on the undirected projection; k < 2 contributes zero
  double clustering_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int k = g.degree[i];
    if (k < 2) continue;
    std::size_t connected_ordered_pairs = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !g.undirected_edge(i, j)) continue;
      for (std::size_t word = 0; word < g.undirected_bits[i].size(); ++word) {
        std::uint64_t both = g.undirected_bits[i][word] & g.undirected_bits[j][word];
        if (word == (i >> 6)) both &= ~(std::uint64_t(1) << (i & 63));
        if (word == (j >> 6)) both &= ~(std::uint64_t(1) << (j & 63));
        connected_ordered_pairs += static_cast<std::size_t>(std::popcount(both));
      }
    }
    clustering_sum += static_cast<double>(connected_ordered_pairs) /
                      (static_cast<double>(k) * static_cast<double>(k - 1));
  }
  report.clustering_coefficient = clustering_sum / static_cast<double>(n);

  // path metrics and betweenness, blocked for deterministic reduction
  const std::size_t block_size = 64;
  const std::size_t block_count = (n + block_size - 1) / block_size;
  std::vector<detail::PathAccumulator> blocks(block_count, detail::PathAccumulator(n));
  const int worker_count = std::max(1, threads);
  std::size_t next_block = 0;
  std::mutex queue_mutex;
  auto run_blocks = [&]() {
    std::vector<int> dist(n), order;
    std::vector<double> sigma(n), delta(n);
    order.reserve(n);
    while (true) {
      std::size_t block;
      {
        std::lock_guard<std::mutex> lock(queue_mutex);
        if (next_block >= block_count) return;
        block = next_block++;
      }
      const std::size_t begin = block * block_size;
      const std::size_t end = std::min(n, begin + block_size);
      for (std::size_t s = begin; s < end; ++s)
        detail::bfs_brandes(g, static_cast<int>(s), blocks[block], dist, sigma, delta, order);
    }
  };
  if (worker_count == 1) {
    run_blocks();
  } else {
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(worker_count));
    for (int t = 0; t < worker_count; ++t) workers.emplace_back(run_blocks);
    for (auto& w : workers) w.join();
  }

  detail::PathAccumulator total(n);
  for (const auto& block : blocks) total.merge(block);  // fixed order

  const std::size_t ordered_pairs = n > 1 ? n * (n - 1) : 0;
  report.reachable_pair_fraction =
      ordered_pairs > 0
          ? static_cast<double>(total.reachable_pairs) / static_cast<double>(ordered_pairs)
          : 1.0;
  report.all_pairs_reachable = total.reachable_pairs == ordered_pairs;
  report.diameter = total.eccentricity;
  report.average_path_length =
      total.reachable_pairs > 0
          ? total.distance_sum / static_cast<double>(total.reachable_pairs)
          : 0.0;

  double betweenness_sum = 0.0;
  std::size_t betweenness_nonzero = 0;
  for (double b : total.betweenness)
    if (b > 0.0) {
      betweenness_sum += b;
      ++betweenness_nonzero;
    }
  report.average_betweenness =
      betweenness_nonzero > 0 ? betweenness_sum / static_cast<double>(betweenness_nonzero) : 0.0;

  std::size_t in_nonzero = 0, out_nonzero = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!g.in[i].empty()) ++in_nonzero;
    if (!g.out[i].empty()) ++out_nonzero;
  }
  report.average_in_degree =
      in_nonzero > 0 ? static_cast<double>(links) / static_cast<double>(in_nonzero) : 0.0;
  report.average_out_degree =
      out_nonzero > 0 ? static_cast<double>(links) / static_cast<double>(out_nonzero) : 0.0;

  // assortativity: undirected uses both orientations of each projected edge
  {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && g.undirected_edge(i, j)) {
          x.push_back(static_cast<double>(g.degree[i]));
          y.push_back(static_cast<double>(g.degree[j]));
        }
    report.assortativity = detail::pearson(x, y);
  }
  {
    std::vector<double> src_out, src_in, dst_out, dst_in;
    for (std::size_t i = 0; i < n; ++i)
      for (int j : g.out[i]) {
        const auto ji = static_cast<std::size_t>(j);
        src_out.push_back(static_cast<double>(g.out[i].size()));
        src_in.push_back(static_cast<double>(g.in[i].size()));
        dst_out.push_back(static_cast<double>(g.out[ji].size()));
        dst_in.push_back(static_cast<double>(g.in[ji].size()));
      }
    report.assortativity_out_in = detail::pearson(src_out, dst_in);
    report.assortativity_out_out = detail::pearson(src_out, dst_out);
    report.assortativity_in_in = detail::pearson(src_in, dst_in);
    report.assortativity_in_out = detail::pearson(src_in, dst_out);
  }
  return report;
}

enum class LogBase { natural, base10 };

/// Log-strength moments and complementary CDF points of the in/out strength
/// distributions. Moments use strictly positive strengths; sigma is the
/// population standard deviation.
template <class Scalar = double>
struct StrengthFit {
  Vector<Scalar> in_strength;
  Vector<Scalar> out_strength;
  double mu_in = 0.0, sigma_in = 0.0;
  double mu_out = 0.0, sigma_out = 0.0;
  LogBase base = LogBase::natural;
  std::vector<std::pair<double, double>> ccdf_in;   // (strength, P(S >= strength))
  std::vector<std::pair<double, double>> ccdf_out;
};

namespace detail {

inline void log_moments(const std::vector<double>& values, LogBase base, double* mu,
                        double* sigma) {
  std::vector<double> logs;
  logs.reserve(values.size());
  for (double v : values)
    if (v > 0.0) logs.push_back(base == LogBase::natural ? std::log(v) : std::log10(v));
  if (logs.empty()) throw std::runtime_error("strength_fit: all strengths are zero");
  double mean = 0.0;
  for (double l : logs) mean += l;
  mean /= static_cast<double>(logs.size());
  double var = 0.0;
  for (double l : logs) var += (l - mean) * (l - mean);
  var /= static_cast<double>(logs.size());
  *mu = mean;
  *sigma = std::sqrt(var);
}

inline std::vector<std::pair<double, double>> ccdf_points(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, double>> points;
  const auto n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0 && values[i] == values[i - 1]) continue;  // one point per distinct value
    points.emplace_back(values[i], static_cast<double>(values.size() - i) / n);
  }
  return points;
}

}  // namespace detail

template <class Scalar>
StrengthFit<Scalar> strength_fit(const FlowNetwork<Scalar>& net, LogBase base = LogBase::natural) {
  StrengthFit<Scalar> fit;
  fit.base = base;
  fit.in_strength = net.weights.colwise().sum().transpose();
  fit.out_strength = net.weights.rowwise().sum();
  std::vector<double> in_values, out_values;
  for (Eigen::Index i = 0; i < fit.in_strength.size(); ++i) {
    in_values.push_back(static_cast<double>(fit.in_strength(i)));
    out_values.push_back(static_cast<double>(fit.out_strength(i)));
  }
  detail::log_moments(in_values, base, &fit.mu_in, &fit.sigma_in);
  detail::log_moments(out_values, base, &fit.mu_out, &fit.sigma_out);
  std::vector<double> in_positive, out_positive;
  for (double v : in_values)
    if (v > 0.0) in_positive.push_back(v);
  for (double v : out_values)
    if (v > 0.0) out_positive.push_back(v);
  fit.ccdf_in = detail::ccdf_points(std::move(in_positive));
  fit.ccdf_out = detail::ccdf_points(std::move(out_positive));
  return fit;
}

}  // namespace ivan
