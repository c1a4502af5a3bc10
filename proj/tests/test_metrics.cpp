#include <doctest.h>

#include <cmath>
#include <random>

#include "ivan/metrics.hpp"
#include "support/helpers.hpp"

using namespace ivan;

namespace {

/// Brute-force betweenness: Floyd-Warshall distances plus DP path counting.
std::vector<double> betweenness_bruteforce(const FlowNetwork<double>& net) {
  const std::size_t n = net.size();
  const double inf = 1e18;
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, inf));
  std::vector<std::vector<double>> paths(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    dist[i][i] = 0.0;
    paths[i][i] = 1.0;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && net.weights(static_cast<Eigen::Index>(i),
                                static_cast<Eigen::Index>(j)) > 0.0) {
        dist[i][j] = 1.0;
        paths[i][j] = 1.0;
      }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j || i == k || j == k) continue;
        const double through = dist[i][k] + dist[k][j];
        if (through < dist[i][j] - 1e-9) {
          dist[i][j] = through;
          paths[i][j] = paths[i][k] * paths[k][j];
        } else if (std::abs(through - dist[i][j]) < 1e-9 && dist[i][j] < inf) {
          paths[i][j] += paths[i][k] * paths[k][j];
        }
      }
  std::vector<double> betweenness(n, 0.0);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = 0; t < n; ++t) {
        if (s == t || s == v || t == v) continue;
        if (dist[s][t] >= inf || paths[s][t] == 0.0) continue;
        if (std::abs(dist[s][v] + dist[v][t] - dist[s][t]) < 1e-9)
          betweenness[v] += paths[s][v] * paths[v][t] / paths[s][t];
      }
  return betweenness;
}

double average_nonzero(const std::vector<double>& values) {
  double sum = 0.0;
  std::size_t count = 0;
  for (double v : values)
    if (v > 0.0) {
      sum += v;
      ++count;
    }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("complete directed graph: density, reciprocity and diameter are one") {
  std::vector<std::tuple<int, int, double>> edges;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      if (i != j) edges.emplace_back(i, j, 1.0 + i + j);
  const auto report = structural_report(testutil::network_from_edges(6, edges));
  CHECK(report.density == 1.0);
  CHECK(report.reciprocity == 1.0);
  CHECK(report.diameter == 1);
  CHECK(report.average_path_length == 1.0);
  CHECK(report.clustering_coefficient == 1.0);
  CHECK(report.average_betweenness == 0.0);  // nobody mediates anything
  CHECK(report.average_in_degree == 5.0);
  CHECK(report.average_out_degree == 5.0);
  CHECK(report.all_pairs_reachable);
  CHECK(std::isnan(report.assortativity));  // regular graph: zero degree variance
}

TEST_CASE("two-node reciprocity cases") {
  const auto mutual = testutil::network_from_edges(2, {{0, 1, 1.0}, {1, 0, 2.0}});
  CHECK(structural_report(mutual).reciprocity == 1.0);
  const auto one_way = testutil::network_from_edges(3, {{0, 1, 1.0}, {1, 2, 1.0}});
  CHECK(structural_report(one_way).reciprocity == 0.0);
}

TEST_CASE("density times n(n-1) is exactly the link count") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 8; ++trial) {
    const auto net = testutil::random_network(10, 0.3, rng);
    const auto report = structural_report(net);
    CHECK(report.density * 10.0 * 9.0 == doctest::Approx(static_cast<double>(report.links))
                                             .epsilon(1e-12));
  }
}

TEST_CASE("self-loops do not count as structural links") {
  auto net = testutil::network_from_edges(3, {{0, 1, 1.0}, {1, 0, 1.0}});
  net.weights(0, 0) = 100.0;
  const auto report = structural_report(net);
  CHECK(report.links == 2);
}

TEST_CASE("symmetric networks have reciprocity one, tournaments zero") {
  std::mt19937_64 rng(9);
  auto symmetric = testutil::random_network(9, 0.4, rng);
  symmetric.weights = (symmetric.weights + symmetric.weights.transpose()).eval();
  CHECK(structural_report(symmetric).reciprocity == 1.0);

  FlowNetwork<double> tournament;
  for (int i = 0; i < 7; ++i) tournament.nodes.push_back({"N" + std::to_string(i), "s"});
  tournament.weights = Matrix<double>::Zero(7, 7);
  for (int i = 0; i < 7; ++i)
    for (int j = i + 1; j < 7; ++j) tournament.weights(i, j) = 1.0;
  CHECK(structural_report(tournament).reciprocity == 0.0);
}

TEST_CASE("path metrics on a directed 4-cycle") {
  const auto net = testutil::network_from_edges(
      4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {3, 0, 1.0}});
  const auto report = structural_report(net);
  CHECK(report.diameter == 3);
  CHECK(report.average_path_length == doctest::Approx(2.0).epsilon(1e-12));
  // every node sits on the unique paths between the others: delta = 1+2/1... rely on oracle
  const auto brute = betweenness_bruteforce(net);
  CHECK(report.average_betweenness == doctest::Approx(average_nonzero(brute)).epsilon(1e-12));
}

TEST_CASE("disconnected networks flag partial reachability") {
  const auto net = testutil::network_from_edges(4, {{0, 1, 1.0}, {2, 3, 1.0}});
  const auto report = structural_report(net);
  CHECK_FALSE(report.all_pairs_reachable);
  CHECK(report.reachable_pair_fraction == doctest::Approx(2.0 / 12.0));
  CHECK(report.diameter == 1);  // over reachable pairs only
  CHECK(report.average_path_length == 1.0);
}

TEST_CASE("betweenness matches the brute-force path enumeration") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 5 + static_cast<std::size_t>(trial) * 2;  // up to 23 nodes
    const auto net = testutil::random_network(n, 0.25, rng);
    const auto report = structural_report(net);
    const auto brute = betweenness_bruteforce(net);
    CHECK(report.average_betweenness ==
          doctest::Approx(average_nonzero(brute)).epsilon(1e-9));
  }
}

TEST_CASE("betweenness is identical across thread counts") {
  std::mt19937_64 rng(321);
  const auto net = testutil::random_network(40, 0.2, rng);
  const auto sequential = structural_report(net, 1);
  const auto threaded = structural_report(net, 4);
  CHECK(sequential.average_betweenness == threaded.average_betweenness);
  CHECK(sequential.average_path_length == threaded.average_path_length);
  CHECK(sequential.diameter == threaded.diameter);
}

TEST_CASE("assortativity stays within [-1, 1] and matches direct Pearson") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 8; ++trial) {
    const auto net = testutil::random_network(12, 0.3, rng);
    const auto report = structural_report(net);
    if (!std::isnan(report.assortativity)) {
      CHECK(report.assortativity >= -1.0 - 1e-12);
      CHECK(report.assortativity <= 1.0 + 1e-12);
    }
    // direct undirected Pearson with excess degrees (shift leaves r unchanged)
    const auto g = detail::unweighted_view(net);
    std::vector<double> x, y;
    for (std::size_t i = 0; i < net.size(); ++i)
      for (std::size_t j = 0; j < net.size(); ++j)
        if (i != j && g.undirected_edge(i, j)) {
          x.push_back(g.degree[i] - 1.0);
          y.push_back(g.degree[j] - 1.0);
        }
    const double direct = detail::pearson(x, y);
    if (std::isnan(report.assortativity))
      CHECK(std::isnan(direct));
    else
      CHECK(report.assortativity == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("star graph is maximally disassortative") {
  std::vector<std::tuple<int, int, double>> edges;
  for (int leaf = 1; leaf < 6; ++leaf) {
    edges.emplace_back(0, leaf, 1.0);
    edges.emplace_back(leaf, 0, 1.0);
  }
  const auto report = structural_report(testutil::network_from_edges(6, edges));
  CHECK(report.assortativity == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("degree averages run over nonzero values only") {
  // node 3 is isolated: it must not dilute the averages
  const auto net = testutil::network_from_edges(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 0, 1.0}});
  const auto report = structural_report(net);
  CHECK(report.average_in_degree == 1.0);
  CHECK(report.average_out_degree == 1.0);
  CHECK(report.averages_over_nonzero);
}

TEST_CASE("strength moments: constant strengths give mu = log c, sigma = 0") {
  const auto net = testutil::network_from_edges(
      3, {{0, 1, 7.0}, {1, 2, 7.0}, {2, 0, 7.0}});
  const auto fit = strength_fit(net);
  CHECK(fit.mu_in == doctest::Approx(std::log(7.0)).epsilon(1e-12));
  CHECK(fit.sigma_in == doctest::Approx(0.0));
  CHECK(fit.mu_out == doctest::Approx(std::log(7.0)).epsilon(1e-12));
  const auto fit10 = strength_fit(net, LogBase::base10);
  CHECK(fit10.mu_in == doctest::Approx(std::log10(7.0)).epsilon(1e-12));
}

TEST_CASE("strengths e and e^3 give mu = 2, sigma = 1 (population)") {
  const double e1 = std::exp(1.0), e3 = std::exp(3.0);
  const auto net = testutil::network_from_edges(2, {{0, 1, e1}, {1, 0, e3}});
  const auto fit = strength_fit(net);
  CHECK(fit.mu_in == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.sigma_in == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.mu_out == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.sigma_out == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("scaling weights shifts mu by log c and leaves sigma alone") {
  std::mt19937_64 rng(55);
  const auto net = testutil::random_network(10, 0.4, rng);
  auto scaled = net;
  scaled.weights *= 250.0;
  const auto base = strength_fit(net);
  const auto big = strength_fit(scaled);
  CHECK(big.mu_in == doctest::Approx(base.mu_in + std::log(250.0)).epsilon(1e-10));
  CHECK(big.sigma_in == doctest::Approx(base.sigma_in).epsilon(1e-10));
  CHECK(big.mu_out == doctest::Approx(base.mu_out + std::log(250.0)).epsilon(1e-10));
  CHECK(big.sigma_out == doctest::Approx(base.sigma_out).epsilon(1e-10));
}

TEST_CASE("zero-strength nodes are excluded; all-zero strengths are an error") {
  const auto net = testutil::network_from_edges(3, {{0, 1, 4.0}});
  const auto fit = strength_fit(net);  // only one positive in-strength
  CHECK(fit.mu_in == doctest::Approx(std::log(4.0)));
  CHECK(fit.sigma_in == 0.0);
  FlowNetwork<double> empty = net;
  empty.weights.setZero();
  CHECK_THROWS_WITH_AS(strength_fit(empty), doctest::Contains("all strengths"),
                       std::runtime_error);
}

TEST_CASE("ccdf starts at one and decreases to 1/n") {
  const auto net = testutil::network_from_edges(
      4, {{0, 1, 1.0}, {1, 2, 2.0}, {2, 3, 4.0}, {3, 0, 8.0}});
  const auto fit = strength_fit(net);
  REQUIRE_FALSE(fit.ccdf_in.empty());
  CHECK(fit.ccdf_in.front().second == 1.0);
  CHECK(fit.ccdf_in.back().second == doctest::Approx(0.25));
  for (std::size_t i = 1; i < fit.ccdf_in.size(); ++i) {
    CHECK(fit.ccdf_in[i].first > fit.ccdf_in[i - 1].first);
    CHECK(fit.ccdf_in[i].second < fit.ccdf_in[i - 1].second);
  }
}

}  // TEST_SUITE
