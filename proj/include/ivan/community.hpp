#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ivan/types.hpp"
#include "ivan/van.hpp"

namespace ivan {

/// Stationary visit rates of a random walk that follows link weights with
/// probability 1 - tau and teleports uniformly with probability tau; nodes
/// with no outgoing weight teleport uniformly on every step.
template <class Scalar = double>
struct VisitDistribution {
  Vector<Scalar> p;
  Scalar teleport_prob = Scalar(0.15);
  int iterations = 0;
  Scalar residual = Scalar(0);  // final L1 change
};

template <class Scalar>
VisitDistribution<Scalar> stationary_visits(const FlowNetwork<Scalar>& net, Scalar teleport_prob,
                                            Scalar tol = Scalar(1e-13), int max_iter = 100000) {
  const Eigen::Index n = static_cast<Eigen::Index>(net.size());
  if (!(teleport_prob > Scalar(0) && teleport_prob < Scalar(1)))
    throw std::invalid_argument("stationary_visits: teleport_prob must lie in (0, 1)");
  if (n == 0 || net.weights.sum() <= Scalar(0))
    throw std::invalid_argument("stationary_visits: network has no links");

  Vector<Scalar> out_strength = net.weights.rowwise().sum();
  Matrix<Scalar> row_normalized = Matrix<Scalar>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (out_strength(i) > Scalar(0)) row_normalized.row(i) = net.weights.row(i) / out_strength(i);

  VisitDistribution<Scalar> visits;
  visits.teleport_prob = teleport_prob;
  Vector<Scalar> p = Vector<Scalar>::Constant(n, Scalar(1) / Scalar(n));
  Vector<Scalar> next(n);
  for (int it = 1; it <= max_iter; ++it) {
    // mass that teleports: tau share of walkers on regular nodes, all of the
    // walkers sitting on dangling nodes
    Scalar teleport_mass = Scalar(0);
    for (Eigen::Index i = 0; i < n; ++i)
      teleport_mass += (out_strength(i) > Scalar(0)) ? teleport_prob * p(i) : p(i);
    next = (Scalar(1) - teleport_prob) * (row_normalized.transpose() * p);
    next.array() += teleport_mass / Scalar(n);
    const Scalar change = (next - p).template lpNorm<1>();
    p = next;
    visits.iterations = it;
    visits.residual = change;
    if (change < tol) break;
  }
  if (visits.residual >= tol)
    throw std::runtime_error("stationary_visits: no convergence after " +
                             std::to_string(max_iter) + " iterations, residual " +
                             std::to_string(static_cast<double>(visits.residual)));
  p /= p.sum();
  visits.p = std::move(p);
  return visits;
}

// ---------------------------------------------------------------------------
// Map equation
// ---------------------------------------------------------------------------

namespace detail {

inline double plogp(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

/// Per-module exit rate q_i and visit mass. With recorded teleportation the
/// exit counts both followed links leaving the module and uniform teleports
/// landing outside it; dangling nodes teleport with probability one.
struct ModuleRates {
  std::vector<double> exit;    // q_i
  std::vector<double> visit;   // sum of p_alpha
  std::vector<std::size_t> size;
  double exit_total = 0.0;
};

template <class Scalar>
ModuleRates module_rates(const FlowNetwork<Scalar>& net, const VisitDistribution<Scalar>& visits,
                         const std::vector<int>& assignment, bool recorded_teleport,
                         int module_count) {
  const Eigen::Index n = static_cast<Eigen::Index>(net.size());
  const double n_d = static_cast<double>(n);
  const double tau = static_cast<double>(visits.teleport_prob);
  ModuleRates rates;
  rates.exit.assign(static_cast<std::size_t>(module_count), 0.0);
  rates.visit.assign(static_cast<std::size_t>(module_count), 0.0);
  rates.size.assign(static_cast<std::size_t>(module_count), 0);

  std::vector<double> module_nodes(static_cast<std::size_t>(module_count), 0.0);
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto m = static_cast<std::size_t>(assignment[static_cast<std::size_t>(a)]);
    rates.visit[m] += static_cast<double>(visits.p(a));
    rates.size[m] += 1;
    module_nodes[m] += 1.0;
  }

  for (Eigen::Index a = 0; a < n; ++a) {
    const auto m = static_cast<std::size_t>(assignment[static_cast<std::size_t>(a)]);
    const double p_a = static_cast<double>(visits.p(a));
    const double s_a = static_cast<double>(net.weights.row(a).sum());
    double exit_prob = 0.0;
    if (s_a > 0.0) {
      double leaving = 0.0;
      for (Eigen::Index b = 0; b < n; ++b)
        if (static_cast<std::size_t>(assignment[static_cast<std::size_t>(b)]) != m)
          leaving += static_cast<double>(net.weights(a, b));
      exit_prob = (1.0 - tau) * leaving / s_a;
      if (recorded_teleport) exit_prob += tau * (n_d - module_nodes[m]) / n_d;
    } else if (recorded_teleport) {
      exit_prob = (n_d - module_nodes[m]) / n_d;
    }
    rates.exit[m] += p_a * exit_prob;
  }
  for (double q : rates.exit) rates.exit_total += q;
  return rates;
}

}  // namespace detail

/// Average per-step description length, in bits, of the partition: the module
/// codebook term plus one within-module term per community. Empty communities
/// contribute nothing.
template <class Scalar>
double codelength(const FlowNetwork<Scalar>& net, const VisitDistribution<Scalar>& visits,
                  const std::vector<int>& assignment, bool recorded_teleport = true) {
  if (assignment.size() != net.size())
    throw std::invalid_argument("codelength: assignment size mismatch");
  int module_count = 0;
  for (int m : assignment) {
    if (m < 0) throw std::invalid_argument("codelength: unassigned node");
    module_count = std::max(module_count, m + 1);
  }
  const auto rates = detail::module_rates(net, visits, assignment, recorded_teleport,
                                          module_count);

  double length = 0.0;
  const double q_total = rates.exit_total;
  if (q_total > 0.0) {
    double index_entropy = 0.0;
    for (double q : rates.exit)
      if (q > 0.0) index_entropy -= (q / q_total) * std::log2(q / q_total);
    length += q_total * index_entropy;
  }
  const Eigen::Index n = static_cast<Eigen::Index>(net.size());
  for (std::size_t m = 0; m < rates.exit.size(); ++m) {
    const double inside = rates.visit[m] + rates.exit[m];
    if (inside <= 0.0) continue;
    double entropy = 0.0;
    if (rates.exit[m] > 0.0)
      entropy -= (rates.exit[m] / inside) * std::log2(rates.exit[m] / inside);
    for (Eigen::Index a = 0; a < n; ++a) {
      if (static_cast<std::size_t>(assignment[static_cast<std::size_t>(a)]) != m) continue;
      const double p_a = static_cast<double>(visits.p(a));
      if (p_a > 0.0) entropy -= (p_a / inside) * std::log2(p_a / inside);
    }
    length += inside * entropy;
  }
  return length;
}

// ---------------------------------------------------------------------------
// Detection
// ---------------------------------------------------------------------------

struct CommunityStats {
  double exit_rate = 0.0;      // q_i
  double internal_rate = 0.0;  // p_i = visit mass + exit
  double visit_mass = 0.0;
  std::size_t size = 0;
};

struct Partition {
  std::vector<int> assignment;  // node -> community, ids 0..communities-1
  std::size_t communities = 0;
  double codelength = 0.0;  // bits
  std::vector<CommunityStats> stats;
};

struct DetectOptions {
  double teleport_prob = 0.15;
  bool recorded_teleport = true;
  int seeds = 10;
  std::uint64_t rng_seed = 1;
  double visit_tol = 1e-13;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Level graph for the optimizer. Link flows exclude teleportation, which is
/// handled analytically from the per-supernode teleport mass and node count.
struct OptimizerGraph {
  std::vector<double> visit;   // stationary mass per supernode
  std::vector<double> tele;    // teleporting mass per supernode
  std::vector<double> ncount;  // original nodes represented
  std::vector<std::size_t> out_off, in_off;
  std::vector<int> out_idx, in_idx;
  std::vector<double> out_flow, in_flow;
  double n_orig = 0.0;
  double node_term = 0.0;  // sum plogp(p_alpha) over original nodes, constant

  std::size_t size() const { return visit.size(); }
};

template <class Scalar>
OptimizerGraph build_optimizer_graph(const FlowNetwork<Scalar>& net,
                                     const VisitDistribution<Scalar>& visits,
                                     bool recorded_teleport) {
  const Eigen::Index n = static_cast<Eigen::Index>(net.size());
  const double tau = static_cast<double>(visits.teleport_prob);
  OptimizerGraph g;
  g.n_orig = static_cast<double>(n);
  g.visit.resize(static_cast<std::size_t>(n));
  g.tele.resize(static_cast<std::size_t>(n));
  g.ncount.assign(static_cast<std::size_t>(n), 1.0);

  std::vector<std::vector<std::pair<int, double>>> out(static_cast<std::size_t>(n));
  std::vector<std::size_t> in_count(static_cast<std::size_t>(n), 0);
  for (Eigen::Index a = 0; a < n; ++a) {
    const double p_a = static_cast<double>(visits.p(a));
    const double s_a = static_cast<double>(net.weights.row(a).sum());
    g.visit[static_cast<std::size_t>(a)] = p_a;
    g.node_term += plogp(p_a);
    if (s_a > 0.0) {
      g.tele[static_cast<std::size_t>(a)] = recorded_teleport ? tau * p_a : 0.0;
      for (Eigen::Index b = 0; b < n; ++b) {
        const double w = static_cast<double>(net.weights(a, b));
        if (w > 0.0) {
          out[static_cast<std::size_t>(a)].emplace_back(static_cast<int>(b),
                                                        (1.0 - tau) * p_a * w / s_a);
          ++in_count[static_cast<std::size_t>(b)];
        }
      }
    } else {
      g.tele[static_cast<std::size_t>(a)] = recorded_teleport ? p_a : 0.0;
    }
  }

  g.out_off.assign(static_cast<std::size_t>(n) + 1, 0);
  g.in_off.assign(static_cast<std::size_t>(n) + 1, 0);
  for (std::size_t a = 0; a < static_cast<std::size_t>(n); ++a) {
    g.out_off[a + 1] = g.out_off[a] + out[a].size();
    g.in_off[a + 1] = g.in_off[a] + in_count[a];
  }
  g.out_idx.resize(g.out_off.back());
  g.out_flow.resize(g.out_off.back());
  g.in_idx.resize(g.in_off.back());
  g.in_flow.resize(g.in_off.back());
  std::vector<std::size_t> in_cursor(g.in_off.begin(), g.in_off.end() - 1);
  for (std::size_t a = 0; a < static_cast<std::size_t>(n); ++a) {
    std::size_t k = g.out_off[a];
    for (const auto& [b, f] : out[a]) {
      g.out_idx[k] = b;
      g.out_flow[k] = f;
      ++k;
      const auto bi = static_cast<std::size_t>(b);
      g.in_idx[in_cursor[bi]] = static_cast<int>(a);
      g.in_flow[in_cursor[bi]] = f;
      ++in_cursor[bi];
    }
  }
  return g;
}

/// Module bookkeeping over one level graph.
struct LevelState {
  const OptimizerGraph* g = nullptr;
  std::vector<int> module_of;
  std::vector<double> mod_visit, mod_tele, mod_ncount, mod_lout;
  std::vector<int> mod_members;
  double exit_total = 0.0;

  double module_exit(int m) const {
    const auto mi = static_cast<std::size_t>(m);
    return mod_lout[mi] + mod_tele[mi] * (g->n_orig - mod_ncount[mi]) / g->n_orig;
  }

  void rebuild(const OptimizerGraph& graph, const std::vector<int>& init) {
    g = &graph;
    module_of = init;
    int count = 0;
    for (int m : init) count = std::max(count, m + 1);
    mod_visit.assign(static_cast<std::size_t>(count), 0.0);
    mod_tele.assign(static_cast<std::size_t>(count), 0.0);
    mod_ncount.assign(static_cast<std::size_t>(count), 0.0);
    mod_lout.assign(static_cast<std::size_t>(count), 0.0);
    mod_members.assign(static_cast<std::size_t>(count), 0);
    for (std::size_t a = 0; a < graph.size(); ++a) {
      const auto m = static_cast<std::size_t>(module_of[a]);
      mod_visit[m] += graph.visit[a];
      mod_tele[m] += graph.tele[a];
      mod_ncount[m] += graph.ncount[a];
      mod_members[m] += 1;
    }
    for (std::size_t a = 0; a < graph.size(); ++a) {
      const int m = module_of[a];
      for (std::size_t k = graph.out_off[a]; k < graph.out_off[a + 1]; ++k)
        if (module_of[static_cast<std::size_t>(graph.out_idx[k])] != m)
          mod_lout[static_cast<std::size_t>(m)] += graph.out_flow[k];
    }
    exit_total = 0.0;
    for (std::size_t m = 0; m < mod_lout.size(); ++m)
      if (mod_members[m] > 0) exit_total += module_exit(static_cast<int>(m));
  }

  /// Four-term map equation without the constant node term.
  double partial_codelength() const {
    double sum_exit_plogp = 0.0, sum_inside_plogp = 0.0;
    for (std::size_t m = 0; m < mod_lout.size(); ++m) {
      if (mod_members[m] == 0) continue;
      const double q = module_exit(static_cast<int>(m));
      sum_exit_plogp += plogp(q);
      sum_inside_plogp += plogp(mod_visit[m] + q);
    }
    return plogp(exit_total) - 2.0 * sum_exit_plogp + sum_inside_plogp;
  }

  double full_codelength() const { return partial_codelength() - g->node_term; }
};

/// One sweep of best single-node moves in the given visit order. Candidates
/// are the modules of in/out neighbors, scanned in ascending id so the lowest
/// id wins exact ties. Returns the number of applied moves.
inline std::size_t move_pass(LevelState& st, const std::vector<int>& order,
                             std::vector<double>& to_scratch, std::vector<double>& from_scratch) {
  const OptimizerGraph& g = *st.g;
  const double n = g.n_orig;
  std::size_t moves = 0;
  std::vector<int> touched;
  for (int node : order) {
    const auto a = static_cast<std::size_t>(node);
    const int current = st.module_of[a];
    touched.clear();
    double out_total = 0.0;
    for (std::size_t k = g.out_off[a]; k < g.out_off[a + 1]; ++k) {
      const int b = g.out_idx[k];
      if (b == node) continue;  // self-flow never exits
      const int m = st.module_of[static_cast<std::size_t>(b)];
      if (to_scratch[static_cast<std::size_t>(m)] == 0.0 &&
          from_scratch[static_cast<std::size_t>(m)] == 0.0)
        touched.push_back(m);
      to_scratch[static_cast<std::size_t>(m)] += g.out_flow[k];
      out_total += g.out_flow[k];
    }
    double in_total = 0.0;
    for (std::size_t k = g.in_off[a]; k < g.in_off[a + 1]; ++k) {
      const int b = g.in_idx[k];
      if (b == node) continue;
      const int m = st.module_of[static_cast<std::size_t>(b)];
      if (to_scratch[static_cast<std::size_t>(m)] == 0.0 &&
          from_scratch[static_cast<std::size_t>(m)] == 0.0)
        touched.push_back(m);
      from_scratch[static_cast<std::size_t>(m)] += g.in_flow[k];
      in_total += g.in_flow[k];
    }
    if (std::find(touched.begin(), touched.end(), current) == touched.end())
      touched.push_back(current);
    std::sort(touched.begin(), touched.end());

    const auto ci = static_cast<std::size_t>(current);
    const double q_cur = st.module_exit(current);
    const double inside_cur = st.mod_visit[ci] + q_cur;
    // module 'current' without the node
    const double visit_rem = st.mod_visit[ci] - g.visit[a];
    const double tele_rem = st.mod_tele[ci] - g.tele[a];
    const double ncount_rem = st.mod_ncount[ci] - g.ncount[a];
    const double lout_rem = st.mod_lout[ci] - (out_total - to_scratch[ci]) + from_scratch[ci];
    const double q_rem =
        (st.mod_members[ci] > 1) ? lout_rem + tele_rem * (n - ncount_rem) / n : 0.0;
    const double inside_rem = (st.mod_members[ci] > 1) ? visit_rem + q_rem : 0.0;

    int best_module = current;
    double best_delta = 0.0;
    double best_q_dst = 0.0;
    for (int cand : touched) {
      if (cand == current) continue;
      const auto bi = static_cast<std::size_t>(cand);
      const double q_dst_old = st.module_exit(cand);
      const double inside_dst_old = st.mod_visit[bi] + q_dst_old;
      const double lout_dst = st.mod_lout[bi] - from_scratch[bi] + (out_total - to_scratch[bi]);
      const double tele_dst = st.mod_tele[bi] + g.tele[a];
      const double ncount_dst = st.mod_ncount[bi] + g.ncount[a];
      const double q_dst = lout_dst + tele_dst * (n - ncount_dst) / n;
      const double inside_dst = st.mod_visit[bi] + g.visit[a] + q_dst;
      const double exit_new = st.exit_total - q_cur - q_dst_old + q_rem + q_dst;
      const double delta = (plogp(exit_new) - plogp(st.exit_total)) -
                           2.0 * (plogp(q_rem) + plogp(q_dst) - plogp(q_cur) - plogp(q_dst_old)) +
                           (plogp(inside_rem) + plogp(inside_dst) - plogp(inside_cur) -
                            plogp(inside_dst_old));
      if (delta < best_delta - 1e-14) {
        best_delta = delta;
        best_module = cand;
        best_q_dst = q_dst;
      }
    }

    if (best_module != current && best_delta < -1e-12) {
      const auto bi = static_cast<std::size_t>(best_module);
      const double q_dst_old = st.module_exit(best_module);
      st.exit_total += (q_rem + best_q_dst) - (q_cur + q_dst_old);
      st.mod_visit[ci] = visit_rem;
      st.mod_tele[ci] = tele_rem;
      st.mod_ncount[ci] = ncount_rem;
      st.mod_lout[ci] = lout_rem;
      st.mod_members[ci] -= 1;
      st.mod_visit[bi] += g.visit[a];
      st.mod_tele[bi] += g.tele[a];
      st.mod_ncount[bi] += g.ncount[a];
      st.mod_lout[bi] = st.mod_lout[bi] - from_scratch[bi] + (out_total - to_scratch[bi]);
      st.mod_members[bi] += 1;
      st.module_of[a] = best_module;
      ++moves;
    }

    for (int m : touched) {
      to_scratch[static_cast<std::size_t>(m)] = 0.0;
      from_scratch[static_cast<std::size_t>(m)] = 0.0;
    }
  }
  return moves;
}

/// Collapses modules into supernodes; module ids are renumbered consecutively
/// in ascending order. Returns the aggregated graph and the renumbering.
inline OptimizerGraph aggregate_graph(const OptimizerGraph& g, const std::vector<int>& module_of,
                                      std::vector<int>& renumber) {
  int count = 0;
  for (int m : module_of) count = std::max(count, m + 1);
  std::vector<bool> used(static_cast<std::size_t>(count), false);
  for (int m : module_of) used[static_cast<std::size_t>(m)] = true;
  renumber.assign(static_cast<std::size_t>(count), -1);
  int next = 0;
  for (int m = 0; m < count; ++m)
    if (used[static_cast<std::size_t>(m)]) renumber[static_cast<std::size_t>(m)] = next++;

  OptimizerGraph out;
  out.n_orig = g.n_orig;
  out.node_term = g.node_term;
  out.visit.assign(static_cast<std::size_t>(next), 0.0);
  out.tele.assign(static_cast<std::size_t>(next), 0.0);
  out.ncount.assign(static_cast<std::size_t>(next), 0.0);
  for (std::size_t a = 0; a < g.size(); ++a) {
    const auto m = static_cast<std::size_t>(renumber[static_cast<std::size_t>(module_of[a])]);
    out.visit[m] += g.visit[a];
    out.tele[m] += g.tele[a];
    out.ncount[m] += g.ncount[a];
  }

  std::vector<std::map<int, double>> links(static_cast<std::size_t>(next));
  for (std::size_t a = 0; a < g.size(); ++a) {
    const int ma = renumber[static_cast<std::size_t>(module_of[a])];
    for (std::size_t k = g.out_off[a]; k < g.out_off[a + 1]; ++k) {
      const int mb =
          renumber[static_cast<std::size_t>(module_of[static_cast<std::size_t>(g.out_idx[k])])];
      links[static_cast<std::size_t>(ma)][mb] += g.out_flow[k];
    }
  }
  out.out_off.assign(static_cast<std::size_t>(next) + 1, 0);
  out.in_off.assign(static_cast<std::size_t>(next) + 1, 0);
  std::vector<std::size_t> in_count(static_cast<std::size_t>(next), 0);
  for (std::size_t a = 0; a < links.size(); ++a) {
    out.out_off[a + 1] = out.out_off[a] + links[a].size();
    for (const auto& [b, f] : links[a]) ++in_count[static_cast<std::size_t>(b)];
  }
  for (std::size_t a = 0; a < static_cast<std::size_t>(next); ++a)
    out.in_off[a + 1] = out.in_off[a] + in_count[a];
  out.out_idx.resize(out.out_off.back());
  out.out_flow.resize(out.out_off.back());
  out.in_idx.resize(out.in_off.back());
  out.in_flow.resize(out.in_off.back());
  std::vector<std::size_t> in_cursor(out.in_off.begin(), out.in_off.end() - 1);
  for (std::size_t a = 0; a < links.size(); ++a) {
    std::size_t k = out.out_off[a];
    for (const auto& [b, f] : links[a]) {
      out.out_idx[k] = b;
      out.out_flow[k] = f;
      ++k;
      const auto bi = static_cast<std::size_t>(b);
      out.in_idx[in_cursor[bi]] = static_cast<int>(a);
      out.in_flow[in_cursor[bi]] = f;
      ++in_cursor[bi];
    }
  }
  return out;
}

/// Full coarsening cycle (passes, aggregate, repeat) starting from the given
/// node-level assignment; then repeated node-level fine-tuning until the
/// codelength stops improving.
inline std::vector<int> optimize_once(const OptimizerGraph& base, std::vector<int> assignment,
                                      std::mt19937_64& rng, double* final_codelength) {
  const std::size_t n = base.size();
  LevelState state;
  double best = 0.0;
  {
    LevelState probe;
    probe.rebuild(base, assignment);
    best = probe.full_codelength();
  }

  for (int outer = 0; outer < 50; ++outer) {
    // coarsening cycle: level 0 starts from the current assignment
    OptimizerGraph level_graph = base;
    std::vector<int> level_assign = assignment;       // supernode -> module
    std::vector<int> node_to_super(n);                // original -> supernode
    for (std::size_t a = 0; a < n; ++a) node_to_super[a] = static_cast<int>(a);

    while (true) {
      state.rebuild(level_graph, level_assign);
      std::vector<int> order(level_graph.size());
      for (std::size_t a = 0; a < order.size(); ++a) order[a] = static_cast<int>(a);
      std::vector<double> to_scratch(state.mod_lout.size(), 0.0);
      std::vector<double> from_scratch(state.mod_lout.size(), 0.0);
      for (int pass = 0; pass < 200; ++pass) {
        std::shuffle(order.begin(), order.end(), rng);
        if (move_pass(state, order, to_scratch, from_scratch) == 0) break;
      }

      int used = 0;
      for (int m : state.mod_members)
        if (m > 0) ++used;
      if (static_cast<std::size_t>(used) == level_graph.size()) break;  // no merges

      std::vector<int> renumber;
      OptimizerGraph next_graph = aggregate_graph(level_graph, state.module_of, renumber);
      for (std::size_t a = 0; a < n; ++a)
        node_to_super[a] = renumber[static_cast<std::size_t>(
            state.module_of[static_cast<std::size_t>(node_to_super[a])])];
      level_graph = std::move(next_graph);
      level_assign.resize(level_graph.size());
      for (std::size_t s = 0; s < level_graph.size(); ++s)
        level_assign[s] = static_cast<int>(s);
    }

    // flatten to original nodes
    std::vector<int> flattened(n);
    for (std::size_t a = 0; a < n; ++a)
      flattened[a] = state.module_of[static_cast<std::size_t>(node_to_super[a])];
    LevelState flat_state;
    flat_state.rebuild(base, flattened);
    const double length = flat_state.full_codelength();
    if (length < best - 1e-12) {
      best = length;
      assignment = std::move(flattened);
    } else {
      break;
    }
  }
  if (final_codelength) *final_codelength = best;
  return assignment;
}

/// Renumber communities canonically: by size descending, then smallest member
/// index ascending; drops empty ids.
inline std::vector<int> canonical_assignment(const std::vector<int>& assignment,
                                             std::size_t* count_out) {
  int count = 0;
  for (int m : assignment) count = std::max(count, m + 1);
  std::vector<std::size_t> size(static_cast<std::size_t>(count), 0);
  std::vector<std::size_t> first(static_cast<std::size_t>(count), assignment.size());
  for (std::size_t a = 0; a < assignment.size(); ++a) {
    const auto m = static_cast<std::size_t>(assignment[a]);
    ++size[m];
    first[m] = std::min(first[m], a);
  }
  std::vector<int> ids;
  for (int m = 0; m < count; ++m)
    if (size[static_cast<std::size_t>(m)] > 0) ids.push_back(m);
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    const auto sa = size[static_cast<std::size_t>(a)], sb = size[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return first[static_cast<std::size_t>(a)] < first[static_cast<std::size_t>(b)];
  });
  std::vector<int> remap(static_cast<std::size_t>(count), -1);
  for (std::size_t i = 0; i < ids.size(); ++i)
    remap[static_cast<std::size_t>(ids[i])] = static_cast<int>(i);
  std::vector<int> out(assignment.size());
  for (std::size_t a = 0; a < assignment.size(); ++a)
    out[a] = remap[static_cast<std::size_t>(assignment[a])];
  if (count_out) *count_out = ids.size();
  return out;
}

}  // namespace detail

/// Greedy two-level map-equation minimization with module aggregation and
/// seeded restarts; the best (lowest codelength) restart wins. Deterministic
/// for fixed options. Never returns a partition worse than one community.
template <class Scalar>
Partition detect_communities(const FlowNetwork<Scalar>& net, const DetectOptions& options = {}) {
  const std::size_t n = net.size();
  if (n == 0) throw std::invalid_argument("detect_communities: empty network");
  const auto visits =
      stationary_visits(net, static_cast<Scalar>(options.teleport_prob),
                        static_cast<Scalar>(options.visit_tol));
  const auto graph = detail::build_optimizer_graph(net, visits, options.recorded_teleport);

  std::vector<int> best_assignment(n, 0);
  double best_length = 0.0;
  bool have_best = false;
  for (int restart = 0; restart < std::max(1, options.seeds); ++restart) {
    std::mt19937_64 rng(detail::splitmix64(options.rng_seed ^
                                           detail::splitmix64(static_cast<std::uint64_t>(restart))));
    std::vector<int> init(n);
    for (std::size_t a = 0; a < n; ++a) init[a] = static_cast<int>(a);
    double length = 0.0;
    auto assignment = detail::optimize_once(graph, std::move(init), rng, &length);
    if (!have_best || length < best_length - 1e-12) {
      best_length = length;
      best_assignment = std::move(assignment);
      have_best = true;
    }
  }

  // guard: the trivial one-community partition is a valid fallback
  const std::vector<int> single(n, 0);
  const double single_length = codelength(net, visits, single, options.recorded_teleport);
  double refined = codelength(net, visits, best_assignment, options.recorded_teleport);
  if (single_length < refined) {
    best_assignment = single;
    refined = single_length;
  }

  Partition part;
  part.assignment = detail::canonical_assignment(best_assignment, &part.communities);
  part.codelength = codelength(net, visits, part.assignment, options.recorded_teleport);
  const auto rates = detail::module_rates(net, visits, part.assignment,
                                          options.recorded_teleport,
                                          static_cast<int>(part.communities));
  part.stats.resize(part.communities);
  for (std::size_t m = 0; m < part.communities; ++m) {
    part.stats[m].exit_rate = rates.exit[m];
    part.stats[m].visit_mass = rates.visit[m];
    part.stats[m].internal_rate = rates.visit[m] + rates.exit[m];
    part.stats[m].size = rates.size[m];
  }
  return part;
}

// ---------------------------------------------------------------------------
// Threshold scan
// ---------------------------------------------------------------------------

struct ScanEntry {
  std::size_t k = 0;
  std::size_t retained = 0;
  std::size_t active_nodes = 0;         // nodes with at least one retained link
  std::size_t communities = 0;
  std::size_t large_communities = 0;    // strictly more than size_floor nodes
  double codelength = 0.0;
  std::vector<int> assignment;          // over the full node set, -1 = isolated
};

struct ScanResult {
  std::vector<ScanEntry> entries;
  std::optional<std::size_t> selected_k;  // largest k with >= 2 large communities
  std::size_t size_floor = 0;

  const ScanEntry* selected() const {
    if (!selected_k) return nullptr;
    for (const auto& e : entries)
      if (e.k == *selected_k) return &e;
    return nullptr;
  }
};

/// For each k in [k_min, k_max] step k_step: keep the top-k links, detect
/// communities on the subgraph of nodes incident to a retained link, and
/// count communities larger than size_floor.
template <class Scalar>
ScanResult threshold_scan(const FlowNetwork<Scalar>& net, std::size_t k_min, std::size_t k_max,
                          std::size_t k_step, std::size_t size_floor,
                          const DetectOptions& options = {}) {
  if (k_min > k_max) throw std::invalid_argument("threshold_scan: k_min > k_max");
  if (k_step < 1) throw std::invalid_argument("threshold_scan: k_step must be >= 1");
  ScanResult result;
  result.size_floor = size_floor;
  for (std::size_t k = k_min; k <= k_max; k += k_step) {
    ScanEntry entry;
    entry.k = k;
    ThresholdInfo info;
    const auto cut = threshold_top_k(net, k, &info);
    entry.retained = info.retained;

    std::vector<std::size_t> active;
    for (std::size_t a = 0; a < cut.size(); ++a) {
      const auto ai = static_cast<Eigen::Index>(a);
      if (cut.weights.row(ai).sum() > Scalar(0) || cut.weights.col(ai).sum() > Scalar(0))
        active.push_back(a);
    }
    entry.active_nodes = active.size();
    entry.assignment.assign(net.size(), -1);
    if (!active.empty()) {
      const auto sub = restrict_network(cut, active, "top-" + std::to_string(k));
      const Partition part = detect_communities(sub, options);
      entry.communities = part.communities;
      entry.codelength = part.codelength;
      for (std::size_t i = 0; i < active.size(); ++i)
        entry.assignment[active[i]] = part.assignment[i];
      for (const auto& stats : part.stats)
        if (stats.size > size_floor) ++entry.large_communities;
    }
    if (entry.large_communities >= 2) result.selected_k = k;
    result.entries.push_back(std::move(entry));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Region labeling and cross-year overlap
// ---------------------------------------------------------------------------

struct CommunityRegionInfo {
  int community = 0;
  std::size_t size = 0;
  std::string dominant_region;  // most frequent region, ties by label
  double purity = 0.0;
};

inline std::vector<CommunityRegionInfo> label_regions(const std::vector<int>& assignment,
                                                      const std::vector<NodeLabel>& nodes,
                                                      const RegionMap& regions) {
  if (assignment.size() != nodes.size())
    throw std::invalid_argument("label_regions: assignment size mismatch");
  std::map<int, std::map<std::string, std::size_t>> counts;
  std::map<int, std::size_t> sizes;
  for (std::size_t a = 0; a < assignment.size(); ++a) {
    if (assignment[a] < 0) continue;
    std::string region = regions.lookup(nodes[a].country);
    if (region.empty()) region = "unmapped";
    ++counts[assignment[a]][region];
    ++sizes[assignment[a]];
  }
  std::vector<CommunityRegionInfo> out;
  for (const auto& [community, region_counts] : counts) {
    CommunityRegionInfo info;
    info.community = community;
    info.size = sizes[community];
    std::size_t best = 0;
    for (const auto& [region, count] : region_counts)
      if (count > best) {
        best = count;
        info.dominant_region = region;
      }
    info.purity = static_cast<double>(best) / static_cast<double>(info.size);
    out.push_back(std::move(info));
  }
  return out;
}

struct OverlapLink {
  int community_a = 0;
  int community_b = 0;
  std::size_t overlap = 0;
};

/// Node-count intersections between two partitions, matching nodes by label.
inline std::vector<OverlapLink> partition_overlap(const std::vector<int>& assignment_a,
                                                  const std::vector<NodeLabel>& nodes_a,
                                                  const std::vector<int>& assignment_b,
                                                  const std::vector<NodeLabel>& nodes_b) {
  std::map<NodeLabel, int> b_of;
  for (std::size_t i = 0; i < nodes_b.size(); ++i)
    if (assignment_b[i] >= 0) b_of[nodes_b[i]] = assignment_b[i];
  std::map<std::pair<int, int>, std::size_t> counts;
  for (std::size_t i = 0; i < nodes_a.size(); ++i) {
    if (assignment_a[i] < 0) continue;
    auto it = b_of.find(nodes_a[i]);
    if (it == b_of.end()) continue;
    ++counts[{assignment_a[i], it->second}];
  }
  std::vector<OverlapLink> out;
  for (const auto& [key, count] : counts) out.push_back({key.first, key.second, count});
  return out;
}

}  // namespace ivan
