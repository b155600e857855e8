#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <stack>
#include <stdexcept>
#include <vector>

#include "tss/graph.hpp"
#include "tss/parallel.hpp"
#include "tss/ppr.hpp"
#include "tss/random.hpp"
#include "tss/stats.hpp"

namespace tss {

/// Class-conditional betweenness centrality over a node set: for each node i
/// in the set, the (normalized) sum of pi[u][i]*pi[i][v]/pi[u][v] over
/// ordered pairs (u,v) from the set with different noisy labels, u,v != i.
struct CbcScores {
  std::vector<double> scores;    // length n; nodes outside node_set stay 0
  std::vector<NodeId> node_set;  // the i/u/v range
  std::int64_t pair_count = 0;   // eligible ordered pairs summed (or sampled)
  std::int64_t skipped_pairs = 0;  // dropped because pi[u][v] < epsilon
  double epsilon = 0.0;
  bool all_same_class = false;  // degenerate: empty pair set, scores all zero
};

struct CbcOptions {
  double epsilon = 1e-12;
  /// Maximum ordered pairs to sum. When the eligible count exceeds this the
  /// pair set is uniformly subsampled without replacement and the scores are
  /// rescaled by eligible/sampled. 0 means exact regardless of size.
  std::int64_t pair_budget = 2'000'000;
  std::uint64_t seed = 0;
  int threads = default_threads();
};

inline CbcScores cbc_scores(const PprMatrix& ppr, const std::vector<int>& noisy_labels,
                            const std::vector<NodeId>& node_set, const CbcOptions& opts = {}) {
  if (node_set.empty()) throw std::invalid_argument("cbc_scores: empty node set");
  if (opts.epsilon <= 0.0) throw std::invalid_argument("cbc_scores: epsilon must be positive");
  if (noisy_labels.size() != ppr.n)
    throw std::invalid_argument("cbc_scores: labels must cover all nodes");
  {
    auto sorted = node_set;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("cbc_scores: duplicate node in node set");
    if (sorted.front() < 0 || static_cast<std::size_t>(sorted.back()) >= ppr.n)
      throw std::invalid_argument("cbc_scores: node id out of range");
  }

  CbcScores out;
  out.scores.assign(ppr.n, 0.0);
  out.node_set = node_set;
  out.epsilon = opts.epsilon;

  const std::size_t ns = node_set.size();
  out.all_same_class = true;
  for (std::size_t k = 1; k < ns; ++k)
    if (noisy_labels[node_set[k]] != noisy_labels[node_set[0]]) {
      out.all_same_class = false;
      break;
    }
  if (out.all_same_class) return out;  // empty pair set; caller may warn

  // Eligible ordered pairs as positions into node_set, with 1/pi[u][v].
  struct Pair {
    std::uint32_t u_pos, v_pos;
    double inv;
  };
  std::vector<Pair> pairs;
  for (std::uint32_t a = 0; a < ns; ++a) {
    const NodeId u = node_set[a];
    const double* pu = ppr.row(u);
    for (std::uint32_t b = 0; b < ns; ++b) {
      if (a == b) continue;
      const NodeId v = node_set[b];
      if (noisy_labels[u] == noisy_labels[v]) continue;
      const double puv = pu[v];
      if (puv < opts.epsilon) {
        out.skipped_pairs++;
        continue;
      }
      pairs.push_back({a, b, 1.0 / puv});
    }
  }
  const std::int64_t eligible = static_cast<std::int64_t>(pairs.size());
  double scale = 1.0;
  if (opts.pair_budget > 0 && eligible > opts.pair_budget) {
    auto rng = make_rng(derive_seed(opts.seed, "cbc_pairs"));
    // partial Fisher-Yates: the first pair_budget slots become the sample
    for (std::int64_t k = 0; k < opts.pair_budget; ++k) {
      std::uniform_int_distribution<std::int64_t> pick(k, eligible - 1);
      std::swap(pairs[k], pairs[pick(rng)]);
    }
    pairs.resize(opts.pair_budget);
    scale = static_cast<double>(eligible) / static_cast<double>(opts.pair_budget);
  }
  out.pair_count = static_cast<std::int64_t>(pairs.size());

  const double norm = scale / (static_cast<double>(ns) * static_cast<double>(ns - 1));
  parallel_for(
      ns,
      [&](std::size_t ipos) {
        const NodeId i = node_set[ipos];
        const std::uint32_t ip = static_cast<std::uint32_t>(ipos);
        // col[a] = pi[node_set[a]][i], row[b] = pi[i][node_set[b]]
        std::vector<double> col(ns), row(ns);
        const double* pi_row = ppr.row(i);
        for (std::size_t a = 0; a < ns; ++a) {
          col[a] = ppr.rows(node_set[a], i);
          row[a] = pi_row[node_set[a]];
        }
        double s = 0.0;
        for (const Pair& p : pairs) {
          if (p.u_pos == ip || p.v_pos == ip) continue;
          s += col[p.u_pos] * row[p.v_pos] * p.inv;
        }
        out.scores[i] = s * norm;
      },
      opts.threads);
  return out;
}

// ---------------------------------------------------------------------------
// Shortest-path centralities (small-graph oracles)
// ---------------------------------------------------------------------------

namespace detail {

/// Brandes pass from one source. When `labels` is given, only targets with a
/// label different from the source's count as path endpoints.
inline void brandes_from(const Graph& g, NodeId s, const std::vector<int>* labels,
                         std::vector<double>& cb) {
  const NodeId n = g.n;
  std::vector<std::vector<NodeId>> preds(n);
  std::vector<double> sigma(n, 0.0), delta(n, 0.0);
  std::vector<std::int32_t> dist(n, -1);
  std::vector<NodeId> order;
  order.reserve(n);
  std::queue<NodeId> q;
  sigma[s] = 1.0;
  dist[s] = 0;
  q.push(s);
  while (!q.empty()) {
    NodeId v = q.front();
    q.pop();
    order.push_back(v);
    for (std::int64_t e = g.adj.row_begin(v); e < g.adj.row_end(v); ++e) {
      NodeId w = g.adj.targets[e];
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        q.push(w);
      }
      if (dist[w] == dist[v] + 1) {
        sigma[w] += sigma[v];
        preds[w].push_back(v);
      }
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeId w = *it;
    double terminal = 1.0;
    if (labels) terminal = ((*labels)[w] != (*labels)[s]) ? 1.0 : 0.0;
    for (NodeId v : preds[w]) delta[v] += sigma[v] / sigma[w] * (terminal + delta[w]);
    if (w != s) cb[w] += delta[w];
  }
}

}  // namespace detail

/// Brandes betweenness centrality over all ordered pairs, normalized by
/// 1/(n(n-1)). Disconnected pairs contribute nothing.
inline std::vector<double> betweenness_centrality(const Graph& g, NodeId oracle_threshold = 500) {
  if (g.n > oracle_threshold)
    throw std::invalid_argument("betweenness_centrality: graph above oracle threshold");
  std::vector<double> cb(g.n, 0.0);
  for (NodeId s = 0; s < g.n; ++s) detail::brandes_from(g, s, nullptr, cb);
  if (g.n > 1) {
    double norm = 1.0 / (static_cast<double>(g.n) * static_cast<double>(g.n - 1));
    for (double& v : cb) v *= norm;
  }
  return cb;
}

/// Shortest-path class-conditional betweenness: the Brandes accumulation
/// restricted to endpoint pairs with different labels.
inline std::vector<double> shortest_path_cbc(const Graph& g, const std::vector<int>& labels,
                                             NodeId oracle_threshold = 500) {
  if (g.n > oracle_threshold)
    throw std::invalid_argument("shortest_path_cbc: graph above oracle threshold");
  if (labels.size() != static_cast<std::size_t>(g.n))
    throw std::invalid_argument("shortest_path_cbc: labels must cover all nodes");
  std::vector<double> cb(g.n, 0.0);
  for (NodeId s = 0; s < g.n; ++s) detail::brandes_from(g, s, &labels, cb);
  if (g.n > 1) {
    double norm = 1.0 / (static_cast<double>(g.n) * static_cast<double>(g.n - 1));
    for (double& v : cb) v *= norm;
  }
  return cb;
}

/// Spearman rank correlation (average-rank ties). Errors on constant input.
inline double rank_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  return spearman(a, b);
}

}  // namespace tss
