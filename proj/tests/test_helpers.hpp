#pragma once

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "tss/graph.hpp"
#include "tss/ppr.hpp"

namespace tss::test {

/// Temp directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("tss_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Graph from an explicit undirected edge list, no features/labels.
inline Graph graph_from_edges(NodeId n, const std::vector<std::pair<NodeId, NodeId>>& edges) {
  Graph g;
  g.n = n;
  g.adj = build_adjacency(n, edges);
  g.num_classes = 1;
  g.train_mask.assign(n, 0);
  g.val_mask.assign(n, 0);
  g.test_mask.assign(n, 0);
  validate_graph(g);
  return g;
}

inline Graph path_graph(NodeId n) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return graph_from_edges(n, e);
}

inline Graph cycle_graph(NodeId n) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
  return graph_from_edges(n, e);
}

inline Graph star_graph(NodeId leaves) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId i = 1; i <= leaves; ++i) e.emplace_back(0, i);
  return graph_from_edges(leaves + 1, e);
}

inline Graph complete_graph(NodeId n) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return graph_from_edges(n, e);
}

/// Erdos-Renyi-ish random graph with a spanning chain so it is connected.
inline Graph random_connected_graph(NodeId n, double extra_edge_prob, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 2; j < n; ++j)
      if (unif(rng) < extra_edge_prob) e.emplace_back(i, j);
  return graph_from_edges(n, e);
}

/// Uniform random labeled tree (random Prufer-like attachment).
inline Graph random_tree(NodeId n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId i = 1; i < n; ++i) {
    std::uniform_int_distribution<NodeId> pick(0, i - 1);
    e.emplace_back(i, pick(rng));
  }
  return graph_from_edges(n, e);
}

inline std::vector<int> random_labels(NodeId n, int num_classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, num_classes - 1);
  std::vector<int> y(n);
  for (auto& v : y) v = pick(rng);
  return y;
}

/// Literal Eq.-style triple loop over ordered pairs; the independent CBC
/// oracle used against the production accumulation.
inline std::vector<double> cbc_bruteforce(const PprMatrix& pi, const std::vector<int>& labels,
                                          const std::vector<NodeId>& node_set, double epsilon) {
  std::vector<double> scores(pi.n, 0.0);
  const double ns = static_cast<double>(node_set.size());
  for (NodeId i : node_set) {
    double acc = 0.0;
    for (NodeId u : node_set) {
      if (u == i) continue;
      for (NodeId v : node_set) {
        if (v == i || v == u) continue;
        if (labels[u] == labels[v]) continue;
        double puv = pi.at(u, v);
        if (puv < epsilon) continue;
        acc += pi.at(u, i) * pi.at(i, v) / puv;
      }
    }
    scores[i] = acc / (ns * (ns - 1.0));
  }
  return scores;
}

/// All-pairs shortest-path betweenness via the sigma identity
/// sigma_uv(i) = sigma_ui * sigma_iv when d(u,i)+d(i,v) == d(u,v);
/// independent of the Brandes accumulation.
inline std::vector<double> bc_bruteforce(const Graph& g, const std::vector<int>* labels) {
  const NodeId n = g.n;
  std::vector<std::vector<double>> sigma(n, std::vector<double>(n, 0.0));
  std::vector<std::vector<std::int32_t>> dist(n, std::vector<std::int32_t>(n, -1));
  for (NodeId s = 0; s < n; ++s) {
    std::queue<NodeId> q;
    dist[s][s] = 0;
    sigma[s][s] = 1.0;
    q.push(s);
    while (!q.empty()) {
      NodeId v = q.front();
      q.pop();
      for (std::int64_t e = g.adj.row_begin(v); e < g.adj.row_end(v); ++e) {
        NodeId w = g.adj.targets[e];
        if (dist[s][w] < 0) {
          dist[s][w] = dist[s][v] + 1;
          q.push(w);
        }
        if (dist[s][w] == dist[s][v] + 1) sigma[s][w] += sigma[s][v];
      }
    }
  }
  std::vector<double> cb(n, 0.0);
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = 0; v < n; ++v) {
      if (u == v || dist[u][v] < 0) continue;
      if (labels && (*labels)[u] == (*labels)[v]) continue;
      for (NodeId i = 0; i < n; ++i) {
        if (i == u || i == v) continue;
        if (dist[u][i] < 0 || dist[i][v] < 0) continue;
        if (dist[u][i] + dist[i][v] == dist[u][v]) cb[i] += sigma[u][i] * sigma[i][v] / sigma[u][v];
      }
    }
  if (n > 1)
    for (double& v : cb) v /= static_cast<double>(n) * static_cast<double>(n - 1);
  return cb;
}

/// Literal enumeration of every shortest path (DFS over the BFS DAG),
/// counting interior visits. Only sane for small sparse graphs.
inline std::vector<double> bc_path_enumeration(const Graph& g) {
  const NodeId n = g.n;
  std::vector<double> cb(n, 0.0);
  for (NodeId s = 0; s < n; ++s) {
    std::vector<std::int32_t> dist(n, -1);
    std::vector<std::vector<NodeId>> preds(n);
    std::queue<NodeId> q;
    dist[s] = 0;
    q.push(s);
    while (!q.empty()) {
      NodeId v = q.front();
      q.pop();
      for (std::int64_t e = g.adj.row_begin(v); e < g.adj.row_end(v); ++e) {
        NodeId w = g.adj.targets[e];
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          q.push(w);
        }
        if (dist[w] == dist[v] + 1) preds[w].push_back(v);
      }
    }
    for (NodeId t = 0; t < n; ++t) {
      if (t == s || dist[t] < 0) continue;
      // walk every path back from t to s; count paths and interior visits
      std::vector<double> visits(n, 0.0);
      double paths = 0.0;
      std::vector<NodeId> stack_path{t};
      std::function<void(NodeId)> dfs = [&](NodeId v) {
        if (v == s) {
          paths += 1.0;
          for (NodeId x : stack_path)
            if (x != s && x != t) visits[x] += 1.0;
          return;
        }
        for (NodeId p : preds[v]) {
          stack_path.push_back(p);
          dfs(p);
          stack_path.pop_back();
        }
      };
      dfs(t);
      for (NodeId i = 0; i < n; ++i)
        if (visits[i] > 0) cb[i] += visits[i] / paths;
    }
  }
  if (n > 1)
    for (double& v : cb) v /= static_cast<double>(n) * static_cast<double>(n - 1);
  return cb;
}

}  // namespace tss::test
