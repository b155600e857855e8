#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tss/matrix.hpp"
#include "tss/random.hpp"

namespace tss {

using NodeId = std::int32_t;

/// Compressed sparse row adjacency. `values` is empty for the unweighted
/// graph itself and populated for normalized matrices.
struct Csr {
  std::vector<std::int64_t> offsets;  // size n+1
  std::vector<NodeId> targets;
  std::vector<double> values;

  std::size_t num_rows() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::int64_t row_begin(NodeId u) const { return offsets[u]; }
  std::int64_t row_end(NodeId u) const { return offsets[u + 1]; }
  std::int64_t degree(NodeId u) const { return offsets[u + 1] - offsets[u]; }
  std::int64_t nnz() const { return static_cast<std::int64_t>(targets.size()); }

  bool has_edge(NodeId u, NodeId v) const {
    auto b = targets.begin() + row_begin(u), e = targets.begin() + row_end(u);
    return std::binary_search(b, e, v);
  }
};

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2, None = 3 };

/// Undirected graph with dense features, optional clean/noisy labels and
/// disjoint train/val/test masks. Immutable after construction; safe to
/// share read-only across workers.
struct Graph {
  NodeId n = 0;
  Csr adj;  // symmetric, deduplicated, no self-loops
  Matrix features;
  std::optional<std::vector<int>> clean_labels;
  std::optional<std::vector<int>> noisy_labels;
  int num_classes = 0;
  std::vector<std::uint8_t> train_mask, val_mask, test_mask;

  std::int64_t num_undirected_edges() const { return adj.nnz() / 2; }

  std::vector<NodeId> nodes_in_mask(const std::vector<std::uint8_t>& mask) const {
    std::vector<NodeId> ids;
    for (NodeId i = 0; i < n; ++i)
      if (mask[i]) ids.push_back(i);
    return ids;
  }
  std::vector<NodeId> train_nodes() const { return nodes_in_mask(train_mask); }
  std::vector<NodeId> val_nodes() const { return nodes_in_mask(val_mask); }
  std::vector<NodeId> test_nodes() const { return nodes_in_mask(test_mask); }
};

struct BuildStats {
  std::int64_t self_loops_dropped = 0;
  std::int64_t duplicates_merged = 0;
};

namespace detail {

inline Csr csr_from_pairs(NodeId n, std::vector<std::pair<NodeId, NodeId>>& pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  Csr csr;
  csr.offsets.assign(static_cast<std::size_t>(n) + 1, 0);
  for (auto& [u, v] : pairs) csr.offsets[u + 1]++;
  for (NodeId i = 0; i < n; ++i) csr.offsets[i + 1] += csr.offsets[i];
  csr.targets.reserve(pairs.size());
  for (auto& [u, v] : pairs) csr.targets.push_back(v);
  return csr;
}

}  // namespace detail

/// Builds the symmetric deduplicated adjacency from raw (possibly one-sided,
/// duplicated, self-looped) edge pairs.
inline Csr build_adjacency(NodeId n, const std::vector<std::pair<NodeId, NodeId>>& raw_edges,
                           BuildStats* stats = nullptr) {
  std::vector<std::pair<NodeId, NodeId>> pairs;
  pairs.reserve(raw_edges.size() * 2);
  std::int64_t self_loops = 0;
  for (auto [u, v] : raw_edges) {
    if (u < 0 || v < 0 || u >= n || v >= n)
      throw std::invalid_argument("edge endpoint out of range: " + std::to_string(u) + " " +
                                  std::to_string(v));
    if (u == v) {
      self_loops++;
      continue;
    }
    pairs.emplace_back(u, v);
    pairs.emplace_back(v, u);
  }
  std::size_t before = pairs.size();
  Csr csr = detail::csr_from_pairs(n, pairs);
  if (stats) {
    stats->self_loops_dropped = self_loops;
    // each surviving undirected edge accounts for two ordered pairs
    stats->duplicates_merged = static_cast<std::int64_t>(before - pairs.size()) / 2;
  }
  return csr;
}

inline void validate_graph(const Graph& g) {
  if (g.n < 0) throw std::invalid_argument("graph: negative node count");
  if (g.adj.offsets.size() != static_cast<std::size_t>(g.n) + 1)
    throw std::invalid_argument("graph: CSR offsets size mismatch");
  for (NodeId u = 0; u < g.n; ++u) {
    for (std::int64_t e = g.adj.row_begin(u); e < g.adj.row_end(u); ++e) {
      NodeId v = g.adj.targets[e];
      if (v == u) throw std::invalid_argument("graph: self-loop stored at node " + std::to_string(u));
      if (!g.adj.has_edge(v, u))
        throw std::invalid_argument("graph: adjacency not symmetric at (" + std::to_string(u) +
                                    "," + std::to_string(v) + ")");
    }
  }
  auto check_labels = [&](const std::vector<int>& labels, const char* what) {
    if (labels.size() != static_cast<std::size_t>(g.n))
      throw std::invalid_argument(std::string("graph: ") + what + " length mismatch");
    for (int y : labels)
      if (y < 0 || y >= g.num_classes)
        throw std::invalid_argument(std::string("graph: ") + what + " value out of range");
  };
  if (g.clean_labels) check_labels(*g.clean_labels, "clean labels");
  if (g.noisy_labels) check_labels(*g.noisy_labels, "noisy labels");
  if (g.train_mask.size() != static_cast<std::size_t>(g.n) ||
      g.val_mask.size() != static_cast<std::size_t>(g.n) ||
      g.test_mask.size() != static_cast<std::size_t>(g.n))
    throw std::invalid_argument("graph: mask length mismatch");
  for (NodeId i = 0; i < g.n; ++i)
    if (int(g.train_mask[i]) + int(g.val_mask[i]) + int(g.test_mask[i]) > 1)
      throw std::invalid_argument("graph: masks overlap at node " + std::to_string(i));
  if (g.features.rows != 0 && g.features.rows != static_cast<std::size_t>(g.n))
    throw std::invalid_argument("graph: feature row count mismatch");
}

// ---------------------------------------------------------------------------
// Text formats.
//   edges:    "<u> <v>" per line, 0-indexed
//   features: header "n d", then n lines of d reals
//   labels:   n lines of one integer
//   splits:   n lines of {0=train,1=val,2=test,3=none}
// ---------------------------------------------------------------------------

namespace detail {

inline std::runtime_error parse_error(const std::string& path, std::size_t line,
                                      const std::string& msg) {
  return std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace detail

inline std::vector<std::pair<NodeId, NodeId>> load_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge file: " + path);
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    long long u, v;
    if (!(ls >> u >> v)) throw detail::parse_error(path, lineno, "expected two node ids");
    std::string rest;
    if (ls >> rest) throw detail::parse_error(path, lineno, "trailing tokens after edge");
    edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
  }
  return edges;
}

inline Matrix load_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open features file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw detail::parse_error(path, 1, "missing 'n d' header");
  std::istringstream hs(line);
  std::size_t n, d;
  if (!(hs >> n >> d)) throw detail::parse_error(path, 1, "malformed 'n d' header");
  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw detail::parse_error(path, i + 2, "unexpected end of file");
    std::istringstream ls(line);
    for (std::size_t j = 0; j < d; ++j)
      if (!(ls >> x(i, j)))
        throw detail::parse_error(path, i + 2, "expected " + std::to_string(d) + " values");
  }
  return x;
}

inline std::vector<int> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open labels file: " + path);
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (line.empty()) continue;
    std::istringstream ls(line);
    int y;
    if (!(ls >> y)) throw detail::parse_error(path, lineno, "expected an integer label");
    labels.push_back(y);
  }
  return labels;
}

inline std::vector<Split> load_splits(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open splits file: " + path);
  std::vector<Split> splits;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (line.empty()) continue;
    std::istringstream ls(line);
    int s;
    if (!(ls >> s) || s < 0 || s > 3)
      throw detail::parse_error(path, lineno, "expected a split tag in {0,1,2,3}");
    splits.push_back(static_cast<Split>(s));
  }
  return splits;
}

/// Loads a graph from the four text files. Duplicate and reversed edges are
/// deduplicated, self-loops dropped (counted in `stats`), and a one-sided
/// edge file is symmetrized silently.
inline Graph load_graph(const std::string& edges_path, const std::string& features_path,
                        const std::string& labels_path, const std::string& splits_path,
                        BuildStats* stats = nullptr) {
  Graph g;
  g.features = load_features(features_path);
  g.n = static_cast<NodeId>(g.features.rows);
  auto labels = load_labels(labels_path);
  if (labels.size() != static_cast<std::size_t>(g.n))
    throw std::runtime_error(labels_path + ": label count " + std::to_string(labels.size()) +
                             " does not match node count " + std::to_string(g.n));
  int max_label = -1;
  for (int y : labels) max_label = std::max(max_label, y);
  g.num_classes = max_label + 1;
  g.clean_labels = std::move(labels);
  auto splits = load_splits(splits_path);
  if (splits.size() != static_cast<std::size_t>(g.n))
    throw std::runtime_error(splits_path + ": split count does not match node count");
  g.train_mask.assign(g.n, 0);
  g.val_mask.assign(g.n, 0);
  g.test_mask.assign(g.n, 0);
  for (NodeId i = 0; i < g.n; ++i) {
    switch (splits[i]) {
      case Split::Train: g.train_mask[i] = 1; break;
      case Split::Val: g.val_mask[i] = 1; break;
      case Split::Test: g.test_mask[i] = 1; break;
      case Split::None: break;
    }
  }
  g.adj = build_adjacency(g.n, load_edge_list(edges_path), stats);
  validate_graph(g);
  return g;
}

inline void save_graph(const Graph& g, const std::string& edges_path,
                       const std::string& features_path, const std::string& labels_path,
                       const std::string& splits_path) {
  {
    std::ofstream out(edges_path);
    if (!out) throw std::runtime_error("cannot write " + edges_path);
    for (NodeId u = 0; u < g.n; ++u)
      for (std::int64_t e = g.adj.row_begin(u); e < g.adj.row_end(u); ++e) {
        NodeId v = g.adj.targets[e];
        if (u < v) out << u << " " << v << "\n";
      }
  }
  {
    std::ofstream out(features_path);
    if (!out) throw std::runtime_error("cannot write " + features_path);
    out << g.features.rows << " " << g.features.cols << "\n";
    char buf[32];
    for (std::size_t i = 0; i < g.features.rows; ++i) {
      for (std::size_t j = 0; j < g.features.cols; ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", g.features(i, j));
        out << (j ? " " : "") << buf;
      }
      out << "\n";
    }
  }
  {
    std::ofstream out(labels_path);
    if (!out) throw std::runtime_error("cannot write " + labels_path);
    const auto& labels = g.clean_labels ? *g.clean_labels : *g.noisy_labels;
    for (int y : labels) out << y << "\n";
  }
  {
    std::ofstream out(splits_path);
    if (!out) throw std::runtime_error("cannot write " + splits_path);
    for (NodeId i = 0; i < g.n; ++i) {
      int s = g.train_mask[i] ? 0 : g.val_mask[i] ? 1 : g.test_mask[i] ? 2 : 3;
      out << s << "\n";
    }
  }
}

inline void save_label_file(const std::vector<int>& labels, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (int y : labels) out << y << "\n";
}

// ---------------------------------------------------------------------------
// Normalized adjacency
// ---------------------------------------------------------------------------

/// D^{-1/2} (A + sI) D^{-1/2} with s in {0,1}. Degree-zero nodes keep an
/// all-zero row under s=0 and a unit diagonal under s=1.
struct NormalizedAdjacency {
  Csr matrix;
  bool self_loops = false;

  std::size_t n() const { return matrix.num_rows(); }

  /// y = M x, fixed accumulation order per row.
  void multiply(const double* x, double* y) const {
    const std::size_t nn = n();
    for (std::size_t u = 0; u < nn; ++u) {
      double s = 0.0;
      for (std::int64_t e = matrix.offsets[u]; e < matrix.offsets[u + 1]; ++e)
        s += matrix.values[e] * x[matrix.targets[e]];
      y[u] = s;
    }
  }

  /// Y = M X for dense X (n x c). Parallel over rows.
  Matrix multiply_dense(const Matrix& x, int threads = default_threads()) const {
    if (x.rows != n()) throw std::invalid_argument("normalized adjacency: shape mismatch");
    Matrix y(x.rows, x.cols);
    parallel_for(
        n(),
        [&](std::size_t u) {
          double* yu = y.row(u);
          for (std::int64_t e = matrix.offsets[u]; e < matrix.offsets[u + 1]; ++e) {
            const double w = matrix.values[e];
            const double* xv = x.row(matrix.targets[e]);
            for (std::size_t j = 0; j < x.cols; ++j) yu[j] += w * xv[j];
          }
        },
        threads);
    return y;
  }
};

inline NormalizedAdjacency normalized_adjacency(const Graph& g, bool with_self_loops) {
  NormalizedAdjacency na;
  na.self_loops = with_self_loops;
  std::vector<double> inv_sqrt_deg(g.n, 0.0);
  for (NodeId u = 0; u < g.n; ++u) {
    double deg = static_cast<double>(g.adj.degree(u)) + (with_self_loops ? 1.0 : 0.0);
    if (deg > 0.0) inv_sqrt_deg[u] = 1.0 / std::sqrt(deg);
  }
  Csr& m = na.matrix;
  m.offsets.assign(static_cast<std::size_t>(g.n) + 1, 0);
  for (NodeId u = 0; u < g.n; ++u)
    m.offsets[u + 1] = m.offsets[u] + g.adj.degree(u) + (with_self_loops ? 1 : 0);
  m.targets.resize(m.offsets[g.n]);
  m.values.resize(m.offsets[g.n]);
  for (NodeId u = 0; u < g.n; ++u) {
    std::int64_t w = m.offsets[u];
    bool diag_done = false;
    auto emit = [&](NodeId v) {
      m.targets[w] = v;
      m.values[w] = inv_sqrt_deg[u] * inv_sqrt_deg[v];
      ++w;
    };
    for (std::int64_t e = g.adj.row_begin(u); e < g.adj.row_end(u); ++e) {
      NodeId v = g.adj.targets[e];
      if (with_self_loops && !diag_done && v > u) {
        emit(u);
        diag_done = true;
      }
      emit(v);
    }
    if (with_self_loops && !diag_done) emit(u);
  }
  return na;
}

// ---------------------------------------------------------------------------
// Synthetic generation and structural diagnostics
// ---------------------------------------------------------------------------

struct SbmParams {
  NodeId n = 0;
  int num_classes = 2;
  double p_in = 0.1;
  double p_out = 0.01;
  std::size_t feature_dim = 16;
  double feature_shift = 1.0;
  double train_frac = 0.6;  // remaining nodes split evenly into val/test
  double val_frac = 0.2;
};

/// Balanced-block stochastic block model with per-class Gaussian features;
/// class c has mean feature_shift * e_{c mod d}, unit variance. Deterministic
/// given the seed. Splits are stratified per class.
inline Graph generate_sbm(const SbmParams& p, std::uint64_t seed) {
  if (p.p_in < 0 || p.p_in > 1 || p.p_out < 0 || p.p_out > p.p_in)
    throw std::invalid_argument("generate_sbm: need 0 <= p_out <= p_in <= 1");
  if (p.num_classes < 1 || p.n % p.num_classes != 0)
    throw std::invalid_argument("generate_sbm: n must be divisible by num_classes");
  Graph g;
  g.n = p.n;
  g.num_classes = p.num_classes;
  std::vector<int> labels(p.n);
  const NodeId block = p.n / p.num_classes;
  for (NodeId i = 0; i < p.n; ++i) labels[i] = static_cast<int>(i / block);

  auto edge_rng = make_rng(derive_seed(seed, "sbm_edges"));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId i = 0; i < p.n; ++i)
    for (NodeId j = i + 1; j < p.n; ++j) {
      double prob = labels[i] == labels[j] ? p.p_in : p.p_out;
      if (unif(edge_rng) < prob) edges.emplace_back(i, j);
    }
  g.adj = build_adjacency(p.n, edges);

  auto feat_rng = make_rng(derive_seed(seed, "sbm_features"));
  std::normal_distribution<double> gauss(0.0, 1.0);
  g.features = Matrix(p.n, p.feature_dim);
  for (NodeId i = 0; i < p.n; ++i) {
    for (std::size_t j = 0; j < p.feature_dim; ++j) g.features(i, j) = gauss(feat_rng);
    g.features(i, labels[i] % static_cast<int>(p.feature_dim)) += p.feature_shift;
  }

  // stratified split, shuffled within each class
  g.train_mask.assign(p.n, 0);
  g.val_mask.assign(p.n, 0);
  g.test_mask.assign(p.n, 0);
  auto split_rng = make_rng(derive_seed(seed, "sbm_splits"));
  for (int c = 0; c < p.num_classes; ++c) {
    std::vector<NodeId> ids;
    for (NodeId i = 0; i < p.n; ++i)
      if (labels[i] == c) ids.push_back(i);
    std::shuffle(ids.begin(), ids.end(), split_rng);
    std::size_t ntrain = static_cast<std::size_t>(p.train_frac * ids.size());
    std::size_t nval = static_cast<std::size_t>(p.val_frac * ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (k < ntrain)
        g.train_mask[ids[k]] = 1;
      else if (k < ntrain + nval)
        g.val_mask[ids[k]] = 1;
      else
        g.test_mask[ids[k]] = 1;
    }
  }
  g.clean_labels = std::move(labels);
  validate_graph(g);
  return g;
}

/// Fraction of undirected edges whose endpoints share a label.
inline double edge_homophily(const Graph& g, const std::vector<int>& labels) {
  if (labels.size() != static_cast<std::size_t>(g.n))
    throw std::invalid_argument("edge_homophily: labels must cover all nodes");
  std::int64_t same = 0, total = 0;
  for (NodeId u = 0; u < g.n; ++u)
    for (std::int64_t e = g.adj.row_begin(u); e < g.adj.row_end(u); ++e) {
      NodeId v = g.adj.targets[e];
      if (u < v) {
        total++;
        if (labels[u] == labels[v]) same++;
      }
    }
  if (total == 0) return 1.0;
  return static_cast<double>(same) / static_cast<double>(total);
}

/// Adds `count` uniformly sampled new edges between differently-labeled,
/// currently non-adjacent node pairs. Requires clean labels.
inline Graph inject_heterophilous_edges(const Graph& g, std::int64_t count, std::uint64_t seed) {
  if (!g.clean_labels) throw std::invalid_argument("inject_heterophilous_edges: clean labels required");
  const auto& labels = *g.clean_labels;

  std::vector<std::int64_t> class_count(g.num_classes, 0);
  for (int y : labels) class_count[y]++;
  std::int64_t cross_pairs = 0;
  std::int64_t total_pairs = static_cast<std::int64_t>(g.n) * (g.n - 1) / 2;
  std::int64_t same_pairs = 0;
  for (auto c : class_count) same_pairs += c * (c - 1) / 2;
  cross_pairs = total_pairs - same_pairs;
  std::int64_t existing_cross = 0;
  for (NodeId u = 0; u < g.n; ++u)
    for (std::int64_t e = g.adj.row_begin(u); e < g.adj.row_end(u); ++e) {
      NodeId v = g.adj.targets[e];
      if (u < v && labels[u] != labels[v]) existing_cross++;
    }
  std::int64_t available = cross_pairs - existing_cross;
  if (count > available)
    throw std::invalid_argument("inject_heterophilous_edges: only " + std::to_string(available) +
                                " cross-label non-edges available");
  Graph out = g;
  if (count == 0) return out;

  auto rng = make_rng(derive_seed(seed, "hetero_edges"));
  std::vector<std::pair<NodeId, NodeId>> raw;
  raw.reserve(g.adj.nnz() / 2 + count);
  for (NodeId u = 0; u < g.n; ++u)
    for (std::int64_t e = g.adj.row_begin(u); e < g.adj.row_end(u); ++e)
      if (u < g.adj.targets[e]) raw.emplace_back(u, g.adj.targets[e]);

  std::unordered_set<std::uint64_t> chosen;
  auto code = [&](NodeId a, NodeId b) {
    if (a > b) std::swap(a, b);
    return static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(g.n) + b;
  };
  // rejection sampling unless the candidate pool is nearly exhausted
  if (available >= 4 * count) {
    std::uniform_int_distribution<NodeId> pick(0, g.n - 1);
    while (static_cast<std::int64_t>(chosen.size()) < count) {
      NodeId a = pick(rng), b = pick(rng);
      if (a == b || labels[a] == labels[b]) continue;
      if (g.adj.has_edge(a, b)) continue;
      chosen.insert(code(a, b));
    }
  } else {
    std::vector<std::pair<NodeId, NodeId>> candidates;
    for (NodeId a = 0; a < g.n; ++a)
      for (NodeId b = a + 1; b < g.n; ++b)
        if (labels[a] != labels[b] && !g.adj.has_edge(a, b)) candidates.emplace_back(a, b);
    std::shuffle(candidates.begin(), candidates.end(), rng);
    for (std::int64_t k = 0; k < count; ++k) chosen.insert(code(candidates[k].first, candidates[k].second));
  }
  for (auto c : chosen)
    raw.emplace_back(static_cast<NodeId>(c / g.n), static_cast<NodeId>(c % g.n));
  out.adj = build_adjacency(g.n, raw);
  validate_graph(out);
  return out;
}

enum class BoundaryTag : std::uint8_t { Far = 0, Near = 1 };

/// Tags a node Far iff every node within two hops shares its label.
/// Isolated nodes are Far.
inline std::vector<BoundaryTag> classify_boundary(const Graph& g, const std::vector<int>& labels) {
  if (labels.size() != static_cast<std::size_t>(g.n))
    throw std::invalid_argument("classify_boundary: labels must cover all nodes");
  std::vector<BoundaryTag> tags(g.n, BoundaryTag::Far);
  for (NodeId u = 0; u < g.n; ++u) {
    bool near = false;
    for (std::int64_t e = g.adj.row_begin(u); e < g.adj.row_end(u) && !near; ++e) {
      NodeId v = g.adj.targets[e];
      if (labels[v] != labels[u]) near = true;
      for (std::int64_t f = g.adj.row_begin(v); f < g.adj.row_end(v) && !near; ++f)
        if (labels[g.adj.targets[f]] != labels[u]) near = true;
    }
    tags[u] = near ? BoundaryTag::Near : BoundaryTag::Far;
  }
  return tags;
}

}  // namespace tss
