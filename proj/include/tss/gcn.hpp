#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "tss/graph.hpp"
#include "tss/matrix.hpp"
#include "tss/random.hpp"

namespace tss {

/// Two-layer GCN: logits = A_s * relu(A_s * X * W1) * W2 with A_s the
/// self-loop-normalized adjacency. No dropout; training is deterministic
/// given the seed.
struct GcnParams {
  Matrix w1;  // d x h
  Matrix w2;  // h x C
  int hidden = 16;
};

struct AdamState {
  std::int64_t t = 0;
  Matrix m1, v1;  // moments for w1
  Matrix m2, v2;  // moments for w2
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
};

struct GcnGrads {
  Matrix w1;
  Matrix w2;
};

struct TrainConfig {
  double lr = 0.01;
  double weight_decay = 5e-4;
  int hidden = 16;
  int epochs = 200;
  std::uint64_t seed = 0;
  int patience = 0;  // >0: early stop on val accuracy and return best-val params
  std::vector<NodeId> val_ids;  // empty: use the graph's val mask
  int threads = default_threads();
};

inline GcnParams glorot_init(std::size_t in_dim, int hidden, int num_classes,
                             std::uint64_t seed) {
  GcnParams p;
  p.hidden = hidden;
  p.w1 = Matrix(in_dim, hidden);
  p.w2 = Matrix(hidden, num_classes);
  auto rng = make_rng(derive_seed(seed, "glorot"));
  auto fill = [&](Matrix& w) {
    double limit = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
    std::uniform_real_distribution<double> unif(-limit, limit);
    for (double& v : w.data) v = unif(rng);
  };
  fill(p.w1);
  fill(p.w2);
  return p;
}

struct GcnForward {
  Matrix pre_hidden;  // A_s X W1, before relu
  Matrix hidden;      // relu of the above
  Matrix logits;      // A_s hidden W2
};

inline GcnForward gcn_forward(const GcnParams& params, const NormalizedAdjacency& adj_s,
                              const Matrix& features, int threads = default_threads()) {
  if (features.cols != params.w1.rows)
    throw std::invalid_argument("gcn_forward: feature dim does not match W1");
  if (params.w1.cols != params.w2.rows)
    throw std::invalid_argument("gcn_forward: W1/W2 hidden dims differ");
  GcnForward f;
  Matrix xw = matmul(features, params.w1, threads);
  f.pre_hidden = adj_s.multiply_dense(xw, threads);
  f.hidden = f.pre_hidden;
  for (double& v : f.hidden.data) v = v > 0.0 ? v : 0.0;
  Matrix hw = matmul(f.hidden, params.w2, threads);
  f.logits = adj_s.multiply_dense(hw, threads);
  return f;
}

inline void softmax_row(const double* logits, std::size_t c, double* probs) {
  double mx = logits[0];
  for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits[j]);
  double z = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    probs[j] = std::exp(logits[j] - mx);
    z += probs[j];
  }
  for (std::size_t j = 0; j < c; ++j) probs[j] /= z;
}

/// Weighted-mean cross-entropy (weights normalized to sum 1) plus
/// (weight_decay/2)*||W||^2, with exact analytic gradients.
/// `forward` must come from gcn_forward on the same inputs.
inline double loss_and_grads_from_forward(const GcnParams& params, const NormalizedAdjacency& adj_s,
                                          const Matrix& features, const GcnForward& forward,
                                          const std::vector<int>& labels,
                                          const std::vector<double>& node_weights,
                                          double weight_decay, GcnGrads& grads,
                                          int threads = default_threads()) {
  const std::size_t n = features.rows;
  const std::size_t c = params.w2.cols;
  if (node_weights.size() != n) throw std::invalid_argument("loss_and_grads: weight length mismatch");
  double wsum = 0.0;
  for (double w : node_weights) {
    if (w < 0.0) throw std::invalid_argument("loss_and_grads: negative node weight");
    wsum += w;
  }
  if (wsum == 0.0) throw std::invalid_argument("loss_and_grads: all node weights are zero");

  double loss = 0.0;
  Matrix dlogits(n, c);
  std::vector<double> probs(c);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = node_weights[i];
    if (w == 0.0) continue;
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c)
      throw std::invalid_argument("loss_and_grads: label out of range at node " + std::to_string(i));
    softmax_row(forward.logits.row(i), c, probs.data());
    loss -= w * std::log(std::max(probs[y], 1e-300));
    double* d = dlogits.row(i);
    for (std::size_t j = 0; j < c; ++j) d[j] = w / wsum * probs[j];
    d[y] -= w / wsum;
  }
  loss /= wsum;
  loss += 0.5 * weight_decay * (params.w1.squared_norm() + params.w2.squared_norm());

  // backward; A_s is symmetric so A_s^T = A_s
  Matrix dp2 = adj_s.multiply_dense(dlogits, threads);
  grads.w2 = matmul_at_b(forward.hidden, dp2, threads);
  for (std::size_t e = 0; e < grads.w2.data.size(); ++e)
    grads.w2.data[e] += weight_decay * params.w2.data[e];
  Matrix dh = matmul_a_bt(dp2, params.w2, threads);
  for (std::size_t e = 0; e < dh.data.size(); ++e)
    if (forward.pre_hidden.data[e] <= 0.0) dh.data[e] = 0.0;
  Matrix dp1 = adj_s.multiply_dense(dh, threads);
  grads.w1 = matmul_at_b(features, dp1, threads);
  for (std::size_t e = 0; e < grads.w1.data.size(); ++e)
    grads.w1.data[e] += weight_decay * params.w1.data[e];
  return loss;
}

inline double loss_and_grads(const GcnParams& params, const NormalizedAdjacency& adj_s,
                             const Matrix& features, const std::vector<int>& labels,
                             const std::vector<double>& node_weights, double weight_decay,
                             GcnGrads& grads, int threads = default_threads()) {
  GcnForward f = gcn_forward(params, adj_s, features, threads);
  return loss_and_grads_from_forward(params, adj_s, features, f, labels, node_weights,
                                     weight_decay, grads, threads);
}

/// Standard bias-corrected Adam update, in place.
inline void adam_step(AdamState& state, GcnParams& params, const GcnGrads& grads, double lr) {
  if (!grads.w1.same_shape(params.w1) || !grads.w2.same_shape(params.w2))
    throw std::invalid_argument("adam_step: gradient shapes do not match parameters");
  if (state.t == 0) {
    state.m1 = Matrix(params.w1.rows, params.w1.cols);
    state.v1 = Matrix(params.w1.rows, params.w1.cols);
    state.m2 = Matrix(params.w2.rows, params.w2.cols);
    state.v2 = Matrix(params.w2.rows, params.w2.cols);
  }
  state.t++;
  const double bc1 = 1.0 - std::pow(AdamState::kBeta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(AdamState::kBeta2, static_cast<double>(state.t));
  auto update = [&](Matrix& p, Matrix& m, Matrix& v, const Matrix& g) {
    for (std::size_t e = 0; e < p.data.size(); ++e) {
      m.data[e] = AdamState::kBeta1 * m.data[e] + (1.0 - AdamState::kBeta1) * g.data[e];
      v.data[e] = AdamState::kBeta2 * v.data[e] + (1.0 - AdamState::kBeta2) * g.data[e] * g.data[e];
      double mhat = m.data[e] / bc1;
      double vhat = v.data[e] / bc2;
      p.data[e] -= lr * mhat / (std::sqrt(vhat) + AdamState::kEps);
    }
  };
  update(params.w1, state.m1, state.v1, grads.w1);
  update(params.w2, state.m2, state.v2, grads.w2);
}

// ---------------------------------------------------------------------------
// Prediction and accuracy
// ---------------------------------------------------------------------------

inline int argmax_lowest_tie(const double* row, std::size_t c) {
  int best = 0;
  for (std::size_t j = 1; j < c; ++j)
    if (row[j] > row[best]) best = static_cast<int>(j);
  return best;
}

struct Prediction {
  std::vector<int> labels;
  Matrix probs;  // rows sum to 1
};

inline Prediction predict_from_logits(const Matrix& logits) {
  Prediction p;
  p.labels.resize(logits.rows);
  p.probs = Matrix(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    softmax_row(logits.row(i), logits.cols, p.probs.row(i));
    p.labels[i] = argmax_lowest_tie(logits.row(i), logits.cols);
  }
  return p;
}

/// Deterministic argmax prediction (ties broken toward the lowest class).
inline Prediction predict(const GcnParams& params, const Graph& graph,
                          int threads = default_threads()) {
  NormalizedAdjacency adj_s = normalized_adjacency(graph, true);
  GcnForward f = gcn_forward(params, adj_s, graph.features, threads);
  return predict_from_logits(f.logits);
}

inline double accuracy(const Matrix& logits, const std::vector<int>& labels,
                       const std::vector<NodeId>& ids) {
  if (ids.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::int64_t hit = 0;
  for (NodeId i : ids)
    if (argmax_lowest_tie(logits.row(i), logits.cols) == labels[i]) hit++;
  return static_cast<double>(hit) / static_cast<double>(ids.size());
}

// ---------------------------------------------------------------------------
// Plain full-batch training (the cross-entropy baseline)
// ---------------------------------------------------------------------------

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
};

struct TrainResult {
  GcnParams params;
  std::vector<EpochStats> history;
  int best_epoch = 0;  // 1-based epoch of the selected checkpoint
};

/// Full-batch training with cross-entropy on `mask` nodes against `labels`.
/// Metrics each epoch are computed from the pre-step forward pass; val
/// accuracy is measured on config.val_ids (or the graph val mask) against
/// `labels`, test accuracy against the clean labels.
inline TrainResult train_plain(const Graph& graph, const std::vector<int>& labels,
                               const std::vector<std::uint8_t>& mask, const TrainConfig& config) {
  if (config.epochs < 1) throw std::invalid_argument("train_plain: epochs must be >= 1");
  std::vector<NodeId> train_ids;
  for (NodeId i = 0; i < graph.n; ++i)
    if (mask[i]) train_ids.push_back(i);
  if (train_ids.empty()) throw std::invalid_argument("train_plain: empty training mask");

  NormalizedAdjacency adj_s = normalized_adjacency(graph, true);
  std::vector<double> weights(graph.n, 0.0);
  for (NodeId i : train_ids) weights[i] = 1.0;

  std::vector<NodeId> val_ids = config.val_ids.empty() ? graph.val_nodes() : config.val_ids;
  std::vector<NodeId> test_ids = graph.test_nodes();

  TrainResult result;
  result.params = glorot_init(graph.features.cols, config.hidden, graph.num_classes, config.seed);
  AdamState adam;
  GcnGrads grads;
  GcnParams best = result.params;
  double best_val = -1.0;
  int best_epoch = 0, since_best = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    GcnForward fwd = gcn_forward(result.params, adj_s, graph.features, config.threads);
    double loss = loss_and_grads_from_forward(result.params, adj_s, graph.features, fwd, labels,
                                              weights, config.weight_decay, grads, config.threads);
    EpochStats es;
    es.epoch = epoch;
    es.loss = loss;
    es.train_acc = accuracy(fwd.logits, labels, train_ids);
    es.val_acc = accuracy(fwd.logits, labels, val_ids);
    es.test_acc = graph.clean_labels ? accuracy(fwd.logits, *graph.clean_labels, test_ids)
                                     : std::numeric_limits<double>::quiet_NaN();
    result.history.push_back(es);

    if (!val_ids.empty() && es.val_acc > best_val) {
      best_val = es.val_acc;
      best = result.params;
      best_epoch = epoch;
      since_best = 0;
    } else {
      since_best++;
    }
    if (config.patience > 0 && !val_ids.empty() && since_best >= config.patience) break;

    adam_step(adam, result.params, grads, config.lr);
  }
  if (config.patience > 0 && best_epoch > 0) {
    result.params = best;
    result.best_epoch = best_epoch;
  } else {
    result.best_epoch = static_cast<int>(result.history.size());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints: shapes + row-major 8-byte reals + a small config echo
// ---------------------------------------------------------------------------

inline void save_checkpoint(const GcnParams& params, const TrainConfig& config,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  const char magic[8] = {'T', 'S', 'S', 'C', 'K', 'P', 'T', '1'};
  out.write(magic, 8);
  std::uint64_t dims[4] = {params.w1.rows, params.w1.cols, params.w2.rows, params.w2.cols};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  double echo[4] = {config.lr, config.weight_decay, static_cast<double>(config.epochs),
                    static_cast<double>(config.seed)};
  out.write(reinterpret_cast<const char*>(echo), sizeof(echo));
  out.write(reinterpret_cast<const char*>(params.w1.data.data()),
            static_cast<std::streamsize>(params.w1.data.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(params.w2.data.data()),
            static_cast<std::streamsize>(params.w2.data.size() * sizeof(double)));
  if (!out) throw std::runtime_error("short write to checkpoint: " + path);
}

inline GcnParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (std::string(magic, 8) != "TSSCKPT1") throw std::runtime_error("bad checkpoint magic: " + path);
  std::uint64_t dims[4];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  double echo[4];
  in.read(reinterpret_cast<char*>(echo), sizeof(echo));
  GcnParams p;
  p.w1 = Matrix(dims[0], dims[1]);
  p.w2 = Matrix(dims[2], dims[3]);
  p.hidden = static_cast<int>(dims[1]);
  in.read(reinterpret_cast<char*>(p.w1.data.data()),
          static_cast<std::streamsize>(p.w1.data.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(p.w2.data.data()),
          static_cast<std::streamsize>(p.w2.data.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return p;
}

}  // namespace tss
