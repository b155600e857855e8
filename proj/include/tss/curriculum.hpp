#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "tss/centrality.hpp"
#include "tss/gcn.hpp"
#include "tss/graph.hpp"
#include "tss/ppr.hpp"
#include "tss/random.hpp"

namespace tss {

enum class PacingKind : std::uint8_t { Linear = 0, Root = 1, Geometric = 2 };

inline const char* pacing_name(PacingKind k) {
  switch (k) {
    case PacingKind::Linear: return "linear";
    case PacingKind::Root: return "root";
    case PacingKind::Geometric: return "geometric";
  }
  return "?";
}

inline PacingKind parse_pacing(const std::string& s) {
  if (s == "linear") return PacingKind::Linear;
  if (s == "root") return PacingKind::Root;
  if (s == "geometric") return PacingKind::Geometric;
  throw std::invalid_argument("unknown pacing kind: " + s);
}

/// Pace schedule: the fraction of CBC-sorted training nodes available at
/// epoch t. Non-decreasing in t; exactly 1 at t == T.
///   linear:    min(1, l_{t-1} + (1-l_{t-1}) * t/T)
///   root:      min(1, sqrt(l_{t-1}^2 + (1-l_{t-1}^2) * t/T))
///   geometric: lambda0^(1 - t/T), clamped to [lambda0, 1]
inline double pacing(PacingKind kind, double lambda_prev, double lambda0, int t, int total) {
  if (t < 1 || t > total) throw std::invalid_argument("pacing: t out of range [1, T]");
  if (t == total) return 1.0;
  const double frac = static_cast<double>(t) / static_cast<double>(total);
  double v = 1.0;
  switch (kind) {
    case PacingKind::Linear:
      v = lambda_prev + (1.0 - lambda_prev) * frac;
      break;
    case PacingKind::Root:
      v = std::sqrt(lambda_prev * lambda_prev + (1.0 - lambda_prev * lambda_prev) * frac);
      break;
    case PacingKind::Geometric:
      v = std::pow(lambda0, 1.0 - frac);
      v = std::max(v, lambda0);
      break;
  }
  return std::min(1.0, v);
}

/// Ascending CBC order over the training ids, ties broken by node id.
inline std::vector<NodeId> sort_by_cbc(const CbcScores& cbc, const std::vector<NodeId>& train_ids) {
  std::vector<NodeId> order = train_ids;
  std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    if (cbc.scores[a] != cbc.scores[b]) return cbc.scores[a] < cbc.scores[b];
    return a < b;
  });
  return order;
}

/// Nodes of the pool whose noisy label matches the classifier prediction.
inline std::vector<NodeId> confident_subset(const GcnParams& pretrained, const Graph& graph,
                                            const std::vector<int>& noisy_labels,
                                            const std::vector<NodeId>& candidate_pool) {
  if (candidate_pool.empty()) throw std::invalid_argument("confident_subset: empty candidate pool");
  Prediction pred = predict(pretrained, graph);
  std::vector<NodeId> out;
  for (NodeId i : candidate_pool)
    if (pred.labels[i] == noisy_labels[i]) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// The TSS loop
// ---------------------------------------------------------------------------

struct TssConfig {
  double alpha = 0.15;      // PPR teleport
  double lambda0 = 0.5;     // initial pace
  int curriculum_epochs = 500;  // T; also the retraining budget
  PacingKind pacing = PacingKind::Linear;
  int pretrain_epochs = 400;
  double noisy_val_fraction = 0.10;
  TrainConfig train;        // lr / weight decay / hidden / patience for both phases
  PprOptions ppr;           // tol, max_iter, dense threshold (alpha taken from above)
  CbcOptions cbc;
  /// 0: extract with the fixed pretrained classifier (the default reading).
  /// k>0: ablation mode, re-extract with the current model every k epochs.
  int refresh_every = 0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lambda0 > 0.0 && lambda0 <= 1.0)) throw std::invalid_argument("tss: lambda0 must be in (0,1]");
    if (curriculum_epochs < 1) throw std::invalid_argument("tss: T must be >= 1");
    if (noisy_val_fraction < 0.0 || noisy_val_fraction >= 1.0)
      throw std::invalid_argument("tss: noisy_val_fraction must be in [0,1)");
  }
};

struct TraceEpoch {
  int t = 0;
  double lambda = 0.0;
  std::int64_t pool_size = 0;
  std::vector<NodeId> confident;
  std::int64_t confident_size = 0;
  double loss = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  bool skipped = false;  // empty confident subset, no optimizer step
};

struct TrainTrace {
  std::vector<TraceEpoch> epochs;
  std::vector<NodeId> sorted_order;  // train-core nodes, ascending CBC
  std::vector<NodeId> train_core;    // train nodes actually optimized over
  std::vector<NodeId> noisy_val;     // carved validation nodes (noisy labels)
  std::vector<EpochStats> pretrain_history;
  int best_epoch = 0;
  double best_val_acc = 0.0;
  double final_test_acc = std::numeric_limits<double>::quiet_NaN();
};

struct TssResult {
  GcnParams params;
  TrainTrace trace;
};

struct NoisyValSplit {
  std::vector<NodeId> core;
  std::vector<NodeId> val;
};

/// Reserves `fraction` of the training nodes as a noisy validation set.
/// Shared by run_tss and the baseline harness so both see the same split
/// for the same seed.
inline NoisyValSplit carve_noisy_val(const std::vector<NodeId>& train_ids, double fraction,
                                     std::uint64_t seed) {
  auto rng = make_rng(derive_seed(seed, "noisy_val"));
  std::vector<NodeId> shuffled = train_ids;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::size_t nval =
      static_cast<std::size_t>(fraction * static_cast<double>(shuffled.size()));
  NoisyValSplit split;
  split.val.assign(shuffled.begin(), shuffled.begin() + nval);
  split.core.assign(shuffled.begin() + nval, shuffled.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.core.begin(), split.core.end());
  return split;
}

/// Algorithm: carve a noisy validation split, pretrain on the rest, compute
/// PPR and CBC over the training core, sort ascending, then per epoch grow
/// the candidate pool by the pacing schedule, extract the confident subset
/// and take one optimizer step on it. Returns the checkpoint with the best
/// noisy-validation accuracy. `precomputed_ppr` skips the PPR solve (it must
/// match the graph and alpha).
inline TssResult run_tss(const Graph& graph, const std::vector<int>& noisy_labels,
                         const TssConfig& config, const PprMatrix* precomputed_ppr = nullptr) {
  config.validate();
  if (noisy_labels.size() != static_cast<std::size_t>(graph.n))
    throw std::invalid_argument("run_tss: noisy labels must cover all nodes");
  std::vector<NodeId> train_ids = graph.train_nodes();
  if (train_ids.empty()) throw std::invalid_argument("run_tss: empty train mask");

  TssResult result;
  TrainTrace& trace = result.trace;

  // (1) noisy validation carve
  {
    NoisyValSplit split = carve_noisy_val(train_ids, config.noisy_val_fraction, config.seed);
    trace.noisy_val = std::move(split.val);
    trace.train_core = std::move(split.core);
  }
  if (trace.train_core.empty()) throw std::invalid_argument("run_tss: no training nodes left after carve");

  // (2) pretrain f^p on the training core
  std::vector<std::uint8_t> core_mask(graph.n, 0);
  for (NodeId i : trace.train_core) core_mask[i] = 1;
  TrainConfig pre_cfg = config.train;
  pre_cfg.epochs = config.pretrain_epochs;
  pre_cfg.patience = 0;
  pre_cfg.seed = derive_seed(config.seed, "pretrain");
  pre_cfg.val_ids = trace.noisy_val;
  TrainResult pretrained = train_plain(graph, noisy_labels, core_mask, pre_cfg);
  trace.pretrain_history = std::move(pretrained.history);

  // (3) PPR (no self-loops, following the definition of A_hat) and CBC
  PprMatrix ppr_local;
  const PprMatrix* ppr = precomputed_ppr;
  if (!ppr) {
    PprOptions popts = config.ppr;
    popts.alpha = config.alpha;
    ppr_local = ppr_matrix(normalized_adjacency(graph, false), popts);
    ppr = &ppr_local;
  }
  CbcOptions cbc_opts = config.cbc;
  cbc_opts.seed = derive_seed(config.seed, "cbc");
  CbcScores cbc = cbc_scores(*ppr, noisy_labels, trace.train_core, cbc_opts);

  // (4) ascending difficulty order
  trace.sorted_order = sort_by_cbc(cbc, trace.train_core);
  const std::int64_t n_tr = static_cast<std::int64_t>(trace.sorted_order.size());

  // fixed confident flags from f^p
  NormalizedAdjacency adj_s = normalized_adjacency(graph, true);
  std::vector<std::uint8_t> confident_flag(graph.n, 0);
  {
    GcnForward f = gcn_forward(pretrained.params, adj_s, graph.features, config.train.threads);
    for (NodeId i : trace.train_core)
      confident_flag[i] =
          argmax_lowest_tie(f.logits.row(i), f.logits.cols) == noisy_labels[i] ? 1 : 0;
  }

  // (5) curriculum retraining
  TrainConfig re_cfg = config.train;
  re_cfg.seed = derive_seed(config.seed, "retrain");
  result.params = glorot_init(graph.features.cols, re_cfg.hidden, graph.num_classes, re_cfg.seed);
  AdamState adam;
  GcnGrads grads;
  GcnParams best = result.params;
  double best_val = -1.0;
  int best_epoch = 0, since_best = 0;
  std::vector<NodeId> test_ids = graph.test_nodes();
  std::vector<double> weights(graph.n, 0.0);
  double lambda = config.lambda0;

  for (int t = 1; t <= config.curriculum_epochs; ++t) {
    lambda = pacing(config.pacing, lambda, config.lambda0, t, config.curriculum_epochs);
    std::int64_t pool_size = static_cast<std::int64_t>(lambda * static_cast<double>(n_tr));
    pool_size = std::min(pool_size, n_tr);

    TraceEpoch te;
    te.t = t;
    te.lambda = lambda;
    te.pool_size = pool_size;

    GcnForward fwd = gcn_forward(result.params, adj_s, graph.features, re_cfg.threads);
    if (config.refresh_every > 0 && (t - 1) % config.refresh_every == 0) {
      for (NodeId i : trace.train_core)
        confident_flag[i] =
            argmax_lowest_tie(fwd.logits.row(i), fwd.logits.cols) == noisy_labels[i] ? 1 : 0;
    }
    for (std::int64_t k = 0; k < pool_size; ++k) {
      NodeId i = trace.sorted_order[k];
      if (confident_flag[i]) te.confident.push_back(i);
    }
    te.confident_size = static_cast<std::int64_t>(te.confident.size());

    if (te.confident.empty()) {
      te.skipped = true;
      te.loss = std::numeric_limits<double>::quiet_NaN();
      te.val_acc = std::numeric_limits<double>::quiet_NaN();
      te.test_acc = std::numeric_limits<double>::quiet_NaN();
      trace.epochs.push_back(std::move(te));
      continue;
    }

    std::fill(weights.begin(), weights.end(), 0.0);
    for (NodeId i : te.confident) weights[i] = 1.0;
    te.loss = loss_and_grads_from_forward(result.params, adj_s, graph.features, fwd, noisy_labels,
                                          weights, re_cfg.weight_decay, grads, re_cfg.threads);
    te.val_acc = accuracy(fwd.logits, noisy_labels, trace.noisy_val);
    te.test_acc = graph.clean_labels ? accuracy(fwd.logits, *graph.clean_labels, test_ids)
                                     : std::numeric_limits<double>::quiet_NaN();
    trace.epochs.push_back(te);

    if (!trace.noisy_val.empty() && te.val_acc > best_val) {
      best_val = te.val_acc;
      best = result.params;
      best_epoch = t;
      since_best = 0;
    } else {
      since_best++;
    }
    // early stopping becomes active only once the full pool is in play
    if (re_cfg.patience > 0 && lambda >= 1.0 && !trace.noisy_val.empty() &&
        since_best >= re_cfg.patience)
      break;

    adam_step(adam, result.params, grads, re_cfg.lr);
  }

  if (best_epoch > 0) {
    result.params = best;
    trace.best_epoch = best_epoch;
    trace.best_val_acc = best_val;
  } else {
    trace.best_epoch = static_cast<int>(trace.epochs.size());
  }
  if (graph.clean_labels) {
    GcnForward f = gcn_forward(result.params, adj_s, graph.features, re_cfg.threads);
    trace.final_test_acc = accuracy(f.logits, *graph.clean_labels, test_ids);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Extraction quality diagnostics
// ---------------------------------------------------------------------------

struct Fscore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  bool defined = false;
};

/// Precision/recall/F of an extraction against ground-truth cleanliness.
/// `clean_flags` is indexed by node id; recall is measured against the clean
/// members of `reference_pool`. Undefined when a denominator is zero.
inline Fscore extraction_fscore(const std::vector<NodeId>& extracted,
                                const std::vector<NodeId>& reference_pool,
                                const std::vector<std::uint8_t>& clean_flags) {
  Fscore out;
  std::int64_t pool_clean = 0;
  for (NodeId i : reference_pool)
    if (clean_flags[i]) pool_clean++;
  std::int64_t hit = 0;
  for (NodeId i : extracted)
    if (clean_flags[i]) hit++;
  if (extracted.empty() || pool_clean == 0) return out;
  out.precision = static_cast<double>(hit) / static_cast<double>(extracted.size());
  out.recall = static_cast<double>(hit) / static_cast<double>(pool_clean);
  out.defined = true;
  out.f = (out.precision + out.recall > 0.0)
              ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
              : 0.0;
  return out;
}

struct CbcFscoreRow {
  double mean_cbc = 0.0;
  double fscore = 0.0;
  bool defined = false;
};

struct CbcFscoreResult {
  double pearson_r = 0.0;
  double p_value = 1.0;
  std::vector<CbcFscoreRow> rows;
  int valid_subsets = 0;
};

/// Correlation between a random train subset's mean CBC and the F-score of
/// confident-node extraction restricted to it. Requires clean labels as
/// ground truth. Throws when fewer than three subsets are usable or the
/// inputs are degenerate (constant CBC).
inline CbcFscoreResult cbc_fscore_correlation(const Graph& graph,
                                              const std::vector<int>& noisy_labels,
                                              const GcnParams& pretrained, int num_subsets,
                                              int subset_size, std::uint64_t seed,
                                              double alpha = 0.15,
                                              const PprMatrix* precomputed_ppr = nullptr,
                                              const CbcOptions& cbc_opts = {}) {
  if (!graph.clean_labels)
    throw std::invalid_argument("cbc_fscore_correlation: clean labels required");
  std::vector<NodeId> train_ids = graph.train_nodes();
  if (static_cast<int>(train_ids.size()) < subset_size || subset_size < 1)
    throw std::invalid_argument("cbc_fscore_correlation: subset size exceeds train set");

  PprMatrix ppr_local;
  const PprMatrix* ppr = precomputed_ppr;
  if (!ppr) {
    PprOptions popts;
    popts.alpha = alpha;
    ppr_local = ppr_matrix(normalized_adjacency(graph, false), popts);
    ppr = &ppr_local;
  }
  CbcOptions copts = cbc_opts;
  copts.seed = derive_seed(seed, "cbc");
  CbcScores cbc = cbc_scores(*ppr, noisy_labels, train_ids, copts);

  Prediction pred = predict(pretrained, graph);
  std::vector<std::uint8_t> clean_flags(graph.n, 0);
  for (NodeId i = 0; i < graph.n; ++i)
    clean_flags[i] = ((*graph.clean_labels)[i] == noisy_labels[i]) ? 1 : 0;

  CbcFscoreResult out;
  auto rng = make_rng(derive_seed(seed, "subsets"));
  std::vector<double> xs, ys;
  for (int s = 0; s < num_subsets; ++s) {
    std::vector<NodeId> pool = train_ids;
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(subset_size);
    std::vector<NodeId> extracted;
    double mean_cbc = 0.0;
    for (NodeId i : pool) {
      mean_cbc += cbc.scores[i];
      if (pred.labels[i] == noisy_labels[i]) extracted.push_back(i);
    }
    mean_cbc /= static_cast<double>(pool.size());
    Fscore fs = extraction_fscore(extracted, pool, clean_flags);
    CbcFscoreRow row;
    row.mean_cbc = mean_cbc;
    row.defined = fs.defined;
    row.fscore = fs.defined ? fs.f : 0.0;
    out.rows.push_back(row);
    if (fs.defined) {
      xs.push_back(mean_cbc);
      ys.push_back(fs.f);
      out.valid_subsets++;
    }
  }
  if (out.valid_subsets < 3)
    throw std::runtime_error("cbc_fscore_correlation: fewer than 3 usable subsets");
  out.pearson_r = pearson(xs, ys);  // throws on degenerate variance
  out.p_value = pearson_pvalue(out.pearson_r, xs.size());
  return out;
}

}  // namespace tss
