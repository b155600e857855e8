#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"
#include "tss/gcn.hpp"
#include "tss/noise.hpp"

using namespace tss;
using namespace tss::test;
using Catch::Approx;

namespace {

Graph small_instance(NodeId n, int C, std::uint64_t seed) {
  Graph g = random_connected_graph(n, 0.15, seed);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> gauss(0, 1);
  g.features = Matrix(n, 5);
  for (double& v : g.features.data) v = gauss(rng);
  g.num_classes = C;
  g.clean_labels = random_labels(n, C, seed + 2);
  for (NodeId i = 0; i < n; ++i) g.train_mask[i] = 1;
  return g;
}

/// Central finite differences of the loss with respect to every entry.
double fd_relative_error(const Graph& g, const std::vector<double>& weights,
                         std::uint64_t seed) {
  auto adj_s = normalized_adjacency(g, true);
  GcnParams p = glorot_init(g.features.cols, 8, g.num_classes, seed);
  const auto& labels = *g.clean_labels;
  GcnGrads grads;
  loss_and_grads(p, adj_s, g.features, labels, weights, 5e-4, grads);

  const double h = 1e-5;
  double max_rel = 0.0;
  auto probe = [&](Matrix& block, const Matrix& analytic) {
    for (std::size_t e = 0; e < block.data.size(); ++e) {
      double keep = block.data[e];
      GcnGrads scratch;
      block.data[e] = keep + h;
      double up = loss_and_grads(p, adj_s, g.features, labels, weights, 5e-4, scratch);
      block.data[e] = keep - h;
      double down = loss_and_grads(p, adj_s, g.features, labels, weights, 5e-4, scratch);
      block.data[e] = keep;
      double fd = (up - down) / (2 * h);
      double denom = std::max({std::abs(fd), std::abs(analytic.data[e]), 1e-8});
      max_rel = std::max(max_rel, std::abs(fd - analytic.data[e]) / denom);
    }
  };
  probe(p.w1, grads.w1);
  probe(p.w2, grads.w2);
  return max_rel;
}

}  // namespace

TEST_CASE("zero weights give zero logits and a uniform softmax") {
  Graph g = small_instance(6, 3, 1);
  auto adj_s = normalized_adjacency(g, true);
  GcnParams p;
  p.hidden = 4;
  p.w1 = Matrix(g.features.cols, 4, 0.0);
  p.w2 = Matrix(4, 3, 0.0);
  GcnForward f = gcn_forward(p, adj_s, g.features);
  for (double v : f.logits.data) REQUIRE(v == 0.0);
  Prediction pred = predict_from_logits(f.logits);
  for (std::size_t i = 0; i < f.logits.rows; ++i) {
    for (std::size_t c = 0; c < 3; ++c) REQUIRE(pred.probs(i, c) == Approx(1.0 / 3.0));
    REQUIRE(pred.labels[i] == 0);  // tie-break to the lowest class
  }
}

TEST_CASE("single self-looped node collapses to a plain MLP") {
  Graph g;
  g.n = 1;
  g.adj = build_adjacency(1, {});
  g.num_classes = 2;
  g.features = Matrix(1, 3);
  g.features(0, 0) = 0.3;
  g.features(0, 1) = -1.2;
  g.features(0, 2) = 0.7;
  g.clean_labels = std::vector<int>{1};
  g.train_mask = {1};
  g.val_mask = {0};
  g.test_mask = {0};
  auto adj_s = normalized_adjacency(g, true);  // single node: A_s = [1]
  GcnParams p = glorot_init(3, 4, 2, 9);
  GcnForward f = gcn_forward(p, adj_s, g.features);
  for (std::size_t c = 0; c < 2; ++c) {
    double manual = 0.0;
    for (int hcol = 0; hcol < 4; ++hcol) {
      double pre = 0.0;
      for (std::size_t j = 0; j < 3; ++j) pre += g.features(0, j) * p.w1(j, hcol);
      manual += std::max(pre, 0.0) * p.w2(hcol, c);
    }
    REQUIRE(f.logits(0, c) == Approx(manual).epsilon(1e-12));
  }
}

TEST_CASE("forward pass is permutation equivariant") {
  Graph g = small_instance(20, 3, 33);
  auto adj_s = normalized_adjacency(g, true);
  GcnParams p = glorot_init(g.features.cols, 8, 3, 7);
  GcnForward f = gcn_forward(p, adj_s, g.features);

  // permute nodes
  std::vector<NodeId> perm(g.n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(5);
  std::shuffle(perm.begin(), perm.end(), rng);  // perm[old] = new
  Graph h = g;
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId u = 0; u < g.n; ++u)
    for (std::int64_t e = g.adj.row_begin(u); e < g.adj.row_end(u); ++e)
      if (u < g.adj.targets[e]) edges.emplace_back(perm[u], perm[g.adj.targets[e]]);
  h.adj = build_adjacency(g.n, edges);
  for (NodeId u = 0; u < g.n; ++u)
    for (std::size_t j = 0; j < g.features.cols; ++j) h.features(perm[u], j) = g.features(u, j);
  auto adj_sp = normalized_adjacency(h, true);
  GcnForward fp = gcn_forward(p, adj_sp, h.features);
  for (NodeId u = 0; u < g.n; ++u)
    for (std::size_t c = 0; c < 3; ++c)
      REQUIRE(fp.logits(perm[u], c) == Approx(f.logits(u, c)).margin(1e-12));
}

TEST_CASE("uniform logits give cross-entropy ln C") {
  Graph g = small_instance(8, 4, 2);
  auto adj_s = normalized_adjacency(g, true);
  GcnParams p;
  p.hidden = 4;
  p.w1 = Matrix(g.features.cols, 4, 0.0);
  p.w2 = Matrix(4, 4, 0.0);
  std::vector<double> w(g.n, 1.0);
  GcnGrads grads;
  double loss = loss_and_grads(p, adj_s, g.features, *g.clean_labels, w, 0.0, grads);
  REQUIRE(loss == Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
  for (std::uint64_t seed : {101ull, 102ull, 103ull}) {
    Graph g = small_instance(12, 3, seed);
    std::vector<double> w(g.n, 0.0);
    for (NodeId i = 0; i < g.n; i += 2) w[i] = 1.0;  // a nontrivial weighting
    double err = fd_relative_error(g, w, seed);
    INFO("seed " << seed << " max relative error " << err);
    REQUIRE(err <= 1e-4);
  }
}

TEST_CASE("doubling all node weights changes nothing") {
  Graph g = small_instance(10, 3, 8);
  auto adj_s = normalized_adjacency(g, true);
  GcnParams p = glorot_init(g.features.cols, 8, 3, 4);
  std::vector<double> w1(g.n, 1.0), w2(g.n, 2.0);
  GcnGrads ga, gb;
  double la = loss_and_grads(p, adj_s, g.features, *g.clean_labels, w1, 5e-4, ga);
  double lb = loss_and_grads(p, adj_s, g.features, *g.clean_labels, w2, 5e-4, gb);
  REQUIRE(la == Approx(lb).epsilon(1e-14));
  for (std::size_t e = 0; e < ga.w1.data.size(); ++e)
    REQUIRE(ga.w1.data[e] == Approx(gb.w1.data[e]).margin(1e-15));
}

TEST_CASE("all-zero node weights are rejected") {
  Graph g = small_instance(6, 2, 3);
  auto adj_s = normalized_adjacency(g, true);
  GcnParams p = glorot_init(g.features.cols, 4, 2, 1);
  GcnGrads grads;
  std::vector<double> w(g.n, 0.0);
  REQUIRE_THROWS_AS(loss_and_grads(p, adj_s, g.features, *g.clean_labels, w, 0.0, grads),
                    std::invalid_argument);
}

TEST_CASE("adam") {
  SECTION("zero gradients leave parameters unchanged but advance t") {
    GcnParams p = glorot_init(4, 3, 2, 5);
    GcnParams before = p;
    AdamState s;
    GcnGrads g;
    g.w1 = Matrix(4, 3, 0.0);
    g.w2 = Matrix(3, 2, 0.0);
    adam_step(s, p, g, 0.01);
    REQUIRE(s.t == 1);
    REQUIRE(p.w1.data == before.w1.data);
    REQUIRE(p.w2.data == before.w2.data);
  }
  SECTION("constant gradient drives the update magnitude to lr") {
    GcnParams p;
    p.hidden = 1;
    p.w1 = Matrix(1, 1, 0.0);
    p.w2 = Matrix(1, 1, 0.0);
    AdamState s;
    GcnGrads g;
    g.w1 = Matrix(1, 1, 0.7);
    g.w2 = Matrix(1, 1, -0.2);
    const double lr = 0.01;
    double prev1 = 0.0;
    double last_step1 = 0.0, last_step2 = 0.0;
    double prev2 = 0.0;
    for (int t = 0; t < 1000; ++t) {
      adam_step(s, p, g, lr);
      last_step1 = p.w1(0, 0) - prev1;
      last_step2 = p.w2(0, 0) - prev2;
      prev1 = p.w1(0, 0);
      prev2 = p.w2(0, 0);
    }
    REQUIRE(std::abs(last_step1) == Approx(lr).margin(1e-3));
    REQUIRE(std::abs(last_step2) == Approx(lr).margin(1e-3));
    REQUIRE(last_step1 < 0.0);  // descends against the positive gradient
    REQUIRE(last_step2 > 0.0);
  }
  SECTION("same gradient sequence, bitwise identical trajectory") {
    auto run = [] {
      GcnParams p = glorot_init(3, 2, 2, 11);
      AdamState s;
      std::mt19937_64 rng(13);
      std::normal_distribution<double> gauss(0, 1);
      for (int t = 0; t < 50; ++t) {
        GcnGrads g;
        g.w1 = Matrix(3, 2);
        g.w2 = Matrix(2, 2);
        for (double& v : g.w1.data) v = gauss(rng);
        for (double& v : g.w2.data) v = gauss(rng);
        adam_step(s, p, g, 0.01);
      }
      return p;
    };
    GcnParams a = run(), b = run();
    REQUIRE(a.w1.data == b.w1.data);
    REQUIRE(a.w2.data == b.w2.data);
  }
}

TEST_CASE("train_plain on a separable SBM reaches high accuracy") {
  SbmParams sp;
  sp.n = 120;
  sp.num_classes = 3;
  sp.p_in = 0.2;
  sp.p_out = 0.01;
  sp.feature_dim = 8;
  sp.feature_shift = 1.5;
  Graph g = generate_sbm(sp, 42);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 1;
  TrainResult r = train_plain(g, *g.clean_labels, g.train_mask, cfg);
  REQUIRE(r.history.size() == 200);
  REQUIRE(r.history.back().test_acc >= 0.95);
  REQUIRE(r.history.back().train_acc == 1.0);
}

TEST_CASE("train_plain rejects a zero epoch budget and an empty mask") {
  Graph g = small_instance(6, 2, 3);
  TrainConfig cfg;
  cfg.epochs = 0;
  REQUIRE_THROWS_AS(train_plain(g, *g.clean_labels, g.train_mask, cfg), std::invalid_argument);
  cfg.epochs = 1;
  std::vector<std::uint8_t> empty(g.n, 0);
  REQUIRE_THROWS_AS(train_plain(g, *g.clean_labels, empty, cfg), std::invalid_argument);
}

TEST_CASE("40% symmetric noise hurts plain training") {
  SbmParams sp;
  sp.n = 120;
  sp.num_classes = 3;
  sp.p_in = 0.15;
  sp.p_out = 0.02;
  sp.feature_dim = 8;
  sp.feature_shift = 1.0;
  int worse = 0;
  const int kSeeds = 10;
  for (int s = 0; s < kSeeds; ++s) {
    Graph g = generate_sbm(sp, 500 + s);
    TrainConfig cfg;
    cfg.epochs = 150;
    cfg.seed = s;
    TrainResult clean = train_plain(g, *g.clean_labels, g.train_mask, cfg);
    auto t = transition_matrix(NoiseKind::Symmetric, 0.4, 3);
    auto noisy = apply_class_noise(*g.clean_labels, t, g.train_mask, 900 + s);
    TrainResult dirty = train_plain(g, noisy, g.train_mask, cfg);
    if (dirty.history.back().test_acc < clean.history.back().test_acc) worse++;
  }
  REQUIRE(worse >= 9);  // paired comparison, allow one tie at this scale
}

TEST_CASE("loss is non-increasing on a separable toy with small lr and no decay") {
  Graph g = graph_from_edges(2, {});
  g.features = Matrix(2, 2);
  g.features(0, 0) = 1.0;
  g.features(1, 1) = 1.0;
  g.num_classes = 2;
  g.clean_labels = std::vector<int>{0, 1};
  g.train_mask = {1, 1};
  g.val_mask = {0, 0};
  g.test_mask = {0, 0};
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.lr = 1e-3;
  cfg.weight_decay = 0.0;
  cfg.seed = 2;
  TrainResult r = train_plain(g, *g.clean_labels, g.train_mask, cfg);
  for (std::size_t e = 1; e < r.history.size(); ++e)
    REQUIRE(r.history[e].loss <= r.history[e - 1].loss + 1e-12);
}

TEST_CASE("training is deterministic across runs and worker counts") {
  Graph g = small_instance(25, 3, 77);
  TrainConfig a;
  a.epochs = 30;
  a.seed = 5;
  a.threads = 1;
  TrainConfig b = a;
  b.threads = 4;
  TrainResult ra = train_plain(g, *g.clean_labels, g.train_mask, a);
  TrainResult rb = train_plain(g, *g.clean_labels, g.train_mask, b);
  REQUIRE(ra.params.w1.data == rb.params.w1.data);  // bitwise
  for (std::size_t e = 0; e < ra.history.size(); ++e)
    REQUIRE(ra.history[e].loss == rb.history[e].loss);
}

TEST_CASE("predict") {
  Graph g = small_instance(10, 4, 21);
  SECTION("probability rows sum to one") {
    GcnParams p = glorot_init(g.features.cols, 8, 4, 3);
    Prediction pred = predict(p, g);
    for (std::size_t i = 0; i < pred.probs.rows; ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < 4; ++c) s += pred.probs(i, c);
      REQUIRE(s == Approx(1.0).margin(1e-9));
    }
  }
  SECTION("zero parameters predict class 0 everywhere") {
    GcnParams p;
    p.hidden = 4;
    p.w1 = Matrix(g.features.cols, 4, 0.0);
    p.w2 = Matrix(4, 4, 0.0);
    Prediction pred = predict(p, g);
    for (int y : pred.labels) REQUIRE(y == 0);
  }
}

TEST_CASE("checkpoint round trip") {
  GcnParams p = glorot_init(7, 5, 3, 123);
  TrainConfig cfg;
  TempDir dir("ckpt");
  save_checkpoint(p, cfg, dir.file("model.bin"));
  GcnParams q = load_checkpoint(dir.file("model.bin"));
  REQUIRE(q.w1.data == p.w1.data);
  REQUIRE(q.w2.data == p.w2.data);
  REQUIRE(q.w1.rows == 7);
  REQUIRE(q.w2.cols == 3);
}
