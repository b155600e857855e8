#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"
#include "tss/graph.hpp"

using namespace tss;
using namespace tss::test;
using Catch::Approx;

TEST_CASE("load_graph smallest nonempty graph") {
  TempDir dir("load_min");
  write_file(dir.file("edges.txt"), "0 1\n");
  write_file(dir.file("features.txt"), "2 1\n0.5\n-0.5\n");
  write_file(dir.file("labels.txt"), "0\n1\n");
  write_file(dir.file("splits.txt"), "0\n2\n");
  BuildStats stats;
  Graph g = load_graph(dir.file("edges.txt"), dir.file("features.txt"), dir.file("labels.txt"),
                       dir.file("splits.txt"), &stats);
  REQUIRE(g.n == 2);
  REQUIRE(g.num_undirected_edges() == 1);
  REQUIRE(g.num_classes == 2);
  REQUIRE(g.train_mask[0] == 1);
  REQUIRE(g.test_mask[1] == 1);
  REQUIRE(stats.self_loops_dropped == 0);
}

TEST_CASE("load_graph drops self-loops and merges duplicates") {
  TempDir dir("load_selfloop");
  write_file(dir.file("edges.txt"), "0 0\n0 1\n1 0\n0 1\n");
  write_file(dir.file("features.txt"), "2 1\n0\n1\n");
  write_file(dir.file("labels.txt"), "0\n0\n");
  write_file(dir.file("splits.txt"), "3\n3\n");
  BuildStats stats;
  Graph g = load_graph(dir.file("edges.txt"), dir.file("features.txt"), dir.file("labels.txt"),
                       dir.file("splits.txt"), &stats);
  REQUIRE(g.num_undirected_edges() == 1);
  REQUIRE(stats.self_loops_dropped == 1);
  REQUIRE(stats.duplicates_merged == 2);
}

TEST_CASE("load_graph reports malformed lines with their number") {
  TempDir dir("load_bad");
  write_file(dir.file("edges.txt"), "0 1\nbroken\n");
  write_file(dir.file("features.txt"), "2 1\n0\n1\n");
  write_file(dir.file("labels.txt"), "0\n0\n");
  write_file(dir.file("splits.txt"), "3\n3\n");
  try {
    load_graph(dir.file("edges.txt"), dir.file("features.txt"), dir.file("labels.txt"),
               dir.file("splits.txt"));
    FAIL("expected parse error");
  } catch (const std::runtime_error& e) {
    REQUIRE(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("validate_graph rejects out-of-range labels and overlapping masks") {
  Graph g = path_graph(3);
  g.num_classes = 2;
  g.noisy_labels = std::vector<int>{0, 1, 2};  // 2 >= C
  REQUIRE_THROWS_AS(validate_graph(g), std::invalid_argument);
  g.noisy_labels = std::vector<int>{0, 1, 1};
  validate_graph(g);
  g.train_mask[1] = 1;
  g.val_mask[1] = 1;
  REQUIRE_THROWS_AS(validate_graph(g), std::invalid_argument);
}

TEST_CASE("graph save/load round trip") {
  SbmParams p;
  p.n = 30;
  p.num_classes = 3;
  p.p_in = 0.4;
  p.p_out = 0.05;
  p.feature_dim = 4;
  Graph g = generate_sbm(p, 99);
  TempDir dir("roundtrip");
  save_graph(g, dir.file("e.txt"), dir.file("x.txt"), dir.file("y.txt"), dir.file("s.txt"));
  Graph h = load_graph(dir.file("e.txt"), dir.file("x.txt"), dir.file("y.txt"), dir.file("s.txt"));
  REQUIRE(h.n == g.n);
  REQUIRE(h.adj.targets == g.adj.targets);
  REQUIRE(h.adj.offsets == g.adj.offsets);
  REQUIRE(*h.clean_labels == *g.clean_labels);
  REQUIRE(h.train_mask == g.train_mask);
  REQUIRE(h.features.data == g.features.data);
}

TEST_CASE("normalized adjacency on P2") {
  Graph g = path_graph(2);
  SECTION("without self-loops: unit degrees give the plain adjacency") {
    auto na = normalized_adjacency(g, false);
    REQUIRE(na.matrix.nnz() == 2);
    REQUIRE(na.matrix.values[0] == Approx(1.0));
    REQUIRE(na.matrix.targets[0] == 1);
  }
  SECTION("with self-loops: every entry 0.5") {
    auto na = normalized_adjacency(g, true);
    REQUIRE(na.matrix.nnz() == 4);
    for (double v : na.matrix.values) REQUIRE(v == Approx(0.5));
  }
}

TEST_CASE("normalized adjacency handles isolated nodes") {
  Graph g = graph_from_edges(3, {{0, 1}});  // node 2 isolated
  auto na0 = normalized_adjacency(g, false);
  REQUIRE(na0.matrix.degree(2) == 0);
  auto na1 = normalized_adjacency(g, true);
  REQUIRE(na1.matrix.degree(2) == 1);
  REQUIRE(na1.matrix.targets[na1.matrix.row_begin(2)] == 2);
  REQUIRE(na1.matrix.values[na1.matrix.row_begin(2)] == Approx(1.0));
}

TEST_CASE("normalized adjacency rows sum to 1 on regular graphs") {
  for (NodeId n : {4, 7, 12}) {
    Graph g = cycle_graph(n);
    auto na = normalized_adjacency(g, false);
    for (NodeId u = 0; u < n; ++u) {
      double s = 0.0;
      for (std::int64_t e = na.matrix.row_begin(u); e < na.matrix.row_end(u); ++e)
        s += na.matrix.values[e];
      REQUIRE(s == Approx(1.0).margin(1e-12));
    }
  }
}

TEST_CASE("normalized adjacency keeps spectral radius at most 1") {
  // power iteration on |A_hat|; executable form of the invariant
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    Graph g = random_connected_graph(40, 0.1, seed);
    auto na = normalized_adjacency(g, false);
    std::vector<double> x(g.n, 1.0), y(g.n);
    double norm = 0.0;
    for (int it = 0; it < 200; ++it) {
      na.multiply(x.data(), y.data());
      norm = 0.0;
      for (double v : y) norm = std::max(norm, std::abs(v));
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = y[i] / norm;
    }
    REQUIRE(norm <= 1.0 + 1e-9);
  }
}

TEST_CASE("generate_sbm basics") {
  SbmParams p;
  p.n = 60;
  p.num_classes = 3;
  p.feature_dim = 4;

  SECTION("p_out=0 forces homophily 1") {
    p.p_in = 0.3;
    p.p_out = 0.0;
    Graph g = generate_sbm(p, 7);
    REQUIRE(edge_homophily(g, *g.clean_labels) == 1.0);
  }
  SECTION("same seed, same edges; different seed, different edges") {
    p.p_in = 0.3;
    p.p_out = 0.05;
    Graph a = generate_sbm(p, 11);
    Graph b = generate_sbm(p, 11);
    Graph c = generate_sbm(p, 12);
    REQUIRE(a.adj.targets == b.adj.targets);
    REQUIRE(a.features.data == b.features.data);
    REQUIRE(a.adj.targets != c.adj.targets);
  }
  SECTION("invalid probabilities rejected") {
    p.p_in = 0.1;
    p.p_out = 0.5;
    REQUIRE_THROWS_AS(generate_sbm(p, 1), std::invalid_argument);
  }
  SECTION("masks are stratified and disjoint") {
    p.p_in = 0.3;
    p.p_out = 0.05;
    Graph g = generate_sbm(p, 5);
    REQUIRE(g.train_nodes().size() == 36);  // 60 * 0.6
    REQUIRE(g.val_nodes().size() == 12);
    REQUIRE(g.test_nodes().size() == 12);
  }
}

TEST_CASE("generate_sbm with p_in == p_out is label-blind") {
  SbmParams p;
  p.n = 120;
  p.num_classes = 4;
  p.p_in = 0.1;
  p.p_out = 0.1;
  p.feature_dim = 2;
  double total = 0.0;
  const int kSeeds = 20;
  for (int s = 0; s < kSeeds; ++s) total += edge_homophily(generate_sbm(p, 1000 + s), *generate_sbm(p, 1000 + s).clean_labels);
  REQUIRE(total / kSeeds == Approx(0.25).margin(0.03));
}

TEST_CASE("edge_homophily closed forms") {
  Graph p2 = path_graph(2);
  REQUIRE(edge_homophily(p2, {0, 0}) == 1.0);
  REQUIRE(edge_homophily(p2, {0, 1}) == 0.0);

  SbmParams p;
  p.n = 300;
  p.num_classes = 3;
  p.p_in = 0.1;
  p.p_out = 0.01;
  p.feature_dim = 2;
  Graph g = generate_sbm(p, 77);
  // balanced-SBM expectation p_in / (p_in + (C-1) p_out), up to block-size effects
  double expected = 0.1 / (0.1 + 2 * 0.01);
  REQUIRE(edge_homophily(g, *g.clean_labels) == Approx(expected).margin(0.05));
}

TEST_CASE("inject_heterophilous_edges") {
  SbmParams p;
  p.n = 90;
  p.num_classes = 3;
  p.p_in = 0.3;
  p.p_out = 0.02;
  p.feature_dim = 2;
  Graph g = generate_sbm(p, 21);

  SECTION("count=0 leaves the graph unchanged") {
    Graph h = inject_heterophilous_edges(g, 0, 5);
    REQUIRE(h.adj.targets == g.adj.targets);
  }
  SECTION("homophily strictly decreases and no same-label or duplicate edge appears") {
    double before = edge_homophily(g, *g.clean_labels);
    Graph h = inject_heterophilous_edges(g, 100, 5);
    REQUIRE(h.num_undirected_edges() == g.num_undirected_edges() + 100);
    REQUIRE(edge_homophily(h, *h.clean_labels) < before);
    const auto& labels = *h.clean_labels;
    std::int64_t same_label_new = 0;
    for (NodeId u = 0; u < h.n; ++u)
      for (std::int64_t e = h.adj.row_begin(u); e < h.adj.row_end(u); ++e) {
        NodeId v = h.adj.targets[e];
        if (u < v && !g.adj.has_edge(u, v))
          if (labels[u] == labels[v]) same_label_new++;
      }
    REQUIRE(same_label_new == 0);
  }
  SECTION("all-same-label graph has no cross pair") {
    Graph mono = path_graph(4);
    mono.clean_labels = std::vector<int>{0, 0, 0, 0};
    mono.num_classes = 1;
    REQUIRE_THROWS_AS(inject_heterophilous_edges(mono, 1, 1), std::invalid_argument);
  }
  SECTION("saturation error") {
    Graph k2 = complete_graph(2);
    k2.clean_labels = std::vector<int>{0, 1};
    k2.num_classes = 2;
    REQUIRE_THROWS_AS(inject_heterophilous_edges(k2, 1, 1), std::invalid_argument);
  }
  SECTION("near-saturation uses enumeration and still works") {
    Graph p2 = graph_from_edges(4, {{0, 1}});
    p2.clean_labels = std::vector<int>{0, 0, 1, 1};
    p2.num_classes = 2;
    // cross pairs: (0,2),(0,3),(1,2),(1,3) all absent -> 4 available
    Graph h = inject_heterophilous_edges(p2, 3, 9);
    REQUIRE(h.num_undirected_edges() == 4);
  }
}

TEST_CASE("classify_boundary") {
  SECTION("single class: everything far") {
    Graph g = random_connected_graph(20, 0.1, 3);
    auto tags = classify_boundary(g, std::vector<int>(20, 0));
    for (auto t : tags) REQUIRE(t == BoundaryTag::Far);
  }
  SECTION("P3 with labels 0,0,1: the cross edge is visible to all three within two hops") {
    Graph g = path_graph(3);
    auto tags = classify_boundary(g, {0, 0, 1});
    REQUIRE(tags[0] == BoundaryTag::Near);  // node 2 is exactly two hops away
    REQUIRE(tags[1] == BoundaryTag::Near);
    REQUIRE(tags[2] == BoundaryTag::Near);
  }
  SECTION("P4 with labels 0,0,0,1: the far end is insulated") {
    Graph g = path_graph(4);
    auto tags = classify_boundary(g, {0, 0, 0, 1});
    REQUIRE(tags[0] == BoundaryTag::Far);
    REQUIRE(tags[1] == BoundaryTag::Near);
    REQUIRE(tags[2] == BoundaryTag::Near);
    REQUIRE(tags[3] == BoundaryTag::Near);
  }
  SECTION("isolated nodes are far") {
    Graph g = graph_from_edges(3, {{0, 1}});
    auto tags = classify_boundary(g, {0, 1, 0});
    REQUIRE(tags[2] == BoundaryTag::Far);
  }
  SECTION("invariant under bijective relabeling") {
    Graph g = random_connected_graph(40, 0.08, 9);
    auto labels = random_labels(40, 3, 17);
    auto relabeled = labels;
    for (auto& y : relabeled) y = (y + 1) % 3;  // a bijection on {0,1,2}
    REQUIRE(classify_boundary(g, labels) == classify_boundary(g, relabeled));
  }
}

TEST_CASE("stored adjacency is always symmetric") {
  // build_adjacency symmetrizes one-sided input; validate_graph would throw otherwise
  Graph g = graph_from_edges(5, {{0, 1}, {1, 2}, {3, 4}, {4, 0}});
  for (NodeId u = 0; u < g.n; ++u)
    for (std::int64_t e = g.adj.row_begin(u); e < g.adj.row_end(u); ++e)
      REQUIRE(g.adj.has_edge(g.adj.targets[e], u));
}
