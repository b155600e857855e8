// tss: command-line driver for graph generation, label corruption, CBC
// scoring, training (plain cross-entropy or the curriculum method) and
// hyperparameter sweeps. Every command writes a manifest before any result
// file; identical manifests reproduce byte-identical outputs.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tss/centrality.hpp"
#include "tss/curriculum.hpp"
#include "tss/gcn.hpp"
#include "tss/graph.hpp"
#include "tss/noise.hpp"
#include "tss/ppr.hpp"
#include "tss/random.hpp"
#include "tss/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Input/usage problems exit with code 2; anything else is internal (1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string hash_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char out[20];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

struct GraphDir {
  std::string edges, features, labels, splits;
  explicit GraphDir(const std::string& dir)
      : edges(dir + "/edges.txt"),
        features(dir + "/features.txt"),
        labels(dir + "/labels.txt"),
        splits(dir + "/splits.txt") {}
};

tss::Graph load_graph_dir(const std::string& dir, tss::BuildStats* stats = nullptr) {
  GraphDir p(dir);
  for (const auto& f : {p.edges, p.features, p.labels, p.splits})
    if (!fs::exists(f)) throw UsageError("missing graph file: " + f);
  try {
    return tss::load_graph(p.edges, p.features, p.labels, p.splits, stats);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

json graph_hashes(const std::string& dir) {
  GraphDir p(dir);
  return json{{"edges", hash_file_hex(p.edges)},
              {"features", hash_file_hex(p.features)},
              {"labels", hash_file_hex(p.labels)},
              {"splits", hash_file_hex(p.splits)}};
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

/// The manifest is written before any result so that a result file without a
/// matching manifest cannot occur.
void write_manifest(const json& config, const json& input_hashes, const std::string& path) {
  json m;
  m["tool"] = "tss";
  m["version"] = tss::kVersion;
  m["config"] = config;
  m["inputs"] = input_hashes;
  write_json(m, path);
}

std::uint64_t graph_structure_hash(const tss::Graph& g) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  mix(&g.n, sizeof(g.n));
  mix(g.adj.offsets.data(), g.adj.offsets.size() * sizeof(g.adj.offsets[0]));
  mix(g.adj.targets.data(), g.adj.targets.size() * sizeof(g.adj.targets[0]));
  return h;
}

/// PPR with an optional on-disk cache (TSS_CACHE_DIR).
tss::PprMatrix ppr_with_cache(const tss::Graph& g, const tss::PprOptions& opts) {
  const char* cache_dir = std::getenv("TSS_CACHE_DIR");
  std::string cache_path;
  if (cache_dir && *cache_dir) {
    char name[128];
    std::snprintf(name, sizeof(name), "ppr_%016llx_a%.6f_t%.3g.bin",
                  static_cast<unsigned long long>(graph_structure_hash(g)), opts.alpha, opts.tol);
    cache_path = std::string(cache_dir) + "/" + name;
    if (fs::exists(cache_path)) {
      tss::PprMatrix pm = tss::load_ppr(cache_path);
      if (pm.n == static_cast<std::size_t>(g.n) && pm.alpha == opts.alpha) return pm;
    }
  }
  tss::PprMatrix pm = tss::ppr_matrix(tss::normalized_adjacency(g, false), opts);
  if (!cache_path.empty()) {
    fs::create_directories(cache_dir);
    tss::save_ppr(pm, opts.tol, cache_path);
  }
  return pm;
}

std::vector<int> load_label_file_checked(const std::string& path, const tss::Graph& g) {
  if (!fs::exists(path)) throw UsageError("missing labels file: " + path);
  std::vector<int> labels;
  try {
    labels = tss::load_labels(path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (labels.size() != static_cast<std::size_t>(g.n))
    throw UsageError(path + ": label count does not match graph");
  for (int y : labels)
    if (y < 0 || y >= g.num_classes) throw UsageError(path + ": label out of range");
  return labels;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
  std::string out;
  tss::SbmParams sbm;
  std::uint64_t seed = 0;
};

int cmd_gen(const GenArgs& a) {
  fs::create_directories(a.out);
  json cfg{{"command", "gen"},
           {"n", a.sbm.n},
           {"classes", a.sbm.num_classes},
           {"p_in", a.sbm.p_in},
           {"p_out", a.sbm.p_out},
           {"feature_dim", a.sbm.feature_dim},
           {"feature_shift", a.sbm.feature_shift},
           {"train_frac", a.sbm.train_frac},
           {"val_frac", a.sbm.val_frac},
           {"seed", a.seed}};
  write_manifest(cfg, json::object(), a.out + "/manifest.json");

  tss::Graph g;
  try {
    g = tss::generate_sbm(a.sbm, a.seed);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  GraphDir p(a.out);
  tss::save_graph(g, p.edges, p.features, p.labels, p.splits);

  json summary{{"n", g.n},
               {"classes", g.num_classes},
               {"undirected_edges", g.num_undirected_edges()},
               {"edge_homophily", tss::edge_homophily(g, *g.clean_labels)},
               {"train_nodes", g.train_nodes().size()},
               {"val_nodes", g.val_nodes().size()},
               {"test_nodes", g.test_nodes().size()}};
  write_json(summary, a.out + "/summary.json");
  std::cout << "gen: n=" << g.n << " edges=" << g.num_undirected_edges()
            << " homophily=" << fmt(summary["edge_homophily"].get<double>()) << " -> " << a.out
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// corrupt
// ---------------------------------------------------------------------------

struct CorruptArgs {
  std::string graph_dir, out;
  std::string kind = "symmetric";
  double rate = 0.0;
  double q_std = 0.1;
  std::string scope = "train";
  std::uint64_t seed = 0;
};

std::vector<int> corrupt_labels(const tss::Graph& g, tss::NoiseKind kind, double rate,
                                double q_std, const std::vector<std::uint8_t>& scope,
                                std::uint64_t seed) {
  if (kind == tss::NoiseKind::Instance) {
    tss::InstanceNoiseOptions o;
    o.rate = rate;
    o.q_std = q_std;
    o.seed = seed;
    return tss::instance_noise(g.features, *g.clean_labels, g.num_classes, scope, o);
  }
  auto t = tss::transition_matrix(kind, rate, g.num_classes);
  return tss::apply_class_noise(*g.clean_labels, t, scope, seed);
}

int cmd_corrupt(const CorruptArgs& a) {
  tss::NoiseKind kind;
  try {
    kind = tss::parse_noise_kind(a.kind);
    tss::NoiseSpec spec{kind, a.rate, a.seed};
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  tss::Graph g = load_graph_dir(a.graph_dir);
  fs::create_directories(a.out);
  json cfg{{"command", "corrupt"}, {"graph", a.graph_dir}, {"noise_kind", a.kind},
           {"noise_rate", a.rate},  {"q_std", a.q_std},    {"scope", a.scope},
           {"seed", a.seed}};
  write_manifest(cfg, graph_hashes(a.graph_dir), a.out + "/manifest.json");

  std::vector<std::uint8_t> scope;
  if (a.scope == "train")
    scope = g.train_mask;
  else if (a.scope == "all")
    scope.assign(g.n, 1);
  else
    throw UsageError("unknown scope: " + a.scope);

  std::vector<int> noisy = corrupt_labels(g, kind, a.rate, a.q_std, scope, a.seed);
  tss::save_label_file(noisy, a.out + "/labels_noisy.txt");

  auto audit = tss::noise_audit(*g.clean_labels, noisy, g.num_classes);
  json jaudit{{"flip_rate", audit.flip_rate},
              {"per_class_flip", audit.per_class_flip},
              {"class_counts", audit.class_counts}};
  std::vector<std::vector<double>> conf(g.num_classes, std::vector<double>(g.num_classes));
  for (int r = 0; r < g.num_classes; ++r)
    for (int c = 0; c < g.num_classes; ++c) conf[r][c] = audit.confusion(r, c);
  jaudit["confusion"] = conf;
  if (kind != tss::NoiseKind::Instance) {
    auto t = tss::transition_matrix(kind, a.rate, g.num_classes);
    std::vector<std::vector<double>> design(g.num_classes, std::vector<double>(g.num_classes));
    for (int r = 0; r < g.num_classes; ++r)
      for (int c = 0; c < g.num_classes; ++c) design[r][c] = t(r, c);
    jaudit["design"] = design;
  }
  write_json(jaudit, a.out + "/audit.json");
  std::cout << "corrupt: kind=" << a.kind << " rate=" << fmt(a.rate)
            << " achieved_flip=" << fmt(audit.flip_rate) << " -> " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// cbc
// ---------------------------------------------------------------------------

struct CbcArgs {
  std::string graph_dir, labels, out;
  double alpha = 0.15;
  double eps = 1e-12;
  std::int64_t pair_budget = 2'000'000;
  double tol = 1e-9;
  std::uint64_t seed = 0;
  bool assert_separation = false;
};

int cmd_cbc(const CbcArgs& a) {
  tss::Graph g = load_graph_dir(a.graph_dir);
  std::vector<int> noisy = a.labels.empty() ? *g.clean_labels : load_label_file_checked(a.labels, g);

  json cfg{{"command", "cbc"}, {"graph", a.graph_dir}, {"labels", a.labels},
           {"alpha", a.alpha}, {"eps", a.eps},         {"pair_budget", a.pair_budget},
           {"tol", a.tol},     {"seed", a.seed}};
  json inputs = graph_hashes(a.graph_dir);
  if (!a.labels.empty()) inputs["noisy_labels"] = hash_file_hex(a.labels);
  write_manifest(cfg, inputs, a.out + ".manifest.json");

  tss::PprOptions popts;
  popts.alpha = a.alpha;
  popts.tol = a.tol;
  tss::PprMatrix pi = ppr_with_cache(g, popts);

  tss::CbcOptions copts;
  copts.epsilon = a.eps;
  copts.pair_budget = a.pair_budget;
  copts.seed = a.seed;
  std::vector<tss::NodeId> train = g.train_nodes();
  if (train.empty()) throw UsageError("graph has no training nodes");
  tss::CbcScores cbc = tss::cbc_scores(pi, noisy, train, copts);
  if (cbc.all_same_class)
    std::cerr << "warning: all training labels identical; CBC is all zeros\n";

  auto tags = tss::classify_boundary(g, *g.clean_labels);
  std::vector<double> bc;
  if (g.n <= 500) bc = tss::betweenness_centrality(g);

  {
    std::ofstream out(a.out);
    if (!out) throw std::runtime_error("cannot write " + a.out);
    out << "node_id,cbc,bc,boundary_tag,noisy_label,clean_label\n";
    for (tss::NodeId i = 0; i < g.n; ++i) {
      out << i << "," << fmt(cbc.scores[i]) << ",";
      if (!bc.empty()) out << fmt(bc[i]);
      out << "," << (tags[i] == tss::BoundaryTag::Near ? "near" : "far") << "," << noisy[i] << ","
          << (*g.clean_labels)[i] << "\n";
    }
  }

  double near_sum = 0, far_sum = 0;
  std::int64_t near_n = 0, far_n = 0;
  for (tss::NodeId i : train) {
    if (tags[i] == tss::BoundaryTag::Near) {
      near_sum += cbc.scores[i];
      near_n++;
    } else {
      far_sum += cbc.scores[i];
      far_n++;
    }
  }
  double near_mean = near_n ? near_sum / near_n : std::nan("");
  double far_mean = far_n ? far_sum / far_n : std::nan("");
  bool separated = near_n > 0 && far_n > 0 && near_mean > far_mean;
  json summary{{"pair_count", cbc.pair_count},
               {"skipped_pairs", cbc.skipped_pairs},
               {"near_train_nodes", near_n},
               {"far_train_nodes", far_n},
               {"near_mean_cbc", near_mean},
               {"far_mean_cbc", far_mean},
               {"separated", separated}};
  write_json(summary, a.out + ".summary.json");
  std::cout << "boundary_separation near_mean=" << fmt(near_mean) << " far_mean=" << fmt(far_mean)
            << " separated=" << (separated ? "true" : "false") << "\n";
  if (a.assert_separation && !separated) return 1;
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string graph_dir, out, method = "plain";
  std::string labels;      // fixed noisy labels, or
  std::string noise_kind;  // per-seed corruption
  double noise_rate = 0.0;
  double q_std = 0.1;
  int seeds = 1;
  std::uint64_t seed = 0;
  double alpha = 0.15;
  double lambda0 = 0.5;
  std::string pacing = "linear";
  int epochs = 500;
  int pretrain_epochs = 400;
  int patience = 100;
  double lr = 0.01;
  double weight_decay = 5e-4;
  int hidden = 16;
  double noisy_val_frac = 0.10;
  double eps = 1e-12;
  std::int64_t pair_budget = 2'000'000;
  double tol = 1e-9;
  int refresh_every = 0;
  bool dump_trace = false;
  bool dump_confident = false;
};

json run_one_seed(const tss::Graph& g, const TrainArgs& a, std::uint64_t seed_s,
                  const tss::PprMatrix* pi, std::ofstream* trace_out) {
  std::vector<int> noisy;
  if (!a.labels.empty()) {
    noisy = load_label_file_checked(a.labels, g);
  } else if (!a.noise_kind.empty()) {
    auto kind = tss::parse_noise_kind(a.noise_kind);
    noisy = corrupt_labels(g, kind, a.noise_rate, a.q_std, g.train_mask,
                           tss::derive_seed(seed_s, "noise"));
  } else {
    noisy = *g.clean_labels;
  }

  json r;
  r["seed"] = seed_s;
  if (a.method == "plain") {
    auto split = tss::carve_noisy_val(g.train_nodes(), a.noisy_val_frac, seed_s);
    std::vector<std::uint8_t> mask(g.n, 0);
    for (tss::NodeId i : split.core) mask[i] = 1;
    tss::TrainConfig cfg;
    cfg.lr = a.lr;
    cfg.weight_decay = a.weight_decay;
    cfg.hidden = a.hidden;
    cfg.epochs = a.epochs;
    cfg.seed = tss::derive_seed(seed_s, "retrain");
    cfg.patience = a.patience;
    cfg.val_ids = split.val;
    tss::TrainResult res = tss::train_plain(g, noisy, mask, cfg);
    const auto& sel = res.history[res.best_epoch - 1];
    r["best_epoch"] = res.best_epoch;
    r["val_acc"] = sel.val_acc;
    r["test_acc"] = sel.test_acc;
    r["epochs_run"] = res.history.size();
  } else {
    tss::TssConfig cfg;
    cfg.alpha = a.alpha;
    cfg.lambda0 = a.lambda0;
    cfg.curriculum_epochs = a.epochs;
    cfg.pacing = tss::parse_pacing(a.pacing);
    cfg.pretrain_epochs = a.pretrain_epochs;
    cfg.noisy_val_fraction = a.noisy_val_frac;
    cfg.train.lr = a.lr;
    cfg.train.weight_decay = a.weight_decay;
    cfg.train.hidden = a.hidden;
    cfg.train.patience = a.patience;
    cfg.ppr.alpha = a.alpha;
    cfg.ppr.tol = a.tol;
    cfg.cbc.epsilon = a.eps;
    cfg.cbc.pair_budget = a.pair_budget;
    cfg.refresh_every = a.refresh_every;
    cfg.seed = seed_s;
    tss::TssResult res = tss::run_tss(g, noisy, cfg, pi);
    r["best_epoch"] = res.trace.best_epoch;
    r["val_acc"] = res.trace.best_val_acc;
    r["test_acc"] = res.trace.final_test_acc;
    r["epochs_run"] = res.trace.epochs.size();
    std::int64_t skipped = 0;
    for (const auto& e : res.trace.epochs)
      if (e.skipped) skipped++;
    r["skipped_epochs"] = skipped;
    if (trace_out) {
      const auto& core = res.trace.train_core;
      std::vector<std::int64_t> pos(g.n, -1);
      for (std::size_t k = 0; k < core.size(); ++k) pos[core[k]] = static_cast<std::int64_t>(k);
      for (const auto& e : res.trace.epochs) {
        json row{{"seed", seed_s},
                 {"t", e.t},
                 {"lambda", e.lambda},
                 {"pool_size", e.pool_size},
                 {"confident_size", e.confident_size},
                 {"loss", e.loss},
                 {"val_acc", e.val_acc},
                 {"test_acc", e.test_acc},
                 {"skipped", e.skipped}};
        if (a.dump_confident) {
          // bitset over train_core (ascending node id), packed LSB-first
          std::vector<std::uint8_t> bits((core.size() + 7) / 8, 0);
          for (tss::NodeId i : e.confident) bits[pos[i] / 8] |= 1u << (pos[i] % 8);
          static const char* hexd = "0123456789abcdef";
          std::string hex;
          for (std::uint8_t b : bits) {
            hex.push_back(hexd[b >> 4]);
            hex.push_back(hexd[b & 15]);
          }
          row["confident_bitset"] = hex;
        }
        *trace_out << row.dump() << "\n";
      }
    }
  }
  return r;
}

int cmd_train(const TrainArgs& a) {
  if (a.method != "plain" && a.method != "tss") throw UsageError("method must be plain or tss");
  if (!a.labels.empty() && !a.noise_kind.empty())
    throw UsageError("--labels and --noise-kind are mutually exclusive");
  if (!a.noise_kind.empty()) {
    try {
      tss::NoiseSpec spec{tss::parse_noise_kind(a.noise_kind), a.noise_rate, 0};
      spec.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  tss::Graph g = load_graph_dir(a.graph_dir);
  if (!a.labels.empty()) load_label_file_checked(a.labels, g);  // fail before the manifest
  fs::create_directories(a.out);

  json cfg{{"command", "train"},
           {"graph", a.graph_dir},
           {"method", a.method},
           {"labels", a.labels},
           {"noise_kind", a.noise_kind},
           {"noise_rate", a.noise_rate},
           {"q_std", a.q_std},
           {"seeds", a.seeds},
           {"seed", a.seed},
           {"alpha", a.alpha},
           {"lambda0", a.lambda0},
           {"pacing", a.pacing},
           {"epochs", a.epochs},
           {"pretrain_epochs", a.pretrain_epochs},
           {"patience", a.patience},
           {"lr", a.lr},
           {"weight_decay", a.weight_decay},
           {"hidden", a.hidden},
           {"noisy_val_frac", a.noisy_val_frac},
           {"eps", a.eps},
           {"pair_budget", a.pair_budget},
           {"tol", a.tol},
           {"refresh_every", a.refresh_every}};
  json inputs = graph_hashes(a.graph_dir);
  if (!a.labels.empty()) inputs["noisy_labels"] = hash_file_hex(a.labels);
  write_manifest(cfg, inputs, a.out + "/manifest.json");

  // PPR depends only on the graph and alpha; solve once across seeds
  std::optional<tss::PprMatrix> pi;
  if (a.method == "tss") {
    tss::PprOptions popts;
    popts.alpha = a.alpha;
    popts.tol = a.tol;
    pi = ppr_with_cache(g, popts);
  }

  std::ofstream trace_out;
  bool tracing = a.dump_trace && a.method == "tss";
  if (tracing) {
    trace_out.open(a.out + "/trace.jsonl");
    if (!trace_out) throw std::runtime_error("cannot write trace file");
  }

  json per_seed = json::array();
  std::vector<double> accs;
  for (int s = 0; s < a.seeds; ++s) {
    std::uint64_t seed_s = tss::derive_seed(a.seed, "seed", static_cast<std::uint64_t>(s));
    json r = run_one_seed(g, a, seed_s, pi ? &*pi : nullptr, tracing ? &trace_out : nullptr);
    r["seed_index"] = s;
    accs.push_back(r["test_acc"].get<double>());
    per_seed.push_back(r);
    std::cout << a.method << " seed " << s << ": test_acc=" << fmt(accs.back()) << "\n";
  }

  json metrics{{"method", a.method},
               {"per_seed", per_seed},
               {"test_acc_mean", tss::mean(accs)},
               {"test_acc_std", tss::sample_std(accs)}};
  write_json(metrics, a.out + "/metrics.json");
  {
    std::ofstream csv(a.out + "/metrics.csv");
    csv << "seed_index,seed,test_acc,val_acc,best_epoch\n";
    for (const auto& r : per_seed)
      csv << r["seed_index"].get<int>() << "," << r["seed"].get<std::uint64_t>() << ","
          << fmt(r["test_acc"].get<double>()) << "," << fmt(r["val_acc"].get<double>()) << ","
          << r["best_epoch"].get<int>() << "\n";
  }
  std::cout << a.method << ": mean test_acc=" << fmt(tss::mean(accs)) << " +- "
            << fmt(tss::sample_std(accs)) << " over " << a.seeds << " seeds\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepArgs {
  TrainArgs base;
  std::vector<double> lambda0_grid;
  std::vector<std::string> pacing_grid;
};

int cmd_sweep(const SweepArgs& a) {
  std::vector<double> l0s =
      a.lambda0_grid.empty() ? std::vector<double>{a.base.lambda0} : a.lambda0_grid;
  std::vector<std::string> pacings =
      a.pacing_grid.empty() ? std::vector<std::string>{a.base.pacing} : a.pacing_grid;
  for (const auto& p : pacings) {
    try {
      tss::parse_pacing(p);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }

  fs::create_directories(a.base.out);
  json cfg{{"command", "sweep"},
           {"graph", a.base.graph_dir},
           {"lambda0_grid", l0s},
           {"pacing_grid", pacings},
           {"seeds", a.base.seeds},
           {"seed", a.base.seed},
           {"noise_kind", a.base.noise_kind},
           {"noise_rate", a.base.noise_rate},
           {"epochs", a.base.epochs},
           {"pretrain_epochs", a.base.pretrain_epochs}};
  write_manifest(cfg, graph_hashes(a.base.graph_dir), a.base.out + "/manifest.json");

  struct Cell {
    double lambda0;
    std::string pacing;
    std::string dir;
  };
  std::vector<Cell> cells;
  for (double l0 : l0s)
    for (const auto& p : pacings) {
      char name[64];
      std::snprintf(name, sizeof(name), "cell_l%.3g_%s", l0, p.c_str());
      cells.push_back({l0, p, a.base.out + "/" + name});
    }

  for (const auto& cell : cells) {
    if (fs::exists(cell.dir + "/metrics.json")) {
      std::cout << "sweep: skip completed cell " << cell.dir << "\n";
      continue;
    }
    TrainArgs cell_args = a.base;
    cell_args.method = "tss";
    cell_args.lambda0 = cell.lambda0;
    cell_args.pacing = cell.pacing;
    cell_args.out = cell.dir;
    cmd_train(cell_args);
  }

  std::ofstream csv(a.base.out + "/sweep.csv");
  csv << "lambda0,pacing,test_acc_mean,test_acc_std\n";
  for (const auto& cell : cells) {
    std::ifstream in(cell.dir + "/metrics.json");
    json m = json::parse(in);
    csv << fmt(cell.lambda0) << "," << cell.pacing << "," << fmt(m["test_acc_mean"].get<double>())
        << "," << fmt(m["test_acc_std"].get<double>()) << "\n";
  }
  std::cout << "sweep: " << cells.size() << " cells -> " << a.base.out << "/sweep.csv\n";
  return 0;
}

void add_train_options(CLI::App* app, TrainArgs& t, bool with_method) {
  app->add_option("--graph", t.graph_dir, "graph directory")->required();
  app->add_option("--out", t.out, "output directory")->required();
  if (with_method) app->add_option("--method", t.method, "plain or tss");
  app->add_option("--labels", t.labels, "noisy label file (fixed across seeds)");
  app->add_option("--noise-kind", t.noise_kind, "symmetric|pairflip|instance (per-seed noise)");
  app->add_option("--noise-rate", t.noise_rate, "noise rate");
  app->add_option("--q-std", t.q_std, "instance-noise flip-probability std");
  app->add_option("--seeds", t.seeds, "number of seeds");
  app->add_option("--seed", t.seed, "root seed");
  app->add_option("--alpha", t.alpha, "PPR teleport");
  app->add_option("--lambda0", t.lambda0, "initial pace");
  app->add_option("--pacing", t.pacing, "linear|root|geometric");
  app->add_option("--epochs", t.epochs, "curriculum/retraining epochs (T)");
  app->add_option("--pretrain-epochs", t.pretrain_epochs, "pretraining epochs");
  app->add_option("--patience", t.patience, "early-stop patience (0 disables)");
  app->add_option("--lr", t.lr, "learning rate");
  app->add_option("--weight-decay", t.weight_decay, "weight decay");
  app->add_option("--hidden", t.hidden, "hidden width");
  app->add_option("--noisy-val-frac", t.noisy_val_frac, "noisy validation fraction");
  app->add_option("--eps", t.eps, "CBC denominator floor");
  app->add_option("--pair-budget", t.pair_budget, "CBC pair budget (0 = exact)");
  app->add_option("--tol", t.tol, "PPR tolerance");
  app->add_option("--refresh-every", t.refresh_every,
                  "re-extract with the current model every k epochs (ablation)");
  app->add_flag("--dump-trace", t.dump_trace, "write per-epoch trace JSONL");
  app->add_flag("--dump-confident", t.dump_confident,
                "include confident-set bitsets in the trace");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topological sample selection for noisily labeled graphs"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* cgen = app.add_subcommand("gen", "generate an SBM benchmark graph");
  cgen->add_option("--out", gen.out)->required();
  cgen->add_option("--n", gen.sbm.n)->required();
  cgen->add_option("--classes", gen.sbm.num_classes)->required();
  cgen->add_option("--p-in", gen.sbm.p_in)->required();
  cgen->add_option("--p-out", gen.sbm.p_out)->required();
  cgen->add_option("--feature-dim", gen.sbm.feature_dim);
  cgen->add_option("--feature-shift", gen.sbm.feature_shift);
  cgen->add_option("--train-frac", gen.sbm.train_frac);
  cgen->add_option("--val-frac", gen.sbm.val_frac);
  cgen->add_option("--seed", gen.seed);

  CorruptArgs cor;
  auto* ccor = app.add_subcommand("corrupt", "inject label noise and audit it");
  ccor->add_option("--graph", cor.graph_dir)->required();
  ccor->add_option("--out", cor.out)->required();
  ccor->add_option("--noise-kind", cor.kind)->required();
  ccor->add_option("--noise-rate", cor.rate)->required();
  ccor->add_option("--q-std", cor.q_std);
  ccor->add_option("--scope", cor.scope, "train or all");
  ccor->add_option("--seed", cor.seed);

  CbcArgs cbc;
  auto* ccbc = app.add_subcommand("cbc", "score nodes and export the distribution CSV");
  ccbc->add_option("--graph", cbc.graph_dir)->required();
  ccbc->add_option("--labels", cbc.labels, "noisy label file (default: clean labels)");
  ccbc->add_option("--out", cbc.out)->required();
  ccbc->add_option("--alpha", cbc.alpha);
  ccbc->add_option("--eps", cbc.eps);
  ccbc->add_option("--pair-budget", cbc.pair_budget);
  ccbc->add_option("--tol", cbc.tol);
  ccbc->add_option("--seed", cbc.seed);
  ccbc->add_flag("--assert-separation", cbc.assert_separation,
                 "exit 1 unless near-boundary mean CBC exceeds far mean");

  TrainArgs train;
  auto* ctrain =
      app.add_subcommand("train", "train plain cross-entropy or the curriculum method");
  add_train_options(ctrain, train, true);

  SweepArgs sweep;
  auto* csweep = app.add_subcommand("sweep", "grid over lambda0 and pacing kinds");
  sweep.base.method = "tss";
  add_train_options(csweep, sweep.base, false);
  csweep->add_option("--lambda0-grid", sweep.lambda0_grid, "comma-separated lambda0 values")
      ->delimiter(',');
  csweep->add_option("--pacing-grid", sweep.pacing_grid, "comma-separated pacing kinds")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cgen->parsed()) return cmd_gen(gen);
    if (ccor->parsed()) return cmd_corrupt(cor);
    if (ccbc->parsed()) return cmd_cbc(cbc);
    if (ctrain->parsed()) return cmd_train(train);
    if (csweep->parsed()) return cmd_sweep(sweep);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
