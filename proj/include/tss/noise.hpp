#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tss/matrix.hpp"
#include "tss/random.hpp"

namespace tss {

enum class NoiseKind : std::uint8_t { Symmetric = 0, Pairflip = 1, Instance = 2 };

inline const char* noise_kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::Symmetric: return "symmetric";
    case NoiseKind::Pairflip: return "pairflip";
    case NoiseKind::Instance: return "instance";
  }
  return "?";
}

inline NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "symmetric") return NoiseKind::Symmetric;
  if (s == "pairflip") return NoiseKind::Pairflip;
  if (s == "instance") return NoiseKind::Instance;
  throw std::invalid_argument("unknown noise kind: " + s);
}

struct NoiseSpec {
  NoiseKind kind = NoiseKind::Symmetric;
  double rate = 0.0;
  std::uint64_t seed = 0;
  // scope defaults to the train mask at the call site
  void validate() const {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("noise rate must be in [0,1)");
    if (kind == NoiseKind::Pairflip && rate >= 0.5)
      throw std::invalid_argument("pairflip rate must be below 0.5");
  }
};

/// Row-stochastic C x C matrix, T[a][b] = P(noisy=b | clean=a).
using TransitionMatrix = Matrix;

inline void validate_transition_matrix(const TransitionMatrix& t) {
  if (t.rows != t.cols || t.rows < 2) throw std::invalid_argument("transition matrix must be CxC, C>=2");
  for (std::size_t a = 0; a < t.rows; ++a) {
    double row_sum = 0.0;
    for (std::size_t b = 0; b < t.cols; ++b) {
      if (t(a, b) < 0.0) throw std::invalid_argument("transition matrix entries must be >= 0");
      row_sum += t(a, b);
    }
    if (std::abs(row_sum - 1.0) > 1e-12)
      throw std::invalid_argument("transition matrix row " + std::to_string(a) + " does not sum to 1");
  }
}

/// symmetric: uniform flips to the other C-1 classes. pairflip: flips to the
/// next class mod C. Instance noise has no single matrix; see instance_noise.
inline TransitionMatrix transition_matrix(NoiseKind kind, double rate, int num_classes) {
  if (num_classes < 2) throw std::invalid_argument("transition_matrix: need C >= 2");
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("transition_matrix: rate must be in [0,1)");
  TransitionMatrix t(num_classes, num_classes, 0.0);
  switch (kind) {
    case NoiseKind::Symmetric:
      for (int a = 0; a < num_classes; ++a)
        for (int b = 0; b < num_classes; ++b)
          t(a, b) = (a == b) ? 1.0 - rate : rate / (num_classes - 1);
      break;
    case NoiseKind::Pairflip:
      if (rate >= 0.5) throw std::invalid_argument("transition_matrix: pairflip rate must be below 0.5");
      for (int a = 0; a < num_classes; ++a) {
        t(a, a) = 1.0 - rate;
        t(a, (a + 1) % num_classes) = rate;
      }
      break;
    case NoiseKind::Instance:
      throw std::invalid_argument("instance noise has no transition matrix; use instance_noise");
  }
  validate_transition_matrix(t);
  return t;
}

/// Resamples each in-scope label from its row of T. Out-of-scope labels are
/// untouched. Deterministic given the seed.
inline std::vector<int> apply_class_noise(const std::vector<int>& labels,
                                          const TransitionMatrix& t,
                                          const std::vector<std::uint8_t>& scope,
                                          std::uint64_t seed) {
  validate_transition_matrix(t);
  if (scope.size() != labels.size()) throw std::invalid_argument("apply_class_noise: scope size mismatch");
  const int num_classes = static_cast<int>(t.rows);
  std::vector<int> noisy = labels;
  auto rng = make_rng(derive_seed(seed, "class_noise"));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!scope[i]) continue;
    int y = labels[i];
    if (y < 0 || y >= num_classes) throw std::invalid_argument("apply_class_noise: label out of range");
    double u = unif(rng);
    double acc = 0.0;
    int chosen = num_classes - 1;
    for (int b = 0; b < num_classes; ++b) {
      acc += t(y, b);
      if (u < acc) {
        chosen = b;
        break;
      }
    }
    noisy[i] = chosen;
  }
  return noisy;
}

namespace detail {

/// Wrong-class choice by inverse CDF over softmax(x*W) restricted to classes
/// != y, at quantile u. Pure in its inputs.
inline int instance_flip_target(const double* x, std::size_t dim, int y, const Matrix& proj,
                                double u) {
  const int num_classes = static_cast<int>(proj.cols);
  std::vector<double> score(num_classes, 0.0);
  for (std::size_t k = 0; k < dim; ++k) {
    const double xk = x[k];
    if (xk == 0.0) continue;
    const double* wk = proj.row(k);
    for (int c = 0; c < num_classes; ++c) score[c] += xk * wk[c];
  }
  double mx = -1e300;
  for (int c = 0; c < num_classes; ++c)
    if (c != y) mx = std::max(mx, score[c]);
  double z = 0.0;
  for (int c = 0; c < num_classes; ++c)
    if (c != y) z += std::exp(score[c] - mx);
  double acc = 0.0;
  int chosen = (y == num_classes - 1) ? num_classes - 2 : num_classes - 1;
  for (int c = 0; c < num_classes; ++c) {
    if (c == y) continue;
    acc += std::exp(score[c] - mx) / z;
    if (u < acc) {
      chosen = c;
      break;
    }
  }
  return chosen;
}

}  // namespace detail

struct InstanceNoiseOptions {
  double rate = 0.0;
  double q_std = 0.1;  // std of the per-instance flip probability
  std::uint64_t seed = 0;
};

/// Feature-dependent noise: per-instance flip probability q_i from a
/// truncated normal around `rate`, flip targets weighted by a softmax of a
/// random linear projection of the features over the wrong classes.
/// Never flips a label to itself.
inline std::vector<int> instance_noise(const Matrix& features, const std::vector<int>& labels,
                                       int num_classes, const std::vector<std::uint8_t>& scope,
                                       const InstanceNoiseOptions& opts) {
  if (features.rows != labels.size()) throw std::invalid_argument("instance_noise: shape mismatch");
  if (scope.size() != labels.size()) throw std::invalid_argument("instance_noise: scope size mismatch");
  if (opts.rate < 0.0 || opts.rate >= 1.0) throw std::invalid_argument("instance_noise: rate must be in [0,1)");
  if (num_classes < 2) throw std::invalid_argument("instance_noise: need C >= 2");

  const std::size_t n = labels.size();
  std::vector<int> noisy = labels;

  auto q_rng = make_rng(derive_seed(opts.seed, "instance_q"));
  std::normal_distribution<double> gauss(opts.rate, opts.q_std);
  std::vector<double> q(n, opts.rate);
  if (opts.q_std > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      double v;
      do {
        v = gauss(q_rng);
      } while (v < 0.0 || v > 1.0);
      q[i] = v;
    }
  }

  auto proj_rng = make_rng(derive_seed(opts.seed, "instance_proj"));
  std::normal_distribution<double> std_gauss(0.0, 1.0);
  Matrix proj(features.cols, num_classes);
  for (double& w : proj.data) w = std_gauss(proj_rng);

  auto flip_rng = make_rng(derive_seed(opts.seed, "instance_flip"));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!scope[i]) continue;
    double u_flip = unif(flip_rng);
    double u_target = unif(flip_rng);
    if (u_flip >= q[i]) continue;
    noisy[i] = detail::instance_flip_target(features.row(i), features.cols, labels[i], proj,
                                            u_target);
  }
  return noisy;
}

struct NoiseAudit {
  Matrix confusion;                    // row-normalized empirical P(noisy|clean)
  std::vector<std::int64_t> class_counts;
  double flip_rate = 0.0;
  std::vector<double> per_class_flip;
};

inline NoiseAudit noise_audit(const std::vector<int>& clean, const std::vector<int>& noisy,
                              int num_classes) {
  if (clean.size() != noisy.size()) throw std::invalid_argument("noise_audit: length mismatch");
  NoiseAudit a;
  a.confusion = Matrix(num_classes, num_classes, 0.0);
  a.class_counts.assign(num_classes, 0);
  a.per_class_flip.assign(num_classes, 0.0);
  std::int64_t flips = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    a.confusion(clean[i], noisy[i]) += 1.0;
    a.class_counts[clean[i]]++;
    if (clean[i] != noisy[i]) flips++;
  }
  for (int c = 0; c < num_classes; ++c) {
    if (a.class_counts[c] == 0) continue;
    double inv = 1.0 / static_cast<double>(a.class_counts[c]);
    for (int b = 0; b < num_classes; ++b) a.confusion(c, b) *= inv;
    a.per_class_flip[c] = 1.0 - a.confusion(c, c);
  }
  a.flip_rate = clean.empty() ? 0.0 : static_cast<double>(flips) / static_cast<double>(clean.size());
  return a;
}

}  // namespace tss
