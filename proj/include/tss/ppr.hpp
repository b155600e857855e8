#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tss/graph.hpp"
#include "tss/matrix.hpp"
#include "tss/parallel.hpp"

namespace tss {

enum class PprMethod : std::uint8_t { DenseInverse = 0, Iterative = 1 };

/// The Personalized PageRank matrix alpha*(I - (1-alpha)*A_hat)^{-1},
/// stored dense row-major. Row u holds the termination probabilities of an
/// alpha-discounted walk started at u. residual_bound certifies
/// max_u ||x_u - (alpha e_u + (1-alpha) x_u A_hat)||_1 over all rows.
struct PprMatrix {
  double alpha = 0.15;
  std::size_t n = 0;
  Matrix rows;
  double residual_bound = 0.0;
  PprMethod method = PprMethod::Iterative;

  double at(NodeId u, NodeId v) const { return rows(u, v); }
  const double* row(NodeId u) const { return rows.row(u); }
};

struct PprOptions {
  double alpha = 0.15;
  double tol = 1e-9;
  int max_iter = 0;  // 0 = derive from tol and alpha
  std::size_t dense_threshold = 4000;
  int threads = default_threads();

  int effective_max_iter() const {
    if (max_iter > 0) return max_iter;
    if (alpha >= 1.0) return 4;
    double iters = std::log(tol) / std::log(1.0 - alpha);
    return 10 * static_cast<int>(std::ceil(iters));
  }
};

class PprConvergenceError : public std::runtime_error {
 public:
  PprConvergenceError(const std::string& msg, double residual)
      : std::runtime_error(msg), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

namespace detail {

inline double ppr_row_residual(const NormalizedAdjacency& adj, double alpha, NodeId source,
                               const std::vector<double>& x, std::vector<double>& scratch) {
  adj.multiply(x.data(), scratch.data());
  double r = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double target = (1.0 - alpha) * scratch[i] + (static_cast<NodeId>(i) == source ? alpha : 0.0);
    r += std::abs(x[i] - target);
  }
  return r;
}

}  // namespace detail

/// One PPR row by power iteration: x <- alpha e_u + (1-alpha) A_hat x.
/// Returns the converged vector; `residual_out`, when given, receives the
/// actual residual of the returned vector.
inline std::vector<double> ppr_row(const NormalizedAdjacency& adj, double alpha, NodeId source,
                                   double tol, int max_iter, double* residual_out = nullptr) {
  if (tol <= 0.0) throw std::invalid_argument("ppr_row: tol must be positive");
  if (alpha <= 0.0 || alpha > 1.0) throw std::invalid_argument("ppr_row: alpha must be in (0,1]");
  const std::size_t n = adj.n();
  std::vector<double> x(n, 0.0), next(n, 0.0);
  x[source] = alpha;
  bool converged = false;
  double delta = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    adj.multiply(x.data(), next.data());
    delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double v = (1.0 - alpha) * next[i] + (static_cast<NodeId>(i) == source ? alpha : 0.0);
      delta += std::abs(v - x[i]);
      x[i] = v;
    }
    if (delta <= tol) {
      converged = true;
      break;
    }
  }
  double residual = detail::ppr_row_residual(adj, alpha, source, x, next);
  if (!converged && residual > tol)
    throw PprConvergenceError("ppr_row: no convergence for source " + std::to_string(source) +
                                  " within " + std::to_string(max_iter) +
                                  " iterations (residual " + std::to_string(residual) + ")",
                              residual);
  if (residual_out) *residual_out = residual;
  return x;
}

/// Exact solve of (I - (1-alpha) A_hat) X = alpha I by Cholesky; the system
/// matrix is SPD for alpha in (0,1] when the spectral radius of A_hat is at
/// most 1. residual_bound is recomputed from the actual result.
inline PprMatrix ppr_dense(const NormalizedAdjacency& adj, double alpha,
                           int threads = default_threads()) {
  if (alpha <= 0.0 || alpha > 1.0) throw std::invalid_argument("ppr_dense: alpha must be in (0,1]");
  const std::size_t n = adj.n();
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::int64_t e = adj.matrix.offsets[u]; e < adj.matrix.offsets[u + 1]; ++e)
      m(u, adj.matrix.targets[e]) -= (1.0 - alpha) * adj.matrix.values[e];

  Eigen::MatrixXd pi;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) {
    pi = llt.solve(alpha * Eigen::MatrixXd::Identity(n, n));
  } else {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    pi = lu.solve(alpha * Eigen::MatrixXd::Identity(n, n));
    if (!pi.allFinite()) throw std::runtime_error("ppr_dense: singular system");
  }

  PprMatrix out;
  out.alpha = alpha;
  out.n = n;
  out.method = PprMethod::DenseInverse;
  out.rows = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.rows(i, j) = pi(i, j);

  std::vector<double> residuals(n, 0.0);
  parallel_for(
      n,
      [&](std::size_t u) {
        std::vector<double> x(out.rows.row(u), out.rows.row(u) + n), scratch(n);
        residuals[u] =
            detail::ppr_row_residual(adj, alpha, static_cast<NodeId>(u), x, scratch);
      },
      threads);
  for (double r : residuals) out.residual_bound = std::max(out.residual_bound, r);
  return out;
}

/// Full PPR matrix: dense solve below opts.dense_threshold, otherwise
/// independent row iterations (parallel; results do not depend on the
/// worker count).
inline PprMatrix ppr_matrix(const NormalizedAdjacency& adj, const PprOptions& opts = {}) {
  const std::size_t n = adj.n();
  if (n <= opts.dense_threshold) return ppr_dense(adj, opts.alpha, opts.threads);

  PprMatrix out;
  out.alpha = opts.alpha;
  out.n = n;
  out.method = PprMethod::Iterative;
  out.rows = Matrix(n, n);
  const int max_iter = opts.effective_max_iter();
  std::vector<double> residuals(n, 0.0);
  parallel_for(
      n,
      [&](std::size_t u) {
        auto x = ppr_row(adj, opts.alpha, static_cast<NodeId>(u), opts.tol, max_iter,
                         &residuals[u]);
        std::copy(x.begin(), x.end(), out.rows.row(u));
      },
      opts.threads);
  for (double r : residuals) out.residual_bound = std::max(out.residual_bound, r);
  return out;
}

// ---------------------------------------------------------------------------
// Binary cache: header (u64 n, f64 alpha, f64 tol, u8 method), then n*n
// row-major 8-byte reals.
// ---------------------------------------------------------------------------

inline void save_ppr(const PprMatrix& pm, double tol, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write ppr cache: " + path);
  std::uint64_t n = pm.n;
  double alpha = pm.alpha;
  std::uint8_t method = static_cast<std::uint8_t>(pm.method);
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(&alpha), sizeof(alpha));
  out.write(reinterpret_cast<const char*>(&tol), sizeof(tol));
  out.write(reinterpret_cast<const char*>(&method), sizeof(method));
  out.write(reinterpret_cast<const char*>(pm.rows.data.data()),
            static_cast<std::streamsize>(pm.rows.data.size() * sizeof(double)));
  if (!out) throw std::runtime_error("short write to ppr cache: " + path);
}

inline PprMatrix load_ppr(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open ppr cache: " + path);
  std::uint64_t n = 0;
  double alpha = 0, tol = 0;
  std::uint8_t method = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&alpha), sizeof(alpha));
  in.read(reinterpret_cast<char*>(&tol), sizeof(tol));
  in.read(reinterpret_cast<char*>(&method), sizeof(method));
  PprMatrix pm;
  pm.n = n;
  pm.alpha = alpha;
  pm.residual_bound = tol;  // the cache stores the certified tolerance
  pm.method = static_cast<PprMethod>(method);
  pm.rows = Matrix(n, n);
  in.read(reinterpret_cast<char*>(pm.rows.data.data()),
          static_cast<std::streamsize>(pm.rows.data.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated ppr cache: " + path);
  return pm;
}

}  // namespace tss
