#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tss/parallel.hpp"

namespace tss {

/// Dense row-major matrix of doubles. Small on purpose: the library only
/// needs products, transposed products and elementwise maps at desk scale.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  double squared_norm() const {
    double s = 0.0;
    for (double v : data) s += v * v;
    return s;
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

/// C = A * B. Parallel over output rows; each row is accumulated in a fixed
/// order, so the result does not depend on the thread count.
inline Matrix matmul(const Matrix& a, const Matrix& b, int threads = default_threads()) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimensions differ");
  Matrix c(a.rows, b.cols);
  parallel_for(
      a.rows,
      [&](std::size_t i) {
        double* ci = c.row(i);
        const double* ai = a.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
          const double aik = ai[k];
          if (aik == 0.0) continue;
          const double* bk = b.row(k);
          for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
        }
      },
      threads);
  return c;
}

/// C = A^T * B, accumulated over fixed row chunks so the reduction order is
/// independent of the worker count.
inline Matrix matmul_at_b(const Matrix& a, const Matrix& b, int threads = default_threads()) {
  if (a.rows != b.rows) throw std::invalid_argument("matmul_at_b: row counts differ");
  constexpr std::size_t kChunks = 16;
  const std::size_t nchunks = std::min<std::size_t>(kChunks, a.rows == 0 ? 1 : a.rows);
  std::vector<Matrix> partial(nchunks, Matrix(a.cols, b.cols));
  const std::size_t chunk = (a.rows + nchunks - 1) / nchunks;
  parallel_for(
      nchunks,
      [&](std::size_t w) {
        Matrix& p = partial[w];
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(a.rows, begin + chunk);
        for (std::size_t i = begin; i < end; ++i) {
          const double* ai = a.row(i);
          const double* bi = b.row(i);
          for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            double* pk = p.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) pk[j] += aik * bi[j];
          }
        }
      },
      threads);
  Matrix c(a.cols, b.cols);
  for (std::size_t w = 0; w < nchunks; ++w)
    for (std::size_t e = 0; e < c.data.size(); ++e) c.data[e] += partial[w].data[e];
  return c;
}

/// C = A * B^T.
inline Matrix matmul_a_bt(const Matrix& a, const Matrix& b, int threads = default_threads()) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_a_bt: column counts differ");
  Matrix c(a.rows, b.rows);
  parallel_for(
      a.rows,
      [&](std::size_t i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (std::size_t j = 0; j < b.rows; ++j) {
          const double* bj = b.row(j);
          double s = 0.0;
          for (std::size_t k = 0; k < a.cols; ++k) s += ai[k] * bj[k];
          ci[j] = s;
        }
      },
      threads);
  return c;
}

}  // namespace tss
