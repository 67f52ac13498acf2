#pragma once

// Slow, obviously-correct reference computations used by the tests. Nothing
// here calls into the library's numerical code.

#include "orcd/types.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using orcd::Matrix;
using orcd::Vector;

inline Matrix gaussian(int rows, int cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = n(rng);
  return m;
}

// Gram-Schmidt on a Gaussian matrix (twice, for accuracy).
inline Matrix random_orthogonal(int d, std::mt19937_64& rng) {
  Matrix q = gaussian(d, d, rng);
  for (int pass = 0; pass < 2; ++pass) {
    for (int c = 0; c < d; ++c) {
      for (int p = 0; p < c; ++p) q.col(c) -= q.col(p).dot(q.col(c)) * q.col(p);
      q.col(c) /= q.col(c).norm();
    }
  }
  return q;
}

inline Matrix random_skew(int d, std::mt19937_64& rng, double fro) {
  Matrix a = gaussian(d, d, rng);
  a = (a - a.transpose()).eval();
  return a * (fro / a.norm());
}

// 30-term Taylor series, with plain scaling and squaring for large arguments.
inline Matrix taylor_expm(const Matrix& a) {
  int squarings = 0;
  double n = a.norm();
  while (n > 0.5) {
    n /= 2;
    ++squarings;
  }
  const Matrix s = a / std::pow(2.0, squarings);
  Matrix term = Matrix::Identity(a.rows(), a.cols());
  Matrix sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = (term * s / k).eval();
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = (sum * sum).eval();
  return sum;
}

inline Matrix basis_dense(int j, int l, int d) {
  Matrix h = Matrix::Zero(d, d);
  h(j - 1, l - 1) = 1.0 / std::sqrt(2.0);
  h(l - 1, j - 1) = -1.0 / std::sqrt(2.0);
  return h;
}

// All pairs (j, l), j < l, in coordinate order.
inline std::vector<std::pair<int, int>> pairs(int d) {
  std::vector<std::pair<int, int>> out;
  for (int j = 1; j <= d; ++j)
    for (int l = j + 1; l <= d; ++l) out.emplace_back(j, l);
  return out;
}

inline double trace_inner(const Matrix& a, const Matrix& b) { return (a.transpose() * b).trace(); }

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace oracle
