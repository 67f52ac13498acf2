#pragma once

// Data-parallel inner loops. Every kernel has a serial reference and an
// OpenMP version; both produce bitwise-identical results because each output
// element is owned by exactly one iteration and reductions run in a fixed order.

#include "orcd/manifold.hpp"
#include "orcd/types.hpp"

#include <span>
#include <vector>

namespace orcd::kernels {

// Rows of a d x B activation matrix (one column per sequence in the batch).
struct ModReluGrad {
  Matrix dpre;   // d x B
  Vector dbias;  // d, summed over the batch
};

namespace serial {

// out_i = (A(j,l) - A(l,j)) / sqrt(2) for every pair, in coordinate order.
void skew_partials(const Matrix& a, std::span<double> out);

// Applies rotations to pairwise disjoint column pairs.
void rotate_pairs(Matrix& w, std::span<const ColumnPair> pairs, std::span<const double> angles);

// sign(x) max(|x| + b, 0), bias broadcast over columns.
void modrelu(const Matrix& pre, const Vector& bias, Matrix& out);

// Backpropagates dh through modrelu; dbias accumulates sign(x) on active units.
void modrelu_backward(const Matrix& pre, const Vector& bias, const Matrix& dh, ModReluGrad& grad);

// counts[0] is the underflow bin (|v| < edges[0], zeros included), counts[k]
// covers [edges[k-1], edges[k]), the last bin is the overflow.
void abs_histogram(std::span<const double> values, std::span<const double> edges,
                   std::span<std::int64_t> counts);

}  // namespace serial

namespace parallel {

void skew_partials(const Matrix& a, std::span<double> out);
void rotate_pairs(Matrix& w, std::span<const ColumnPair> pairs, std::span<const double> angles);
void modrelu(const Matrix& pre, const Vector& bias, Matrix& out);
void modrelu_backward(const Matrix& pre, const Vector& bias, const Matrix& dh, ModReluGrad& grad);
void abs_histogram(std::span<const double> values, std::span<const double> edges,
                   std::span<std::int64_t> counts);

}  // namespace parallel

// Rotation of columns (j, l) by angle; 6d flops.
void rotate_column_pair(Matrix& w, ColumnPair p, double angle) noexcept;

int max_threads() noexcept;
void set_threads(int n) noexcept;

}  // namespace orcd::kernels
