#include "orcd/kernels.hpp"

#include "orcd/flops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace orcd::kernels {

namespace {

// Offset (0-based) of the first coordinate whose pair starts at column j0.
inline std::int64_t row_offset(std::int64_t j0, std::int64_t d) noexcept {
  return j0 * d - j0 * (j0 + 1) / 2;
}

void check_partials(const Matrix& a, std::span<double> out) {
  if (a.rows() != a.cols() || static_cast<std::int64_t>(out.size()) != manifold_dim(a.rows())) {
    throw std::invalid_argument("skew_partials: size mismatch");
  }
}

void check_pairs(const Matrix& w, std::span<const ColumnPair> pairs, std::span<const double> angles) {
  if (pairs.size() != angles.size()) throw std::invalid_argument("rotate_pairs: size mismatch");
  for (const auto& p : pairs) {
    if (p.j < 1 || p.j >= p.l || p.l > w.cols()) throw std::out_of_range("rotate_pairs: bad pair");
  }
}

inline double modrelu_scalar(double x, double b) noexcept {
  if (x == 0.0) return 0.0;
  const double mag = std::abs(x) + b;
  return mag > 0.0 ? std::copysign(mag, x) : 0.0;
}

void check_histogram(std::span<const double> edges, std::span<std::int64_t> counts) {
  if (counts.size() != edges.size() + 1) throw std::invalid_argument("abs_histogram: counts size");
  if (!std::is_sorted(edges.begin(), edges.end()) ||
      std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw std::invalid_argument("abs_histogram: edges must be strictly increasing");
  }
}

inline std::size_t bin_of(double v, std::span<const double> edges) noexcept {
  const double a = std::abs(v);
  return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), a) - edges.begin());
}

}  // namespace

void rotate_column_pair(Matrix& w, ColumnPair p, double angle) noexcept {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  double* cj = w.col(p.j0()).data();
  double* cl = w.col(p.l0()).data();
  const Eigen::Index n = w.rows();
  for (Eigen::Index r = 0; r < n; ++r) {
    const double x = cj[r];
    const double y = cl[r];
    cj[r] = c * x - s * y;
    cl[r] = s * x + c * y;
  }
  flops::add(6 * static_cast<std::uint64_t>(n));
}

namespace serial {

void skew_partials(const Matrix& a, std::span<double> out) {
  check_partials(a, out);
  const std::int64_t d = a.rows();
  std::int64_t i = 0;
  for (std::int64_t j = 0; j < d; ++j) {
    for (std::int64_t l = j + 1; l < d; ++l) out[i++] = (a(j, l) - a(l, j)) * kInvSqrt2;
  }
  flops::add(2 * static_cast<std::uint64_t>(out.size()));
}

void rotate_pairs(Matrix& w, std::span<const ColumnPair> pairs, std::span<const double> angles) {
  check_pairs(w, pairs, angles);
  for (std::size_t k = 0; k < pairs.size(); ++k) rotate_column_pair(w, pairs[k], angles[k]);
}

void modrelu(const Matrix& pre, const Vector& bias, Matrix& out) {
  out.resize(pre.rows(), pre.cols());
  for (Eigen::Index c = 0; c < pre.cols(); ++c) {
    for (Eigen::Index r = 0; r < pre.rows(); ++r) out(r, c) = modrelu_scalar(pre(r, c), bias(r));
  }
}

void modrelu_backward(const Matrix& pre, const Vector& bias, const Matrix& dh, ModReluGrad& grad) {
  grad.dpre.resize(pre.rows(), pre.cols());
  grad.dbias.setZero(pre.rows());
  for (Eigen::Index r = 0; r < pre.rows(); ++r) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < pre.cols(); ++c) {
      const double x = pre(r, c);
      const bool active = x != 0.0 && std::abs(x) + bias(r) > 0.0;
      grad.dpre(r, c) = active ? dh(r, c) : 0.0;
      if (active) acc += x > 0.0 ? dh(r, c) : -dh(r, c);
    }
    grad.dbias(r) = acc;
  }
}

void abs_histogram(std::span<const double> values, std::span<const double> edges,
                   std::span<std::int64_t> counts) {
  check_histogram(edges, counts);
  std::fill(counts.begin(), counts.end(), 0);
  for (double v : values) ++counts[bin_of(v, edges)];
}

}  // namespace serial

namespace parallel {

void skew_partials(const Matrix& a, std::span<double> out) {
  check_partials(a, out);
  const std::int64_t d = a.rows();
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t j = 0; j < d; ++j) {
    double* dst = out.data() + row_offset(j, d);
    for (std::int64_t l = j + 1; l < d; ++l) dst[l - j - 1] = (a(j, l) - a(l, j)) * kInvSqrt2;
  }
  flops::add(2 * static_cast<std::uint64_t>(out.size()));
}

void rotate_pairs(Matrix& w, std::span<const ColumnPair> pairs, std::span<const double> angles) {
  check_pairs(w, pairs, angles);
  const auto n = static_cast<std::int64_t>(pairs.size());
  const double* ang = angles.data();
  const ColumnPair* pr = pairs.data();
  const Eigen::Index rows = w.rows();
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < n; ++k) {
    const double c = std::cos(ang[k]);
    const double s = std::sin(ang[k]);
    double* cj = w.col(pr[k].j0()).data();
    double* cl = w.col(pr[k].l0()).data();
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double x = cj[r];
      const double y = cl[r];
      cj[r] = c * x - s * y;
      cl[r] = s * x + c * y;
    }
  }
  flops::add(6 * static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(n));
}

void modrelu(const Matrix& pre, const Vector& bias, Matrix& out) {
  out.resize(pre.rows(), pre.cols());
  const Eigen::Index cols = pre.cols();
  const Eigen::Index rows = pre.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = modrelu_scalar(pre(r, c), bias(r));
  }
}

void modrelu_backward(const Matrix& pre, const Vector& bias, const Matrix& dh, ModReluGrad& grad) {
  grad.dpre.resize(pre.rows(), pre.cols());
  grad.dbias.setZero(pre.rows());
  const Eigen::Index cols = pre.cols();
  const Eigen::Index rows = pre.rows();
  // Row-parallel so each bias entry is reduced by one thread in column order.
#pragma omp parallel for schedule(static)
  for (Eigen::Index r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double x = pre(r, c);
      const bool active = x != 0.0 && std::abs(x) + bias(r) > 0.0;
      grad.dpre(r, c) = active ? dh(r, c) : 0.0;
      if (active) acc += x > 0.0 ? dh(r, c) : -dh(r, c);
    }
    grad.dbias(r) = acc;
  }
}

void abs_histogram(std::span<const double> values, std::span<const double> edges,
                   std::span<std::int64_t> counts) {
  check_histogram(edges, counts);
  std::fill(counts.begin(), counts.end(), 0);
  const auto n = static_cast<std::int64_t>(values.size());
  const std::size_t nb = counts.size();
#pragma omp parallel
  {
    std::vector<std::int64_t> local(nb, 0);
#pragma omp for schedule(static) nowait
    for (std::int64_t k = 0; k < n; ++k) ++local[bin_of(values[k], edges)];
#pragma omp critical
    for (std::size_t b = 0; b < nb; ++b) counts[b] += local[b];
  }
}

}  // namespace parallel

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) noexcept {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#endif
  Eigen::setNbThreads(std::max(1, n));
}

}  // namespace orcd::kernels
