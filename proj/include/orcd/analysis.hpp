#pragma once

#include "orcd/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace orcd {

// How concentrated a vector of Riemannian partials is. Mass is measured on
// squared magnitudes (by Parseval, the squared norm of the gradient); the
// *_linear fields repeat the computation on plain magnitudes.
struct SparsityProfile {
  Vector sorted_magnitudes;  // descending
  Vector cumulative_mass;    // nondecreasing, ends at 1 (empty for the zero vector)
  double frac95 = 0.0;
  double frac99 = 0.0;
  double frac95_linear = 0.0;
  double frac99_linear = 0.0;
  double norm = 0.0;  // ||v||_2
};

SparsityProfile sparsity_profile(std::span<const double> partials);

// Smallest n with (top-n mass) >= p, divided by D. Exposed for tests.
double mass_fraction(const Vector& cumulative_mass, double p);

// Edges 10^lo, 10^(lo+1), ..., 10^hi.
std::vector<double> decade_edges(int lo_exp, int hi_exp);

struct Histogram {
  std::vector<double> edges;
  std::vector<std::int64_t> counts;  // edges.size() + 1 bins, see kernels::abs_histogram
};

// Throws std::invalid_argument for non-increasing or non-positive edges.
Histogram histogram(std::span<const double> values, std::span<const double> edges);

struct ConvergenceTrace {
  std::vector<double> alpha;
  std::vector<double> gnorm_sq;
  std::vector<double> m_k;  // running sum(alpha g^2) / sum(alpha)
};

// Running weighted average with Neumaier-compensated sums.
std::vector<double> convergence_metric(std::span<const double> alpha, std::span<const double> gnorm_sq);
ConvergenceTrace make_convergence_trace(std::vector<double> alpha, std::vector<double> gnorm_sq);

// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

// Compensated accumulator.
class NeumaierSum {
public:
  void add(double v) noexcept;
  double value() const noexcept { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace orcd
