#pragma once

// Test problem on R^{m x n} x O(d) where the convergence hypotheses of
// SRCD hold by construction:
//
//   f(X, W) = 1/2 ||W A - B||_F^2 + 1/2 ||X - C||_F^2,   B = Q A, Q in O(d).
//
// f is quadratic, so its Euclidean gradient is Lipschitz with
// L = max(sigma_max(A)^2, 1). Stochastic gradients add i.i.d. N(0, sigma^2)
// noise to every Euclidean gradient entry, which gives unbiased estimates
// (mu = 1, M = 1) with variance bounded by C = sigma^2 * (#entries).

#include "orcd/manifold.hpp"
#include "orcd/optim.hpp"
#include "orcd/rng.hpp"

#include <cstdint>
#include <vector>

namespace orcd {

struct SyntheticProblem {
  Matrix a;  // d x d
  Matrix b;  // d x d
  Matrix c;  // m x n
  OrthogonalMatrix target;  // Q
  double noise_std = 0.0;
  double smoothness = 1.0;  // L

  static SyntheticProblem make(int d, int m, int n, double noise_std, std::uint64_t seed);

  int dim() const noexcept { return static_cast<int>(a.rows()); }
  double value(const Matrix& x, const OrthogonalMatrix& w) const;
  Matrix grad_x(const Matrix& x) const;
  Matrix eucl_grad_w(const OrthogonalMatrix& w) const;
  // ||g_X||^2 + ||P_W(grad_W)||^2 of the exact gradient.
  double gradient_norm_sq(const Matrix& x, const OrthogonalMatrix& w) const;
  // C_X and C_W of the noise model.
  double noise_bound_x() const noexcept;
  double noise_bound_w() const noexcept;
};

struct SyntheticRunConfig {
  int iterations = 100000;
  StepSchedule schedule = StepSchedule::polynomial(0.5, 0.75, 1.0, true);
  SelectionRule rule{SelectionRule::Kind::uniform, 0.005, true};
  std::uint64_t seed = 0;
};

struct SyntheticIterate {
  double alpha = 0.0;
  double value = 0.0;
  double gnorm_sq = 0.0;  // at the iterate before the step
};

struct SyntheticRun {
  std::vector<SyntheticIterate> trace;
  Matrix x;
  OrthogonalMatrix w;
  double final_gnorm_sq = 0.0;
};

// SRCD from X = 0, W = I. Records the exact gradient norm at every iterate,
// k = 0..iterations (the last entry is the final point, no step taken).
SyntheticRun run_srcd_synthetic(const SyntheticProblem& problem, const SyntheticRunConfig& cfg);

}  // namespace orcd
