#pragma once

// Stochastic Riemannian gradient descent (SRGD) and coordinate descent (SRCD)
// on the orthogonal group, plus the plain SGD baseline.
//
// Both Riemannian methods update the unconstrained blocks X <- X - alpha g_X.
// SRGD moves W along the full projected gradient with the exponential map;
// SRCD moves W along one (or a block of) tangent coordinates, which is a
// Givens rotation of two columns of W.

#include "orcd/manifold.hpp"
#include "orcd/rng.hpp"
#include "orcd/rnn.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace orcd {

class StepSchedule {
public:
  enum class Kind { fixed, polynomial };

  static StepSchedule fixed(double alpha0);
  // alpha_k = alpha0 / (1 + k / offset)^exponent. With robbins_monro set the
  // exponent must lie in (0.5, 1] so that sum alpha = inf, sum alpha^2 < inf.
  static StepSchedule polynomial(double alpha0, double exponent, double offset = 1.0,
                                 bool robbins_monro = false);

  double operator()(std::int64_t k) const noexcept;

  Kind kind() const noexcept { return kind_; }
  double alpha0() const noexcept { return alpha0_; }
  double exponent() const noexcept { return exponent_; }
  double offset() const noexcept { return offset_; }
  bool satisfies_robbins_monro() const noexcept;

private:
  StepSchedule(Kind kind, double alpha0, double exponent, double offset)
      : kind_(kind), alpha0_(alpha0), exponent_(exponent), offset_(offset) {}

  Kind kind_;
  double alpha0_;
  double exponent_;
  double offset_;
};

inline double schedule_step(const StepSchedule& s, std::int64_t k) { return s(k); }

struct SelectionRule {
  enum class Kind { uniform, gauss_southwell, block_gs };
  Kind kind = Kind::gauss_southwell;
  double block_fraction = 0.005;
  bool disjoint = true;

  // max(1, round(block_fraction * D))
  std::int64_t block_size(std::int64_t D) const noexcept;
};

CoordIndex select_uniform(Rng& rng, std::int64_t D);
// argmax |v_i|, ties to the smallest index. Throws on an empty vector.
CoordIndex select_gauss_southwell(std::span<const double> partials);
// Top-b coordinates by |v_i|. With `disjoint`, coordinates sharing a column
// with an earlier pick are skipped, so at most floor(d/2) are returned.
std::vector<CoordIndex> select_block_gs(std::span<const double> partials, std::int64_t b,
                                        bool disjoint, int d);

// W <- Exp_W(sum_i theta_i eta_i). Disjoint pairs compose as independent
// Givens rotations; otherwise one matrix exponential is taken.
OrthogonalMatrix apply_block(const OrthogonalMatrix& w, std::span<const CoordIndex> coords,
                             std::span<const double> thetas, bool disjoint);
void apply_block_inplace(OrthogonalMatrix& w, std::span<const CoordIndex> coords,
                         std::span<const double> thetas, bool disjoint);

// What a W-update did; thetas are the partials <g_W, eta_i> (before -alpha).
struct CoordinateStep {
  std::vector<CoordIndex> coords;
  std::vector<double> thetas;
};

// Kernels shared by the RNN optimizer and the synthetic problem.
void sgd_update(Matrix& x, const Matrix& grad, double alpha);
void srgd_update_w(OrthogonalMatrix& w, const Matrix& eucl_grad, double alpha);
// Throws NumericError, leaving w untouched, if a selected partial is not finite.
CoordinateStep srcd_update_w(OrthogonalMatrix& w, const Matrix& eucl_grad, double alpha,
                             const SelectionRule& rule, Rng& rng);

enum class OptimizerKind { sgd, srgd, srcd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::srcd;
  StepSchedule schedule = StepSchedule::fixed(2e-4);
  SelectionRule rule;
  // SRGD only; 0 disables. SRCD never re-orthogonalizes.
  std::int64_t reorth_every = 1000;
};

// Parses sgd | srgd | srcd-u | srcd-gs | srcd-block-gs.
OptimizerConfig optimizer_from_name(const std::string& name, StepSchedule schedule);
std::string optimizer_name(const OptimizerConfig& cfg);

struct OptimizerState {
  RnnParams params;
  OptimizerConfig config;
  std::int64_t k = 0;
  Rng rng;

  OptimizerState(RnnParams p, OptimizerConfig cfg, std::uint64_t seed);
};

struct StepInfo {
  double alpha = 0.0;
  CoordinateStep coordinate;  // empty for SGD / SRGD
};

// Throws NumericError on non-finite gradients.
StepInfo sgd_step(OptimizerState& state, const Grads& grads);
StepInfo srgd_step(OptimizerState& state, const Grads& grads);
StepInfo srcd_step(OptimizerState& state, const Grads& grads);
StepInfo optimizer_step(OptimizerState& state, const Grads& grads);

}  // namespace orcd
