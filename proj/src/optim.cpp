#include "orcd/optim.hpp"

#include "orcd/flops.hpp"
#include "orcd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace orcd {

// ---------------------------------------------------------------------------
// Schedules

StepSchedule StepSchedule::fixed(double alpha0) {
  if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) throw ConfigError("schedule: alpha0 must be > 0");
  return StepSchedule(Kind::fixed, alpha0, 0.0, 1.0);
}

StepSchedule StepSchedule::polynomial(double alpha0, double exponent, double offset,
                                      bool robbins_monro) {
  if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) throw ConfigError("schedule: alpha0 must be > 0");
  if (!(offset > 0.0)) throw ConfigError("schedule: offset must be > 0");
  if (!(exponent >= 0.0)) throw ConfigError("schedule: exponent must be >= 0");
  StepSchedule s(Kind::polynomial, alpha0, exponent, offset);
  if (robbins_monro && !s.satisfies_robbins_monro()) {
    throw ConfigError("schedule: exponent must lie in (0.5, 1] for Robbins-Monro stepsizes");
  }
  return s;
}

double StepSchedule::operator()(std::int64_t k) const noexcept {
  if (kind_ == Kind::fixed) return alpha0_;
  return alpha0_ / std::pow(1.0 + static_cast<double>(k) / offset_, exponent_);
}

bool StepSchedule::satisfies_robbins_monro() const noexcept {
  return kind_ == Kind::polynomial && exponent_ > 0.5 && exponent_ <= 1.0;
}

std::int64_t SelectionRule::block_size(std::int64_t D) const noexcept {
  return std::max<std::int64_t>(1, std::llround(block_fraction * static_cast<double>(D)));
}

// ---------------------------------------------------------------------------
// Coordinate selection

CoordIndex select_uniform(Rng& rng, std::int64_t D) {
  if (D < 1) throw std::invalid_argument("select_uniform: D must be >= 1");
  std::uniform_int_distribution<std::int64_t> dist(1, D);
  return CoordIndex(dist(rng));
}

CoordIndex select_gauss_southwell(std::span<const double> partials) {
  if (partials.empty()) throw std::invalid_argument("select_gauss_southwell: empty vector");
  std::size_t best = 0;
  double best_abs = std::abs(partials[0]);
  for (std::size_t i = 1; i < partials.size(); ++i) {
    const double a = std::abs(partials[i]);
    if (a > best_abs) {
      best_abs = a;
      best = i;
    }
  }
  return CoordIndex(static_cast<std::int64_t>(best) + 1);
}

std::vector<CoordIndex> select_block_gs(std::span<const double> partials, std::int64_t b,
                                        bool disjoint, int d) {
  const auto D = static_cast<std::int64_t>(partials.size());
  if (D != manifold_dim(d)) throw std::invalid_argument("select_block_gs: partials must have D entries");
  if (b < 1 || b > D) throw std::invalid_argument("select_block_gs: need 1 <= b <= D");

  std::vector<std::int64_t> order(static_cast<std::size_t>(D));
  std::iota(order.begin(), order.end(), 0);
  auto by_magnitude = [&](std::int64_t x, std::int64_t y) {
    const double ax = std::abs(partials[x]);
    const double ay = std::abs(partials[y]);
    return ax > ay || (ax == ay && x < y);
  };

  std::vector<CoordIndex> out;
  out.reserve(static_cast<std::size_t>(b));
  if (!disjoint) {
    std::partial_sort(order.begin(), order.begin() + b, order.end(), by_magnitude);
    for (std::int64_t k = 0; k < b; ++k) out.emplace_back(order[k] + 1);
    return out;
  }
  std::sort(order.begin(), order.end(), by_magnitude);
  std::vector<char> used(static_cast<std::size_t>(d), 0);
  for (std::int64_t pos : order) {
    const CoordIndex idx(pos + 1);
    const ColumnPair p = coord_pair(idx, d);
    if (used[p.j0()] || used[p.l0()]) continue;
    used[p.j0()] = used[p.l0()] = 1;
    out.push_back(idx);
    if (static_cast<std::int64_t>(out.size()) == b) break;
  }
  return out;
}

void apply_block_inplace(OrthogonalMatrix& w, std::span<const CoordIndex> coords,
                         std::span<const double> thetas, bool disjoint) {
  if (coords.size() != thetas.size()) throw std::invalid_argument("apply_block: size mismatch");
  const int d = w.dim();
  if (coords.size() == 1) {
    givens_update_inplace(w, coords[0], thetas[0]);
    return;
  }
  if (disjoint) {
    std::vector<ColumnPair> pairs;
    pairs.reserve(coords.size());
    std::vector<char> used(static_cast<std::size_t>(d), 0);
    for (CoordIndex c : coords) {
      const ColumnPair p = coord_pair(c, d);
      if (used[p.j0()] || used[p.l0()]) {
        throw std::invalid_argument("apply_block: coordinates share a column but disjoint=true");
      }
      used[p.j0()] = used[p.l0()] = 1;
      pairs.push_back(p);
    }
    std::vector<double> angles(thetas.begin(), thetas.end());
    for (double& a : angles) a *= kInvSqrt2;
    Matrix m = w.matrix();
    kernels::parallel::rotate_pairs(m, pairs, angles);
    w = OrthogonalMatrix::trusted(std::move(m));
    return;
  }
  // General case: Omega = sum_i theta_i H_i, W <- W expm(Omega).
  Matrix omega = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const ColumnPair p = coord_pair(coords[k], d);
    omega(p.j0(), p.l0()) += thetas[k] * kInvSqrt2;
    omega(p.l0(), p.j0()) -= thetas[k] * kInvSqrt2;
  }
  const auto nd = static_cast<std::uint64_t>(d);
  flops::add(flops::gemm(nd, nd, nd));
  w = OrthogonalMatrix::trusted(w.matrix() * matrix_expm(omega));
}

OrthogonalMatrix apply_block(const OrthogonalMatrix& w, std::span<const CoordIndex> coords,
                             std::span<const double> thetas, bool disjoint) {
  OrthogonalMatrix out = w;
  apply_block_inplace(out, coords, thetas, disjoint);
  return out;
}

// ---------------------------------------------------------------------------
// Update kernels

void sgd_update(Matrix& x, const Matrix& grad, double alpha) {
  if (x.rows() != grad.rows() || x.cols() != grad.cols()) {
    throw std::invalid_argument("sgd_update: shape mismatch");
  }
  x.noalias() -= alpha * grad;
  flops::add(2 * static_cast<std::uint64_t>(x.size()));
}

void srgd_update_w(OrthogonalMatrix& w, const Matrix& eucl_grad, double alpha) {
  const TangentVector g = tangent_project(w, eucl_grad);
  w = exp_map(w, TangentVector::trusted(w, -alpha * g.value()));
}

CoordinateStep srcd_update_w(OrthogonalMatrix& w, const Matrix& eucl_grad, double alpha,
                             const SelectionRule& rule, Rng& rng) {
  CoordinateStep step;
  const int d = w.dim();
  const std::int64_t D = manifold_dim(d);
  switch (rule.kind) {
    case SelectionRule::Kind::uniform: {
      const CoordIndex idx = select_uniform(rng, D);
      step.coords.push_back(idx);
      step.thetas.push_back(partial_derivative(w, eucl_grad, idx));
      break;
    }
    case SelectionRule::Kind::gauss_southwell: {
      const Vector v = all_partials(w, eucl_grad);
      // The argmax would silently skip NaN entries.
      if (!v.allFinite()) throw NumericError("srcd: non-finite partial derivative");
      const CoordIndex idx = select_gauss_southwell({v.data(), static_cast<std::size_t>(v.size())});
      step.coords.push_back(idx);
      step.thetas.push_back(v(idx.offset()));
      break;
    }
    case SelectionRule::Kind::block_gs: {
      const Vector v = all_partials(w, eucl_grad);
      if (!v.allFinite()) throw NumericError("srcd: non-finite partial derivative");
      step.coords = select_block_gs({v.data(), static_cast<std::size_t>(v.size())},
                                    rule.block_size(D), rule.disjoint, d);
      for (CoordIndex c : step.coords) step.thetas.push_back(v(c.offset()));
      break;
    }
  }
  for (double t : step.thetas) {
    if (!std::isfinite(t)) throw NumericError("srcd: non-finite partial derivative");
  }
  if (step.coords.size() == 1) {
    givens_update_inplace(w, step.coords[0], -alpha * step.thetas[0]);
  } else {
    std::vector<double> scaled(step.thetas);
    for (double& t : scaled) t *= -alpha;
    apply_block_inplace(w, step.coords, scaled, rule.disjoint);
  }
  return step;
}

// ---------------------------------------------------------------------------
// Optimizer configuration and steps

OptimizerConfig optimizer_from_name(const std::string& name, StepSchedule schedule) {
  OptimizerConfig cfg{OptimizerKind::srcd, schedule, SelectionRule{}, 1000};
  if (name == "sgd") {
    cfg.kind = OptimizerKind::sgd;
  } else if (name == "srgd") {
    cfg.kind = OptimizerKind::srgd;
  } else if (name == "srcd-u") {
    cfg.rule.kind = SelectionRule::Kind::uniform;
  } else if (name == "srcd-gs") {
    cfg.rule.kind = SelectionRule::Kind::gauss_southwell;
  } else if (name == "srcd-block-gs") {
    cfg.rule.kind = SelectionRule::Kind::block_gs;
  } else {
    throw ConfigError("unknown optimizer '" + name +
                      "' (expected sgd, srgd, srcd-u, srcd-gs or srcd-block-gs)");
  }
  return cfg;
}

std::string optimizer_name(const OptimizerConfig& cfg) {
  switch (cfg.kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::srgd: return "srgd";
    case OptimizerKind::srcd: break;
  }
  switch (cfg.rule.kind) {
    case SelectionRule::Kind::uniform: return "srcd-u";
    case SelectionRule::Kind::gauss_southwell: return "srcd-gs";
    case SelectionRule::Kind::block_gs: return "srcd-block-gs";
  }
  return "srcd";
}

OptimizerState::OptimizerState(RnnParams p, OptimizerConfig cfg, std::uint64_t seed)
    : params(std::move(p)), config(std::move(cfg)), k(0), rng(derive_seed(seed, streams::select)) {}

namespace {

void check_finite(const Grads& g) {
  if (!g.all_finite()) throw NumericError("optimizer: non-finite gradient encountered");
}

void update_unconstrained(RnnParams& p, const Grads& g, double alpha) {
  sgd_update(p.w_in, g.w_in, alpha);
  sgd_update(p.w_out, g.w_out, alpha);
  p.b_out.noalias() -= alpha * g.b_out;
  p.b_mod.noalias() -= alpha * g.b_mod;
  flops::add(2 * static_cast<std::uint64_t>(g.b_out.size() + g.b_mod.size()));
}

}  // namespace

StepInfo sgd_step(OptimizerState& state, const Grads& grads) {
  check_finite(grads);
  const double alpha = state.config.schedule(state.k);
  update_unconstrained(state.params, grads, alpha);
  // Baseline without the orthogonality constraint: W leaves O(d).
  Matrix w = state.params.w.matrix();
  sgd_update(w, grads.w, alpha);
  state.params.w = OrthogonalMatrix::trusted(std::move(w));
  ++state.k;
  return StepInfo{alpha, {}};
}

StepInfo srgd_step(OptimizerState& state, const Grads& grads) {
  check_finite(grads);
  const double alpha = state.config.schedule(state.k);
  update_unconstrained(state.params, grads, alpha);
  srgd_update_w(state.params.w, grads.w, alpha);
  ++state.k;
  if (state.config.reorth_every > 0 && state.k % state.config.reorth_every == 0) {
    state.params.w = reorthogonalize(state.params.w.matrix());
  }
  return StepInfo{alpha, {}};
}

// Scanning all of grads.w would cost O(d^2) per step, so only the partials
// actually read are checked. srcd_update_w throws before touching W.
StepInfo srcd_step(OptimizerState& state, const Grads& grads) {
  if (!grads.unconstrained_finite()) throw NumericError("optimizer: non-finite gradient encountered");
  const double alpha = state.config.schedule(state.k);
  StepInfo info{alpha, srcd_update_w(state.params.w, grads.w, alpha, state.config.rule, state.rng)};
  update_unconstrained(state.params, grads, alpha);
  ++state.k;
  return info;
}

StepInfo optimizer_step(OptimizerState& state, const Grads& grads) {
  switch (state.config.kind) {
    case OptimizerKind::sgd: return sgd_step(state, grads);
    case OptimizerKind::srgd: return srgd_step(state, grads);
    case OptimizerKind::srcd: return srcd_step(state, grads);
  }
  throw std::logic_error("optimizer_step: unknown kind");
}

}  // namespace orcd
