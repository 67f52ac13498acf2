#include "orcd/bench.hpp"

#include "orcd/flops.hpp"
#include "orcd/optim.hpp"
#include "orcd/rng.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

namespace orcd {

const char* phase_name(BenchPhase p) noexcept {
  return p == BenchPhase::update_only ? "update-only" : "backward+update";
}

Quantiles summarize(std::vector<double> s) {
  if (s.empty()) return {};
  std::sort(s.begin(), s.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
  };
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  return {q(0.5), q(0.75) - q(0.25), mean};
}

namespace {

Matrix small_gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1e-2);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = n(rng);
  return m;
}

}  // namespace

BenchRecord bench_update(const std::string& optimizer, int d, BenchPhase phase, const BenchOptions& opts) {
  if (d < 4) throw ConfigError("bench: d must be >= 4");
  if (opts.reps < 30 || opts.warmup < 5) throw ConfigError("bench: need >= 30 reps and >= 5 warmup reps");
  opts.task.validate();
  if (d % 2 != 0) throw ConfigError("bench: d must be even (Cayley initialization)");

  const NetworkDims dims{d, opts.task.input_classes(), opts.task.output_classes()};
  OptimizerState state(init_params(dims, derive_seed(opts.seed, streams::init)),
                       optimizer_from_name(optimizer, StepSchedule::fixed(2e-4)), opts.seed);

  // Fixed Euclidean gradients for the update-only phase; cost does not depend
  // on their values.
  Rng grng(derive_seed(opts.seed, streams::noise));
  Grads fixed{small_gaussian(d, dims.d_in, grng), small_gaussian(d, d, grng),
              small_gaussian(dims.d_out, d, grng), small_gaussian(dims.d_out, 1, grng).col(0),
              small_gaussian(d, 1, grng).col(0)};

  SequenceBatch batch;
  if (phase == BenchPhase::backward_update) {
    batch = to_sequence_batch(opts.task, generate_batch(opts.task, derive_seed(opts.seed, streams::data)));
  }

  BenchRecord rec;
  rec.d = d;
  rec.optimizer = optimizer;
  rec.phase = phase;
  rec.reps = opts.reps;

  // Flops of the W-update alone, measured on a scratch copy.
  {
    OrthogonalMatrix w = state.params.w;
    Rng r = state.rng;
    flops::Scope scope;
    switch (state.config.kind) {
      case OptimizerKind::sgd: {
        Matrix m = w.matrix();
        sgd_update(m, fixed.w, 2e-4);
        break;
      }
      case OptimizerKind::srgd: srgd_update_w(w, fixed.w, 2e-4); break;
      case OptimizerKind::srcd: srcd_update_w(w, fixed.w, 2e-4, state.config.rule, r); break;
    }
    rec.w_flops = scope.elapsed();
  }

  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(opts.reps));
  for (int rep = 0; rep < opts.warmup + opts.reps; ++rep) {
    flops::Scope scope;
    const auto t0 = std::chrono::steady_clock::now();
    if (phase == BenchPhase::update_only) {
      optimizer_step(state, fixed);
    } else {
      const LossAndGrads lg = backward(state.params, batch);
      optimizer_step(state, lg.grads);
    }
    const auto t1 = std::chrono::steady_clock::now();
    if (rep >= opts.warmup) {
      samples.push_back(std::chrono::duration<double>(t1 - t0).count());
      rec.flops = scope.elapsed();
    }
  }
  const Quantiles q = summarize(std::move(samples));
  rec.median_s = q.median;
  rec.iqr_s = q.iqr;
  rec.mean_s = q.mean;
  return rec;
}

}  // namespace orcd
