#pragma once

// Wall-clock cost of one optimizer update, with and without the preceding
// backpropagation. Only the step itself is inside the timed region; batch
// generation and gradient setup happen before the clock starts. Reps reuse
// the same evolving state (no fresh W per rep, which would time the
// initializer instead).

#include "orcd/copytask.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace orcd {

enum class BenchPhase { update_only, backward_update };

const char* phase_name(BenchPhase p) noexcept;

struct BenchOptions {
  int reps = 30;
  int warmup = 5;
  CopyTaskConfig task = desk_copy_preset();  // shapes d_in/d_out; batch for backward_update
  std::uint64_t seed = 0;
};

struct BenchRecord {
  int d = 0;
  std::string optimizer;
  BenchPhase phase = BenchPhase::update_only;
  double median_s = 0.0;
  double iqr_s = 0.0;
  double mean_s = 0.0;
  std::uint64_t flops = 0;    // instrumented flops of one timed region
  std::uint64_t w_flops = 0;  // instrumented flops of the W-update alone
  int reps = 0;
};

// Throws ConfigError for reps < 30, warmup < 5 or d < 4.
BenchRecord bench_update(const std::string& optimizer, int d, BenchPhase phase, const BenchOptions& opts);

struct Quantiles {
  double median = 0.0;
  double iqr = 0.0;
  double mean = 0.0;
};
Quantiles summarize(std::vector<double> samples);

}  // namespace orcd
