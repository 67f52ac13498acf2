#pragma once

// Experiment drivers behind the CLI subcommands. Each driver is a pure
// function of its config; the cmd_* wrappers add the output directory
// (config copy, version, machine metadata, CSVs, summary.json).
//
// CSV schemas (header row first):
//   trace.csv     k,alpha,loss,gnormsq,M_K
//   timings.csv   k,grad_s,update_s
//   sparsity.csv  iteration,frac95,frac99,norm,frac95_linear,frac99_linear
//   hist_init.csv / hist_final.csv   bin_lo,bin_hi,count
//   bench.csv     d,optimizer,phase,median_s,iqr_s,flops,mean_s,w_flops,reps

#include "orcd/analysis.hpp"
#include "orcd/bench.hpp"
#include "orcd/config.hpp"
#include "orcd/rnn.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace orcd {

struct TrainRecord {
  std::int64_t k = 0;
  double alpha = 0.0;
  double loss = 0.0;
  double gnorm_sq = 0.0;      // ||g_X||^2 + ||P_W(g_W)||^2 (Euclidean ||g_W||^2 for sgd)
  double gnorm_w_sq = 0.0;    // W part alone
  double partial_abs = 0.0;   // sqrt(sum theta_i^2) of the coordinates SRCD used
  double grad_seconds = 0.0;
  double update_seconds = 0.0;
};

struct TrainResult {
  std::vector<TrainRecord> records;
  RnnParams params;
  double final_loss = 0.0;  // loss on a held-out batch after training
  double accuracy = 0.0;
  double baseline = 0.0;
  double wall_seconds = 0.0;
};

using TrainObserver = std::function<void(const TrainRecord&, const RnnParams&)>;

// Copy-task training with the configured optimizer. Batch k is drawn from
// derive_seed(seed, data, k), so all optimizers see identical data.
TrainResult train(const ExperimentConfig& cfg, const TrainObserver& observer = {});

struct SparsitySnapshot {
  std::int64_t iteration = 0;
  SparsityProfile profile;
  Histogram hist;
};

// Mini-batch partials at initialization and after cfg.iterations steps.
std::vector<SparsitySnapshot> sparsity_experiment(const ExperimentConfig& cfg);
// Decade edges spanning the nonzero magnitudes of v (at least one decade).
std::vector<double> histogram_edges_for(std::span<const double> v);

struct ConvergenceSummary {
  std::vector<std::uint64_t> seeds;
  std::vector<ConvergenceTrace> traces;
  std::vector<double> final_gnorm_sq;
  std::vector<std::int64_t> checkpoints;   // K values
  std::vector<double> mean_m_at;           // mean over seeds of M_K at each checkpoint
};

// Runs SRCD-U on the synthetic problem for conv_seeds seeds (seed, seed+1, ...).
// Requires a Robbins-Monro schedule.
ConvergenceSummary convergence_experiment(const ExperimentConfig& cfg);

struct BenchSummary {
  std::vector<BenchRecord> records;
  std::vector<std::pair<std::string, double>> update_slopes;  // per optimizer
};

BenchSummary bench_experiment(const ExperimentConfig& cfg);

// CSV writers.
void write_trace_csv(std::ostream& os, const std::vector<TrainRecord>& records);
void write_trace_csv(std::ostream& os, const ConvergenceTrace& trace, std::span<const double> values);
void write_sparsity_csv(std::ostream& os, const std::vector<SparsitySnapshot>& snaps);
void write_hist_csv(std::ostream& os, const Histogram& h);
void write_bench_csv(std::ostream& os, const std::vector<BenchRecord>& records);

// Subcommands. Return the process exit code: 0 ok, 1 config, 2 numeric, 3 I/O.
// `raw_config` is the original config file text (copied verbatim if present).
int cmd_train(const ExperimentConfig& cfg, const std::string& raw_config);
int cmd_sparsity(const ExperimentConfig& cfg, const std::string& raw_config);
int cmd_convergence(const ExperimentConfig& cfg, const std::string& raw_config);
int cmd_bench(const ExperimentConfig& cfg, const std::string& raw_config);
int cmd_check(const ExperimentConfig& cfg, std::ostream& log);

// Default output directory: $ORCD_OUTPUT_ROOT (or ./runs) / <command>-<preset>-<optimizer>-seed<N>.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const std::string& command);

std::string version_string();

}  // namespace orcd
