#pragma once

// Experiment configuration. File grammar:
//
//   file    := { line }
//   line    := blank | comment | section | entry
//   comment := ('#' | ';') text
//   section := '[' name ']'
//   entry   := key '=' value          (surrounding whitespace ignored)
//
// Key names are unique across sections; each key must appear under its own
// section (see ExperimentConfig::keys()). A preset line (`preset = paper` or
// `desk`) resets the task and model fields before later keys apply.

#include "orcd/copytask.hpp"
#include "orcd/optim.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace orcd {

struct ExperimentConfig {
  // [task]
  std::string preset = "desk";
  CopyTaskConfig task = desk_copy_preset();
  // [model]
  int d = 64;
  // [optimizer]
  std::string optimizer = "srcd-gs";
  std::string schedule = "fixed";  // fixed | polynomial
  double alpha0 = 2e-4;
  double exponent = 0.75;
  double offset = 1.0;
  bool robbins_monro = false;
  double block_fraction = 0.005;
  bool disjoint = true;
  std::int64_t reorth_every = 1000;
  // [run]
  std::int64_t iterations = 500;
  std::uint64_t seed = 0;
  std::string out;
  std::int64_t log_every = 50;
  // [convergence]
  int conv_d = 16;
  int conv_x_rows = 4;
  int conv_x_cols = 4;
  double noise_std = 0.1;
  int conv_seeds = 5;
  // [bench]
  std::vector<int> bench_dims{64, 256, 1024};
  std::vector<int> bench_backward_dims{190};
  std::vector<std::string> bench_optimizers{"sgd", "srgd", "srcd-gs", "srcd-u"};
  std::string bench_task = "paper";
  int bench_reps = 30;
  int bench_warmup = 5;

  struct KeyInfo {
    std::string section;
    std::string key;
    std::string help;
  };
  static const std::vector<KeyInfo>& keys();

  // Applies one key; throws ConfigError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  void apply_preset(const std::string& name);
  // Cross-field checks; throws ConfigError.
  void validate() const;

  StepSchedule make_schedule() const;
  OptimizerConfig make_optimizer() const;
  NetworkDims network_dims() const { return {d, task.input_classes(), task.output_classes()}; }

  // Canonical "[section]\nkey = value" rendering; parse(to_text()) round-trips.
  std::string to_text() const;
};

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

}  // namespace orcd
