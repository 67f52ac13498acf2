#pragma once

// Copying-memory task. An input row is
//   a_1 ... a_K | blank x L | start | blank x (K-1)
// and the target row is blank x (L+K) followed by a_1 ... a_K.
//
// Class encoding: letters are 0..N-1, blank is N, start is N+1. Inputs are
// one-hot over N+2 classes, outputs range over N+1 classes.

#include "orcd/rnn.hpp"
#include "orcd/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>

namespace orcd {

struct CopyTaskConfig {
  int alphabet = 9;       // N
  int copy_length = 10;   // K
  int blank_gap = 1000;   // L
  int batch_size = 128;   // B
  std::uint64_t seed = 0;
  bool recall_mask_only = false;

  int total_length() const noexcept { return blank_gap + 2 * copy_length; }
  int blank_class() const noexcept { return alphabet; }
  int start_class() const noexcept { return alphabet + 1; }
  int input_classes() const noexcept { return alphabet + 2; }
  int output_classes() const noexcept { return alphabet + 1; }
  // Throws ConfigError unless N >= 2, K >= 1, L >= 0, B >= 1.
  void validate() const;
};

// N=9, K=10, L=1000, B=128 (pair with d=190).
CopyTaskConfig paper_copy_preset();
// N=9, K=5, L=100, B=32 (pair with d=64).
CopyTaskConfig desk_copy_preset();

struct CopyTaskBatch {
  IndexMatrix inputs;   // B x T
  IndexMatrix targets;  // B x T
  MaskMatrix mask;      // B x T
};

CopyTaskBatch generate_batch(const CopyTaskConfig& cfg, std::uint64_t seed);

// One-hot encodes the inputs for the network.
SequenceBatch to_sequence_batch(const CopyTaskConfig& cfg, const CopyTaskBatch& batch);

// K ln(N) / (L + 2K): loss of the best predictor that ignores its input.
double baseline_loss(const CopyTaskConfig& cfg);

// Fraction of recall-window positions where argmax(logits) hits the target.
double accuracy(const CopyTaskConfig& cfg, std::span<const Matrix> logits, const CopyTaskBatch& batch);

// One row per sequence: T input classes then T target classes, no header.
void write_batch_csv(std::ostream& os, const CopyTaskBatch& batch);

}  // namespace orcd
