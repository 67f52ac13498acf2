#include "orcd/copytask.hpp"

#include <cmath>
#include <ostream>
#include <random>
#include <string>

namespace orcd {

void CopyTaskConfig::validate() const {
  if (alphabet < 2) throw ConfigError("copy task: alphabet size must be >= 2");
  if (copy_length < 1) throw ConfigError("copy task: copy length must be >= 1");
  if (blank_gap < 0) throw ConfigError("copy task: blank gap must be >= 0");
  if (batch_size < 1) throw ConfigError("copy task: batch size must be >= 1");
}

CopyTaskConfig paper_copy_preset() { return CopyTaskConfig{9, 10, 1000, 128, 0, false}; }

CopyTaskConfig desk_copy_preset() { return CopyTaskConfig{9, 5, 100, 32, 0, false}; }

CopyTaskBatch generate_batch(const CopyTaskConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int K = cfg.copy_length;
  const int L = cfg.blank_gap;
  const int T = cfg.total_length();
  const int B = cfg.batch_size;

  CopyTaskBatch batch;
  batch.inputs.setConstant(B, T, cfg.blank_class());
  batch.targets.setConstant(B, T, cfg.blank_class());
  batch.mask.setConstant(B, T, !cfg.recall_mask_only);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> letter(0, cfg.alphabet - 1);
  for (int b = 0; b < B; ++b) {
    for (int k = 0; k < K; ++k) {
      const int a = letter(rng);
      batch.inputs(b, k) = a;
      batch.targets(b, L + K + k) = a;
    }
    batch.inputs(b, K + L) = cfg.start_class();
  }
  if (cfg.recall_mask_only) batch.mask.rightCols(K).setConstant(true);
  return batch;
}

SequenceBatch to_sequence_batch(const CopyTaskConfig& cfg, const CopyTaskBatch& batch) {
  const auto B = batch.inputs.rows();
  const auto T = batch.inputs.cols();
  SequenceBatch seq;
  seq.inputs.reserve(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    Matrix x = Matrix::Zero(cfg.input_classes(), B);
    for (Eigen::Index b = 0; b < B; ++b) x(batch.inputs(b, t), b) = 1.0;
    seq.inputs.push_back(std::move(x));
  }
  seq.targets = batch.targets;
  seq.mask = batch.mask;
  return seq;
}

double baseline_loss(const CopyTaskConfig& cfg) {
  cfg.validate();
  const double ln_n = std::log(static_cast<double>(cfg.alphabet));
  if (cfg.recall_mask_only) return ln_n;
  return cfg.copy_length * ln_n / cfg.total_length();
}

double accuracy(const CopyTaskConfig& cfg, std::span<const Matrix> logits, const CopyTaskBatch& batch) {
  const auto B = batch.targets.rows();
  const auto T = batch.targets.cols();
  if (static_cast<Eigen::Index>(logits.size()) != T) {
    throw std::invalid_argument("accuracy: expected " + std::to_string(T) + " logit steps");
  }
  const int K = cfg.copy_length;
  std::int64_t hits = 0;
  for (Eigen::Index t = T - K; t < T; ++t) {
    const Matrix& y = logits[static_cast<std::size_t>(t)];
    if (y.cols() != B) throw std::invalid_argument("accuracy: batch size mismatch");
    for (Eigen::Index b = 0; b < B; ++b) {
      Eigen::Index arg = 0;
      y.col(b).maxCoeff(&arg);
      if (arg == batch.targets(b, t)) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(B * K);
}

void write_batch_csv(std::ostream& os, const CopyTaskBatch& batch) {
  for (Eigen::Index b = 0; b < batch.inputs.rows(); ++b) {
    for (Eigen::Index t = 0; t < batch.inputs.cols(); ++t) {
      if (t) os << ',';
      os << batch.inputs(b, t);
    }
    for (Eigen::Index t = 0; t < batch.targets.cols(); ++t) os << ',' << batch.targets(b, t);
    os << '\n';
  }
}

}  // namespace orcd
