#pragma once

// Single-layer recurrent network
//   h(t+1) = modrelu(W_in x(t+1) + W h(t), b_mod)
//   y(t+1) = W_out h(t+1) + b_out
// with softmax cross-entropy and exact backpropagation through time.
// Batches are processed column-wise: every per-step quantity is a (size x B)
// matrix whose column b belongs to sequence b.

#include "orcd/manifold.hpp"
#include "orcd/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace orcd {

struct NetworkDims {
  int d = 0;
  int d_in = 0;
  int d_out = 0;
  friend bool operator==(const NetworkDims&, const NetworkDims&) = default;
};

struct RnnParams {
  Matrix w_in;             // d x d_in
  OrthogonalMatrix w;      // d x d
  Matrix w_out;            // d_out x d
  Vector b_out;            // d_out
  Vector b_mod;            // d

  NetworkDims dims() const noexcept {
    return {w.dim(), static_cast<int>(w_in.cols()), static_cast<int>(w_out.rows())};
  }
  // Throws std::invalid_argument on inconsistent shapes.
  void validate() const;
};

// Euclidean gradients, same shapes as RnnParams. `w` is NOT projected.
struct Grads {
  Matrix w_in;
  Matrix w;
  Matrix w_out;
  Vector b_out;
  Vector b_mod;

  static Grads zeros(const NetworkDims& dims);
  bool all_finite() const;
  // Every block except w.
  bool unconstrained_finite() const;
};

// inputs[t] is d_in x B; targets and mask are B x T.
struct SequenceBatch {
  std::vector<Matrix> inputs;
  IndexMatrix targets;
  MaskMatrix mask;

  int steps() const noexcept { return static_cast<int>(inputs.size()); }
  int batch() const noexcept { return inputs.empty() ? 0 : static_cast<int>(inputs.front().cols()); }
};

enum class Activation { modrelu, identity };

struct ForwardTrace {
  std::vector<Matrix> preact;  // T entries, d x B
  std::vector<Matrix> hidden;  // T entries, d x B
  std::vector<Matrix> logits;  // T entries, d_out x B
};

struct LossAndGrads {
  double loss = 0.0;
  Grads grads;
};

// sign(x) max(|x| + b, 0); zero at x = 0.
Vector modrelu(const Vector& x, const Vector& b);

// h0 defaults to zeros (d x B).
ForwardTrace forward(const RnnParams& params, std::span<const Matrix> inputs,
                     const Matrix* h0 = nullptr, Activation act = Activation::modrelu);

// Mean softmax cross-entropy over the masked (b, t) entries. Zero when the
// mask is empty.
double loss(std::span<const Matrix> logits, const IndexMatrix& targets, const MaskMatrix& mask);

LossAndGrads backward(const RnnParams& params, const SequenceBatch& batch,
                      Activation act = Activation::modrelu);

// (I + A)^{-1} (I - A) for block-diagonal A with blocks [[0, s_k], [-s_k, 0]].
OrthogonalMatrix cayley_block_transform(std::span<const double> s);
// s_k ~ U[-pi, pi]; d must be even.
OrthogonalMatrix cayley_block_init(int d, std::uint64_t seed);

// Cayley-initialized W, He-normal W_in and W_out, b_mod ~ U[-0.01, 0.01],
// b_out = 0.
RnnParams init_params(const NetworkDims& dims, std::uint64_t seed);

}  // namespace orcd
