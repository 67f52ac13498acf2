#include "orcd/rnn.hpp"

#include "orcd/flops.hpp"
#include "orcd/kernels.hpp"
#include "orcd/rng.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace orcd {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_inputs(const RnnParams& p, std::span<const Matrix> inputs, int batch) {
  const auto dims = p.dims();
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    require(inputs[t].rows() == dims.d_in && inputs[t].cols() == batch,
            "rnn: input " + std::to_string(t) + " has shape " + std::to_string(inputs[t].rows()) +
                "x" + std::to_string(inputs[t].cols()));
  }
}

void activate(Activation act, const Matrix& pre, const Vector& b, Matrix& out) {
  if (act == Activation::identity) {
    out = pre;
  } else {
    kernels::parallel::modrelu(pre, b, out);
  }
}

// Writes softmax(y) - onehot(target) into `dy` for column b and returns the
// cross-entropy of that column.
double softmax_xent_column(const Matrix& y, Eigen::Index b, int target, Matrix& dy, double scale) {
  const auto col = y.col(b);
  const double m = col.maxCoeff();
  double z = 0.0;
  for (Eigen::Index r = 0; r < col.size(); ++r) z += std::exp(col(r) - m);
  const double lse = m + std::log(z);
  for (Eigen::Index r = 0; r < col.size(); ++r) dy(r, b) = scale * std::exp(col(r) - lse);
  dy(target, b) -= scale;
  return lse - col(target);
}

void check_targets(const IndexMatrix& targets, const MaskMatrix& mask, int steps, int batch,
                   int classes) {
  require(targets.rows() == batch && targets.cols() == steps, "loss: targets must be B x T");
  require(mask.rows() == batch && mask.cols() == steps, "loss: mask must be B x T");
  for (Eigen::Index b = 0; b < targets.rows(); ++b) {
    for (Eigen::Index t = 0; t < targets.cols(); ++t) {
      if (!mask(b, t)) continue;
      const int c = targets(b, t);
      if (c < 0 || c >= classes) {
        throw std::out_of_range("loss: target class " + std::to_string(c) + " outside [0, " +
                                std::to_string(classes) + ")");
      }
    }
  }
}

}  // namespace

void RnnParams::validate() const {
  const int d = w.dim();
  require(w_in.rows() == d, "RnnParams: W_in must have d rows");
  require(w_out.cols() == d, "RnnParams: W_out must have d columns");
  require(b_out.size() == w_out.rows(), "RnnParams: b_out must have d_out entries");
  require(b_mod.size() == d, "RnnParams: b_mod must have d entries");
}

Grads Grads::zeros(const NetworkDims& dims) {
  return Grads{Matrix::Zero(dims.d, dims.d_in), Matrix::Zero(dims.d, dims.d),
               Matrix::Zero(dims.d_out, dims.d), Vector::Zero(dims.d_out), Vector::Zero(dims.d)};
}

bool Grads::all_finite() const { return w.allFinite() && unconstrained_finite(); }

bool Grads::unconstrained_finite() const {
  return w_in.allFinite() && w_out.allFinite() && b_out.allFinite() && b_mod.allFinite();
}

Vector modrelu(const Vector& x, const Vector& b) {
  require(x.size() == b.size(), "modrelu: length mismatch");
  Matrix out;
  kernels::serial::modrelu(x, b, out);
  return out.col(0);
}

ForwardTrace forward(const RnnParams& params, std::span<const Matrix> inputs, const Matrix* h0,
                     Activation act) {
  params.validate();
  const auto dims = params.dims();
  const int batch = inputs.empty() ? (h0 ? static_cast<int>(h0->cols()) : 1)
                                   : static_cast<int>(inputs.front().cols());
  check_inputs(params, inputs, batch);
  Matrix h = h0 ? *h0 : Matrix::Zero(dims.d, batch);
  require(h.rows() == dims.d && h.cols() == batch, "forward: h0 must be d x B");

  ForwardTrace trace;
  trace.preact.reserve(inputs.size());
  trace.hidden.reserve(inputs.size());
  trace.logits.reserve(inputs.size());
  const Matrix& w = params.w.matrix();
  for (const Matrix& x : inputs) {
    Matrix pre = params.w_in * x;
    pre.noalias() += w * h;
    activate(act, pre, params.b_mod, h);
    Matrix y = params.w_out * h;
    y.colwise() += params.b_out;
    trace.preact.push_back(std::move(pre));
    trace.hidden.push_back(h);
    trace.logits.push_back(std::move(y));
  }
  return trace;
}

double loss(std::span<const Matrix> logits, const IndexMatrix& targets, const MaskMatrix& mask) {
  const int steps = static_cast<int>(logits.size());
  const int batch = steps ? static_cast<int>(logits.front().cols()) : static_cast<int>(targets.rows());
  const int classes = steps ? static_cast<int>(logits.front().rows()) : 0;
  check_targets(targets, mask, steps, batch, classes);
  const auto count = mask.count();
  if (count == 0) return 0.0;
  double total = 0.0;
  for (int t = 0; t < steps; ++t) {
    const Matrix& y = logits[t];
    for (Eigen::Index b = 0; b < y.cols(); ++b) {
      if (!mask(b, t)) continue;
      const auto col = y.col(b);
      const double m = col.maxCoeff();
      const double lse = m + std::log((col.array() - m).exp().sum());
      total += lse - col(targets(b, t));
    }
  }
  return total / static_cast<double>(count);
}

LossAndGrads backward(const RnnParams& params, const SequenceBatch& batch, Activation act) {
  params.validate();
  const auto dims = params.dims();
  const int steps = batch.steps();
  const int nb = batch.batch();
  check_inputs(params, batch.inputs, nb);
  check_targets(batch.targets, batch.mask, steps, nb, dims.d_out);

  LossAndGrads out{0.0, Grads::zeros(dims)};
  const auto count = batch.mask.count();
  if (count == 0 || steps == 0) return out;
  const double scale = 1.0 / static_cast<double>(count);
  const Matrix& w = params.w.matrix();

  // Forward: keep pre-activations and loss gradients w.r.t. logits; hidden
  // states are recomputed from pre-activations on the way back.
  std::vector<Matrix> preact;
  std::vector<Matrix> dlogits;
  preact.reserve(steps);
  dlogits.reserve(steps);
  Matrix h = Matrix::Zero(dims.d, nb);
  double total = 0.0;
  for (int t = 0; t < steps; ++t) {
    Matrix pre = params.w_in * batch.inputs[t];
    pre.noalias() += w * h;
    activate(act, pre, params.b_mod, h);
    Matrix y = params.w_out * h;
    y.colwise() += params.b_out;
    Matrix dy = Matrix::Zero(dims.d_out, nb);
    for (Eigen::Index b = 0; b < nb; ++b) {
      if (!batch.mask(b, t)) continue;
      total += softmax_xent_column(y, b, batch.targets(b, t), dy, scale);
    }
    out.grads.w_out.noalias() += dy * h.transpose();
    out.grads.b_out += dy.rowwise().sum();
    preact.push_back(std::move(pre));
    dlogits.push_back(std::move(dy));
  }
  out.loss = total * scale;

  // Backward through time.
  Matrix dh_next = Matrix::Zero(dims.d, nb);
  Matrix h_prev;
  kernels::ModReluGrad mg;
  for (int t = steps - 1; t >= 0; --t) {
    Matrix dh = params.w_out.transpose() * dlogits[t];
    dh += dh_next;
    if (act == Activation::identity) {
      mg.dpre = dh;
      mg.dbias.setZero(dims.d);
    } else {
      kernels::parallel::modrelu_backward(preact[t], params.b_mod, dh, mg);
    }
    out.grads.b_mod += mg.dbias;
    out.grads.w_in.noalias() += mg.dpre * batch.inputs[t].transpose();
    if (t > 0) {
      activate(act, preact[t - 1], params.b_mod, h_prev);
      out.grads.w.noalias() += mg.dpre * h_prev.transpose();
    }
    dh_next.noalias() = w.transpose() * mg.dpre;
  }
  const auto per_step = static_cast<std::uint64_t>(nb) *
                        (4ULL * dims.d * dims.d_in + 6ULL * dims.d * dims.d + 6ULL * dims.d_out * dims.d);
  flops::add(per_step * static_cast<std::uint64_t>(steps));
  return out;
}

OrthogonalMatrix cayley_block_transform(std::span<const double> s) {
  const int d = static_cast<int>(2 * s.size());
  require(d > 0, "cayley_block_transform: need at least one block");
  Matrix a = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < s.size(); ++k) {
    a(2 * k, 2 * k + 1) = s[k];
    a(2 * k + 1, 2 * k) = -s[k];
  }
  const Matrix id = Matrix::Identity(d, d);
  Matrix w = (id + a).partialPivLu().solve(id - a);
  return OrthogonalMatrix(std::move(w));
}

OrthogonalMatrix cayley_block_init(int d, std::uint64_t seed) {
  if (d <= 0 || d % 2 != 0) {
    throw std::invalid_argument("cayley_block_init: d must be positive and even, got " +
                                std::to_string(d));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-std::numbers::pi, std::numbers::pi);
  std::vector<double> s(static_cast<std::size_t>(d / 2));
  for (double& v : s) v = unif(rng);
  return cayley_block_transform(s);
}

RnnParams init_params(const NetworkDims& dims, std::uint64_t seed) {
  require(dims.d > 0 && dims.d_in > 0 && dims.d_out > 0, "init_params: dimensions must be positive");
  // Independent streams so each block is reproducible on its own.
  const std::array<std::uint64_t, 3> sub{derive_seed(seed, 0x11), derive_seed(seed, 0x12),
                                         derive_seed(seed, 0x13)};

  OrthogonalMatrix w = cayley_block_init(dims.d, seed);
  std::mt19937_64 rng(sub[0]);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto he = [&](int rows, int cols, int fan_in) {
    const double std_dev = std::sqrt(2.0 / fan_in);
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = std_dev * normal(rng);
    return m;
  };
  Matrix w_in = he(dims.d, dims.d_in, dims.d_in);
  rng.seed(sub[1]);
  Matrix w_out = he(dims.d_out, dims.d, dims.d);
  std::mt19937_64 brng(sub[2]);
  std::uniform_real_distribution<double> bias(-0.01, 0.01);
  Vector b_mod(dims.d);
  for (Eigen::Index k = 0; k < b_mod.size(); ++k) b_mod(k) = bias(brng);
  return RnnParams{std::move(w_in), std::move(w), std::move(w_out), Vector::Zero(dims.d_out),
                   std::move(b_mod)};
}

}  // namespace orcd
