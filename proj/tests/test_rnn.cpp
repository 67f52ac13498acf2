#include "oracles.hpp"

#include "orcd/checkpoint.hpp"
#include "orcd/copytask.hpp"
#include "orcd/rnn.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace orcd;

namespace {

RnnParams tiny_params(std::mt19937_64& rng, int d, int d_in, int d_out) {
  return RnnParams{oracle::gaussian(d, d_in, rng), OrthogonalMatrix(oracle::random_orthogonal(d, rng)),
                   oracle::gaussian(d_out, d, rng), oracle::gaussian(d_out, 1, rng).col(0),
                   oracle::gaussian(d, 1, rng, 0.3).col(0)};
}

// One sequence at a time, scalar loops only.
std::vector<Matrix> naive_logits(const RnnParams& p, const std::vector<Matrix>& inputs) {
  const int d = p.w.dim(), B = static_cast<int>(inputs[0].cols());
  const Matrix& w = p.w.matrix();
  std::vector<Matrix> out(inputs.size(), Matrix(p.w_out.rows(), B));
  for (int b = 0; b < B; ++b) {
    std::vector<double> h(d, 0.0), nh(d);
    for (std::size_t t = 0; t < inputs.size(); ++t) {
      for (int i = 0; i < d; ++i) {
        double z = 0;
        for (int k = 0; k < p.w_in.cols(); ++k) z += p.w_in(i, k) * inputs[t](k, b);
        for (int k = 0; k < d; ++k) z += w(i, k) * h[k];
        const double mag = std::max(std::abs(z) + p.b_mod(i), 0.0);
        nh[i] = z > 0 ? mag : (z < 0 ? -mag : 0.0);
      }
      h = nh;
      for (int o = 0; o < p.w_out.rows(); ++o) {
        double y = p.b_out(o);
        for (int k = 0; k < d; ++k) y += p.w_out(o, k) * h[k];
        out[t](o, b) = y;
      }
    }
  }
  return out;
}

double naive_loss(const std::vector<Matrix>& logits, const IndexMatrix& targets, const MaskMatrix& mask) {
  double total = 0;
  int n = 0;
  for (std::size_t t = 0; t < logits.size(); ++t)
    for (int b = 0; b < logits[t].cols(); ++b) {
      if (!mask(b, static_cast<int>(t))) continue;
      double z = 0;
      for (int c = 0; c < logits[t].rows(); ++c) z += std::exp(logits[t](c, b));
      total += -std::log(std::exp(logits[t](targets(b, static_cast<int>(t)), b)) / z);
      ++n;
    }
  return n ? total / n : 0.0;
}

SequenceBatch tiny_batch(std::mt19937_64& rng) {
  // d_in = 5, d_out = 4, T = 8, B = 2.
  CopyTaskConfig task{3, 2, 4, 2, 0, false};
  SequenceBatch batch = to_sequence_batch(task, generate_batch(task, rng()));
  std::bernoulli_distribution keep(0.7);
  for (int b = 0; b < 2; ++b)
    for (int t = 0; t < 8; ++t) batch.mask(b, t) = keep(rng);
  batch.mask(0, 7) = true;
  return batch;
}

}  // namespace

TEST_CASE("modrelu") {
  Vector x(4), b(4);
  x << 1.0, -3.0, 0.0, 2.5;
  b << -2.0, 1.0, 1.0, 0.0;
  const Vector out = modrelu(x, b);
  CHECK(out(0) == 0.0);
  CHECK(out(1) == -4.0);
  CHECK(out(2) == 0.0);
  CHECK(out(3) == 2.5);
  std::mt19937_64 rng(1);
  const Vector r = oracle::gaussian(20, 1, rng).col(0);
  CHECK(modrelu(r, Vector::Zero(20)) == r);
}

TEST_CASE("forward") {
  std::mt19937_64 rng(31);
  SUBCASE("matches a naive scalar implementation") {
    const RnnParams p = tiny_params(rng, 4, 5, 4);
    std::vector<Matrix> inputs;
    for (int t = 0; t < 8; ++t) inputs.push_back(oracle::gaussian(5, 3, rng));
    const auto trace = forward(p, inputs);
    const auto ref = naive_logits(p, inputs);
    for (int t = 0; t < 8; ++t) CHECK(oracle::max_abs(trace.logits[t] - ref[t]) <= 1e-12);
    for (int t = 0; t < 8; ++t) CHECK(trace.hidden[t] == [&] {
      Matrix h(4, 3);
      for (int b = 0; b < 3; ++b) h.col(b) = modrelu(trace.preact[t].col(b), p.b_mod);
      return h;
    }());
  }
  SUBCASE("T = 1 with identity weights") {
    RnnParams p{Matrix::Identity(3, 3), OrthogonalMatrix::identity(3), Matrix::Identity(3, 3),
                Vector::Zero(3), Vector::Zero(3)};
    const std::vector<Matrix> in{Matrix::Identity(3, 3).col(0)};
    CHECK(forward(p, in).hidden[0].col(0) == Vector::Unit(3, 0));
  }
  SUBCASE("orthogonal recurrence preserves the norm over 1000 steps") {
    RnnParams p = tiny_params(rng, 16, 2, 3);
    const Matrix h0 = oracle::gaussian(16, 1, rng);
    const std::vector<Matrix> zeros(1000, Matrix::Zero(2, 1));
    const auto trace = forward(p, zeros, &h0, Activation::identity);
    for (const auto& h : trace.hidden) CHECK(std::abs(h.norm() - h0.norm()) <= 1e-12 * h0.norm());
  }
  SUBCASE("rejects shape mismatches") {
    const RnnParams p = tiny_params(rng, 4, 5, 4);
    const std::vector<Matrix> bad{Matrix::Zero(6, 2)};
    CHECK_THROWS(forward(p, bad));
  }
}

TEST_CASE("loss") {
  std::mt19937_64 rng(32);
  const std::vector<Matrix> uniform(3, Matrix::Zero(7, 2));
  const IndexMatrix tg = IndexMatrix::Constant(2, 3, 4);
  const MaskMatrix all = MaskMatrix::Constant(2, 3, true);
  CHECK(loss(uniform, tg, all) == doctest::Approx(std::log(7.0)).epsilon(1e-14));

  std::vector<Matrix> sure(3, Matrix::Zero(7, 2));
  for (auto& m : sure) m.row(4).setConstant(50.0);
  CHECK(loss(sure, tg, all) <= 1e-20);

  std::vector<Matrix> lg;
  for (int t = 0; t < 5; ++t) lg.push_back(oracle::gaussian(6, 4, rng, 3.0));
  IndexMatrix targets(4, 5);
  MaskMatrix mask(4, 5);
  for (int b = 0; b < 4; ++b)
    for (int t = 0; t < 5; ++t) {
      targets(b, t) = static_cast<int>(rng() % 6);
      mask(b, t) = rng() % 3 != 0;
    }
  CHECK(std::abs(loss(lg, targets, mask) - naive_loss(lg, targets, mask)) <= 1e-12);

  CHECK(loss(lg, targets, MaskMatrix::Constant(4, 5, false)) == 0.0);
  targets(0, 0) = 6;
  mask(0, 0) = true;
  CHECK_THROWS(loss(lg, targets, mask));
}

TEST_CASE("backward agrees with central finite differences on every block") {
  std::mt19937_64 rng(33);
  RnnParams p = tiny_params(rng, 4, 5, 4);
  const SequenceBatch batch = tiny_batch(rng);
  const LossAndGrads lg = backward(p, batch);
  CHECK(std::abs(lg.loss - loss(forward(p, batch.inputs).logits, batch.targets, batch.mask)) <= 1e-14);

  const double h = 1e-5;
  auto f = [&](const RnnParams& q) { return loss(forward(q, batch.inputs).logits, batch.targets, batch.mask); };
  auto check_block = [&](auto get_param, const auto& grad, const char* name) {
    CAPTURE(name);
    const Eigen::Index n = grad.size();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min<std::size_t>(idx.size(), 50));
    for (Eigen::Index i : idx) {
      RnnParams plus = p, minus = p;
      get_param(plus)[i] += h;
      get_param(minus)[i] -= h;
      const double fd = (f(plus) - f(minus)) / (2 * h);
      const double an = grad.data()[i];
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-4});
      CHECK(rel <= 1e-5);
    }
  };
  check_block([](RnnParams& q) { return q.w_in.data(); }, lg.grads.w_in, "w_in");
  check_block([](RnnParams& q) { return q.w_out.data(); }, lg.grads.w_out, "w_out");
  check_block([](RnnParams& q) { return q.b_out.data(); }, lg.grads.b_out, "b_out");
  check_block([](RnnParams& q) { return q.b_mod.data(); }, lg.grads.b_mod, "b_mod");
  // W is perturbed off the manifold on purpose: the Euclidean gradient is wanted.
  const Eigen::Index nw = lg.grads.w.size();
  for (Eigen::Index i = 0; i < nw; ++i) {
    Matrix wp = p.w.matrix(), wm = p.w.matrix();
    wp.data()[i] += h;
    wm.data()[i] -= h;
    RnnParams plus = p, minus = p;
    plus.w = OrthogonalMatrix::trusted(wp);
    minus.w = OrthogonalMatrix::trusted(wm);
    const double fd = (f(plus) - f(minus)) / (2 * h);
    const double an = lg.grads.w.data()[i];
    CHECK(std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-4}) <= 1e-5);
  }
}

TEST_CASE("b_out gradient is the mean of softmax minus one-hot") {
  std::mt19937_64 rng(34);
  const RnnParams p = tiny_params(rng, 4, 5, 4);
  const SequenceBatch batch = tiny_batch(rng);
  const auto logits = forward(p, batch.inputs).logits;
  Vector expect = Vector::Zero(4);
  int n = 0;
  for (int t = 0; t < batch.steps(); ++t)
    for (int b = 0; b < batch.batch(); ++b) {
      if (!batch.mask(b, t)) continue;
      const Vector e = logits[t].col(b).array().exp();
      Vector s = e / e.sum();
      s(batch.targets(b, t)) -= 1.0;
      expect += s;
      ++n;
    }
  expect /= n;
  CHECK(oracle::max_abs(backward(p, batch).grads.b_out - expect) <= 1e-12);
}

TEST_CASE("empty mask gives zero gradients") {
  std::mt19937_64 rng(35);
  const RnnParams p = tiny_params(rng, 4, 5, 4);
  SequenceBatch batch = tiny_batch(rng);
  batch.mask.setConstant(false);
  const LossAndGrads lg = backward(p, batch);
  CHECK(lg.loss == 0.0);
  CHECK(lg.grads.w.norm() + lg.grads.w_in.norm() + lg.grads.w_out.norm() + lg.grads.b_out.norm() +
            lg.grads.b_mod.norm() ==
        0.0);
}

TEST_CASE("forward and backward are bitwise deterministic") {
  const RnnParams p = init_params({64, 11, 10}, 5);
  CopyTaskConfig task = desk_copy_preset();
  const SequenceBatch batch = to_sequence_batch(task, generate_batch(task, 3));
  const LossAndGrads a = backward(p, batch), b = backward(p, batch);
  CHECK(a.loss == b.loss);
  CHECK(a.grads.w == b.grads.w);
  CHECK(a.grads.w_in == b.grads.w_in);
}

TEST_CASE("Cayley block initialization") {
  const std::vector<double> zeros(3, 0.0);
  CHECK(oracle::max_abs(cayley_block_transform(zeros).matrix() - Matrix::Identity(6, 6)) == 0.0);

  for (double s : {1.0, -0.4, 2.7}) {
    const std::vector<double> one{s};
    Matrix expect(2, 2);
    expect << 1 - s * s, -2 * s, 2 * s, 1 - s * s;
    expect /= 1 + s * s;
    CHECK(oracle::max_abs(cayley_block_transform(one).matrix() - expect) <= 1e-15);
  }
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto w = cayley_block_init(190, seed);
    CHECK(w.orthogonality_error() <= 1e-12);
    CHECK(std::abs(w.matrix().determinant() - 1.0) <= 1e-9);
  }
  CHECK(cayley_block_init(8, 3).matrix() == cayley_block_init(8, 3).matrix());
  CHECK_THROWS(cayley_block_init(7, 0));
}

TEST_CASE("init_params") {
  const RnnParams p = init_params({64, 11, 10}, 9);
  CHECK(p.b_out == Vector::Zero(10));
  CHECK(p.b_mod.cwiseAbs().maxCoeff() <= 0.01);
  CHECK(p.w.orthogonality_error() <= 1e-12);
  const RnnParams q = init_params({64, 11, 10}, 9);
  CHECK(p.w_in == q.w_in);
  CHECK(p.w_out == q.w_out);
  CHECK(p.b_mod == q.b_mod);

  // He std for fan_in = 11, estimated from 10^4 draws.
  const RnnParams big = init_params({1000, 11, 2}, 4);
  const double mean = big.w_in.mean();
  const double sd = std::sqrt((big.w_in.array() - mean).square().sum() / (big.w_in.size() - 1));
  CHECK(std::abs(sd - std::sqrt(2.0 / 11)) <= 0.1 * std::sqrt(2.0 / 11));
}

TEST_CASE("checkpoint round trip") {
  const RnnParams p = init_params({8, 5, 4}, 2);
  std::stringstream ss;
  write_checkpoint(ss, Checkpoint{42, p});
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 8) == "ORCDCKPT");
  CHECK(bytes.size() == 29 + 8 * (8 * 5 + 64 + 4 * 8 + 4 + 8));
  const Checkpoint back = read_checkpoint(ss);
  CHECK(back.seed == 42);
  CHECK(back.params.w.matrix() == p.w.matrix());
  CHECK(back.params.w_in == p.w_in);
  CHECK(back.params.b_mod == p.b_mod);

  std::string corrupt = bytes;
  corrupt[0] = 'X';
  std::stringstream bad(corrupt);
  CHECK_THROWS_AS(read_checkpoint(bad), IoError);
  std::stringstream truncated(bytes.substr(0, 40));
  CHECK_THROWS_AS(read_checkpoint(truncated), IoError);
}
