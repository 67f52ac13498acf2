// Acceptance run: one PASS/FAIL line per numbered criterion, plus "info" lines
// that are reported but not scored. Exit status is the number of failures.
//
// ORCD_ACCEPT_FULL=1 runs the 500-iteration sparsity comparison at the
// paper-scale shape (about half an hour on one core) instead of desk scale.

#include "oracles.hpp"

#include "orcd/analysis.hpp"
#include "orcd/bench.hpp"
#include "orcd/config.hpp"
#include "orcd/copytask.hpp"
#include "orcd/experiments.hpp"
#include "orcd/kernels.hpp"
#include "orcd/manifold.hpp"
#include "orcd/optim.hpp"
#include "orcd/rnn.hpp"
#include "orcd/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

using namespace orcd;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), s);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

void info(const std::string& msg) {
  std::printf("info %s\n", msg.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// W expm(theta H_{j,l}) as the Taylor series sum_k W A^k / k!, 30 terms. The
// iterate is dense; A has two nonzeros, so each product touches two columns.
Matrix taylor_rotate(const Matrix& w, int j, int l, double theta) {
  const double a = theta / std::sqrt(2.0);  // A(j,l) = a, A(l,j) = -a
  Matrix term = w;
  Matrix sum = w;
  for (int k = 1; k <= 30; ++k) {
    Matrix next = Matrix::Zero(w.rows(), w.cols());
    // (T A)(:, l) = T(:, j) A(j, l); (T A)(:, j) = T(:, l) A(l, j).
    next.col(l - 1) = term.col(j - 1) * a / k;
    next.col(j - 1) = term.col(l - 1) * (-a) / k;
    term = std::move(next);
    sum += term;
  }
  return sum;
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  std::mt19937_64 rng(101);
  double worst = 0.0, worst_exp = 0.0;
  int n = 0;
  for (int d : {4, 25, 190}) {
    std::uniform_int_distribution<std::int64_t> pick(1, manifold_dim(d));
    std::uniform_real_distribution<double> th(-3.0, 3.0);
    OrthogonalMatrix w = OrthogonalMatrix::identity(d);
    for (int r = 0; r < 1000; ++r) {
      if (r % 10 == 0) w = OrthogonalMatrix(oracle::random_orthogonal(d, rng));
      const CoordIndex i(pick(rng));
      const double theta = th(rng);
      const ColumnPair p = coord_pair(i, d);
      const Matrix g = givens_update(w, i, theta).matrix();
      worst = std::max(worst, oracle::max_abs(g - taylor_rotate(w.matrix(), p.j, p.l, theta)));
      if (d < 190 || r % 20 == 0) {
        worst_exp = std::max(worst_exp, oracle::max_abs(g - exp_map(w, densify(w, {i, theta})).matrix()));
      }
      ++n;
    }
  }
  return {worst <= 1e-12 && worst_exp <= 1e-12,
          fmt("%d samples, max |givens - taylor| = %.2e, max |givens - exp_map| = %.2e (tol 1e-12)", n, worst,
              worst_exp)};
}

Outcome criterion2() {
  double ortho = 0.0;
  for (int d = 2; d <= 8; ++d) {
    const auto ps = oracle::pairs(d);
    std::vector<Matrix> h;
    for (auto [j, l] : ps) h.push_back(skew_basis(j, l, d).dense());
    for (std::size_t a = 0; a < h.size(); ++a)
      for (std::size_t b = 0; b < h.size(); ++b)
        ortho = std::max(ortho, std::abs(oracle::trace_inner(h[a], h[b]) - (a == b ? 1.0 : 0.0)));
  }
  std::mt19937_64 rng(102);
  double parseval = 0.0;
  for (int r = 0; r < 5; ++r) {
    const OrthogonalMatrix w(oracle::random_orthogonal(190, rng));
    const Matrix g = oracle::gaussian(190, 190, rng);
    const double a = all_partials(w, g).norm();
    const double b = tangent_project(w, g).value().norm();
    parseval = std::max(parseval, std::abs(a - b) / b);
  }
  return {ortho <= 1e-12 && parseval <= 1e-10,
          fmt("orthonormality err %.2e (d<=8, tol 1e-12); Parseval rel err %.2e at d=190 (tol 1e-10)", ortho,
              parseval)};
}

Outcome criterion3() {
  std::mt19937_64 rng(103);
  CopyTaskConfig task{3, 2, 4, 2, 0, false};  // T = 8, B = 2, d_in = 5, d_out = 4
  RnnParams p = init_params({4, task.input_classes(), task.output_classes()}, 17);
  // Larger modReLU biases and output bias so every branch is exercised.
  p.b_mod = oracle::gaussian(4, 1, rng, 0.3).col(0);
  p.b_out = oracle::gaussian(4, 1, rng, 0.3).col(0);
  const SequenceBatch batch = to_sequence_batch(task, generate_batch(task, 5));
  const LossAndGrads lg = backward(p, batch);
  auto f = [&](const RnnParams& q) { return loss(forward(q, batch.inputs).logits, batch.targets, batch.mask); };

  const double h = 1e-5;
  double worst = 0.0;
  int checked = 0;
  auto block = [&](auto&& perturb, const double* grad, Eigen::Index size) {
    std::uniform_int_distribution<Eigen::Index> pick(0, size - 1);
    for (int s = 0; s < 50; ++s) {
      const Eigen::Index i = pick(rng);
      const double fd = (f(perturb(i, h)) - f(perturb(i, -h))) / (2 * h);
      const double rel = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
      worst = std::max(worst, rel);
      ++checked;
    }
  };
  auto dense_block = [&](Matrix RnnParams::*m) {
    return [&, m](Eigen::Index i, double dh) {
      RnnParams q = p;
      (q.*m).data()[i] += dh;
      return q;
    };
  };
  auto vec_block = [&](Vector RnnParams::*v) {
    return [&, v](Eigen::Index i, double dh) {
      RnnParams q = p;
      (q.*v)(i) += dh;
      return q;
    };
  };
  block(dense_block(&RnnParams::w_in), lg.grads.w_in.data(), lg.grads.w_in.size());
  block(dense_block(&RnnParams::w_out), lg.grads.w_out.data(), lg.grads.w_out.size());
  block(vec_block(&RnnParams::b_out), lg.grads.b_out.data(), lg.grads.b_out.size());
  block(vec_block(&RnnParams::b_mod), lg.grads.b_mod.data(), lg.grads.b_mod.size());
  block(
      [&](Eigen::Index i, double dh) {
        RnnParams q = p;
        Matrix w = q.w.matrix();
        w.data()[i] += dh;
        q.w = OrthogonalMatrix::trusted(std::move(w));
        return q;
      },
      lg.grads.w.data(), lg.grads.w.size());
  return {worst <= 1e-5,
          fmt("%d entries over 5 blocks (50 draws each), max rel err %.2e (tol 1e-5)", checked, worst)};
}

Outcome criterion4() {
  const int d = 190;
  std::mt19937_64 grng(104);
  Rng sel(derive_seed(104, streams::select));
  OrthogonalMatrix w = cayley_block_init(d, 104);
  const SelectionRule uniform{SelectionRule::Kind::uniform};
  const SelectionRule gs{SelectionRule::Kind::gauss_southwell};
  std::normal_distribution<double> n;
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    Matrix g(d, d);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = n(grng);
    // Mostly uniform picks, every tenth one by Gauss-Southwell.
    srcd_update_w(w, g, 0.5, k % 10 == 9 ? gs : uniform, sel);
    if (k % 1000 == 999) worst = std::max(worst, w.orthogonality_error());
  }
  return {worst <= 1e-8, fmt("10^4 SRCD steps at d=190, max ||W^T W - I||_F = %.2e (tol 1e-8)", worst)};
}

// Mean over seeds of M_K at K = 100 and K = 1e5, and the final ||g||^2.
struct ConvStats {
  double m100 = 0, m1e5 = 0, worst_final = 0;
};

ConvStats run_convergence(double noise, double alpha0, double exponent, double offset) {
  ExperimentConfig cfg;
  cfg.schedule = "polynomial";
  cfg.alpha0 = alpha0;
  cfg.exponent = exponent;
  cfg.offset = offset;
  cfg.robbins_monro = true;
  cfg.iterations = 100000;
  cfg.conv_d = 16;
  cfg.noise_std = noise;
  cfg.conv_seeds = 5;
  const ConvergenceSummary s = convergence_experiment(cfg);
  ConvStats st;
  for (std::size_t c = 0; c < s.checkpoints.size(); ++c) {
    if (s.checkpoints[c] == 100) st.m100 = s.mean_m_at[c];
    if (s.checkpoints[c] == 100000) st.m1e5 = s.mean_m_at[c];
  }
  st.worst_final = *std::max_element(s.final_gnorm_sq.begin(), s.final_gnorm_sq.end());
  return st;
}

Outcome criterion5() {
  // alpha_k = alpha0 / (1 + k)^0.75 as stated; alpha0 = 1.
  const ConvStats noisy = run_convergence(0.1, 1.0, 0.75, 1.0);
  const double ratio = noisy.m1e5 / noisy.m100;
  // Noiseless descent with p = 1; a k0 = 1000 offset keeps early steps large.
  const ConvStats clean = run_convergence(0.0, 1.0, 1.0, 1000.0);
  const ConvStats alt = run_convergence(0.1, 1.0, 0.75, 1000.0);
  info(fmt("criterion 5 variant (not scored): noisy, alpha = 1/(1 + k/1000)^0.75 gives M_1e5/M_1e2 = %.3f",
           alt.m1e5 / alt.m100));
  return {ratio < 0.1 && clean.worst_final <= 1e-6,
          fmt("noisy M_1e2 = %.4g, M_1e5 = %.4g, ratio %.3f (need < 0.1); noiseless max final ||g||^2 = %.2e "
              "(need <= 1e-6)",
              noisy.m100, noisy.m1e5, ratio, clean.worst_final)};
}

Outcome criterion6() {
  ExperimentConfig paper;
  paper.apply_preset("paper");
  paper.iterations = 0;
  const double paper_init = sparsity_experiment(paper).front().profile.frac95;

  const bool full = [] {
    const char* e = std::getenv("ORCD_ACCEPT_FULL");
    return e && std::string(e) == "1";
  }();
  ExperimentConfig run;
  run.apply_preset(full ? "paper" : "desk");
  run.iterations = 500;
  const auto snaps = sparsity_experiment(run);
  const double init = snaps.front().profile.frac95, after = snaps.back().profile.frac95;
  const bool ordering = after > init;
  if (full) {
    return {paper_init <= 0.02 && ordering,
            fmt("paper scale: frac95 init %.4g (need <= 0.02), after 500 iters %.4g (need > init)", paper_init,
                after)};
  }
  return {paper_init <= 0.02 && init <= 0.05 && ordering,
          fmt("paper-scale frac95 at init %.4g (need <= 0.02); desk fallback for 500 iters: init %.4g (need <= "
              "0.05), after %.4g (need > init)",
              paper_init, init, after)};
}

Outcome criterion7() {
  const std::vector<std::string> names{"srgd", "srcd-block-gs", "srcd-gs", "srcd-u"};
  std::map<std::string, double> first100, all500;
  double initial = 0.0, lowest = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (const auto& name : names) {
      ExperimentConfig cfg;  // desk preset, fixed 2e-4, block fraction 0.005
      cfg.optimizer = name;
      cfg.seed = seed;
      cfg.iterations = 500;
      const TrainResult r = train(cfg);
      double s100 = 0, s500 = 0;
      for (std::size_t k = 0; k < r.records.size(); ++k) {
        if (k < 100) s100 += r.records[k].loss;
        s500 += r.records[k].loss;
        lowest = std::min(lowest, r.records[k].loss);
      }
      first100[name] += s100 / 100 / 3;
      all500[name] += s500 / 500 / 3;
      if (name == names.front()) initial += r.records.front().loss / 3;
    }
  }
  const double tol = 0.1 * (initial - lowest);
  const bool a = first100["srcd-gs"] < first100["srcd-u"];
  const bool b = all500["srgd"] <= all500["srcd-block-gs"] + tol;
  const bool c = all500["srcd-block-gs"] <= all500["srcd-gs"] + tol;
  return {a && b && c,
          fmt("mean loss 1-100: GS %.4f vs U %.4f; mean loss 1-500: SRGD %.4f, block-GS %.4f, GS %.4f (tol %.4f)",
              first100["srcd-gs"], first100["srcd-u"], all500["srgd"], all500["srcd-block-gs"], all500["srcd-gs"],
              tol)};
}

Outcome criterion8() {
  kernels::set_threads(1);
  BenchOptions opts;
  opts.task = paper_copy_preset();
  const std::vector<int> dims{64, 256, 1024};
  std::map<std::string, std::vector<double>> times;
  for (const char* name : {"srcd-u", "srcd-gs", "srgd", "sgd"})
    for (int d : dims) times[name].push_back(bench_update(name, d, BenchPhase::update_only, opts).median_s);
  const std::vector<double> xs(dims.begin(), dims.end());
  const double srcd = loglog_slope(xs, times["srcd-u"]);
  const double srgd = loglog_slope(xs, times["srgd"]);
  info(fmt("criterion 8 slopes (not scored): srcd-gs %.2f (needs all D partials, W^T G is cubic), sgd %.2f",
           loglog_slope(xs, times["srcd-gs"]), loglog_slope(xs, times["sgd"])));
  info(fmt("criterion 8 d=1024 update-only medians: srcd-u %.3g s, srgd %.3g s", times["srcd-u"].back(),
           times["srgd"].back()));

  double worst_ratio = 0.0;
  std::ostringstream ratios;
  for (const char* name : {"sgd", "srgd", "srcd-gs", "srcd-u"}) {
    const double u = bench_update(name, 190, BenchPhase::update_only, opts).median_s;
    const double bu = bench_update(name, 190, BenchPhase::backward_update, opts).median_s;
    worst_ratio = std::max(worst_ratio, u / bu);
    ratios << ' ' << name << '=' << fmt("%.2e", u / bu);
  }
  return {srcd <= 1.7 && srgd >= 2.3 && worst_ratio <= 0.1,
          fmt("update-only slope srcd-u %.2f (need <= 1.7), srgd %.2f (need >= 2.3); update/backward+update at "
              "d=190:%s (need <= 0.1)",
              srcd, srgd, ratios.str().c_str())};
}

Outcome criterion9() {
  // Memoryless predictor: blank for the first L + K steps, uniform letters after.
  const CopyTaskConfig base = paper_copy_preset();
  double total = 0.0;
  const int chunks = 10;
  for (int c = 0; c < chunks; ++c) {
    CopyTaskConfig cfg = base;
    cfg.batch_size = 1000;
    const CopyTaskBatch b = generate_batch(cfg, 900 + c);
    std::vector<Matrix> logits;
    const int T = cfg.total_length();
    for (int t = 0; t < T; ++t) {
      Matrix y = Matrix::Zero(cfg.output_classes(), cfg.batch_size);
      y.row(cfg.blank_class()).setConstant(t < cfg.blank_gap + cfg.copy_length ? 200.0 : -200.0);
      logits.push_back(std::move(y));
    }
    total += loss(logits, b.targets, b.mask) / chunks;
  }
  const double gap = std::abs(total - baseline_loss(base));

  std::mt19937_64 rng(109);
  int bad = 0;
  for (int r = 0; r < 1000; ++r) {
    CopyTaskConfig c{2 + static_cast<int>(rng() % 12), 1 + static_cast<int>(rng() % 12), static_cast<int>(rng() % 60),
                     1 + static_cast<int>(rng() % 8), 0, false};
    const CopyTaskBatch b = generate_batch(c, rng());
    const int K = c.copy_length, L = c.blank_gap, N = c.alphabet, T = L + 2 * K;
    bool ok = b.inputs.cols() == T && b.targets.cols() == T;
    for (int s = 0; ok && s < c.batch_size; ++s) {
      for (int t = 0; t < T; ++t) {
        const int in = b.inputs(s, t), tg = b.targets(s, t);
        if (t < K) ok = ok && in >= 0 && in < N;
        else if (t == K + L) ok = ok && in == N + 1;
        else ok = ok && in == N;
        if (t < L + K) ok = ok && tg == N;
        else ok = ok && tg == b.inputs(s, t - L - K);
      }
    }
    bad += !ok;
  }
  return {gap <= 1e-3 && bad == 0,
          fmt("empirical memoryless loss %.6f vs closed form %.6f (|diff| %.1e, tol 1e-3) over 10^4 sequences; "
              "%d/1000 random configs violate the layout",
              total, baseline_loss(base), gap, bad)};
}

}  // namespace

int main() {
  kernels::set_threads(1);
  report(1, "givens_update equals exp_map", criterion1);
  report(2, "basis orthonormality and Parseval", criterion2);
  report(3, "BPTT finite-difference check", criterion3);
  report(4, "orthogonality drift without re-orthogonalization", criterion4);
  report(5, "weighted gradient average on the synthetic problem", criterion5);
  report(6, "gradient sparsity at init and after training", criterion6);
  report(7, "optimizer ordering on the copying task", criterion7);
  report(8, "update cost scaling", criterion8);
  report(9, "copy-task baseline and layout", criterion9);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures;
}
