// `orcd check`: a fast invariant suite over the library, runnable on any
// machine. The unit and acceptance tests cover the same ground in more depth.

#include "orcd/experiments.hpp"

#include "orcd/copytask.hpp"
#include "orcd/kernels.hpp"
#include "orcd/manifold.hpp"
#include "orcd/optim.hpp"
#include "orcd/rng.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <random>

namespace orcd {

namespace {

Matrix gaussian(int r, int c, Rng& rng) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = n(rng);
  return m;
}

OrthogonalMatrix random_orthogonal(int d, Rng& rng) {
  return reorthogonalize(Eigen::HouseholderQR<Matrix>(gaussian(d, d, rng)).householderQ() * Matrix::Identity(d, d));
}

// Plain Taylor series with many terms, only for small arguments.
Matrix taylor_expm(const Matrix& a) {
  Matrix term = Matrix::Identity(a.rows(), a.cols());
  Matrix sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = term * a / k;
    sum += term;
  }
  return sum;
}

}  // namespace

int cmd_check(const ExperimentConfig& cfg, std::ostream& log) {
  Rng rng(derive_seed(cfg.seed, streams::problem));
  int failures = 0;
  auto run = [&](const char* name, const std::function<double()>& err, double tol) {
    double e = 0.0;
    bool ok = false;
    try {
      e = err();
      ok = std::isfinite(e) && e <= tol;
    } catch (const std::exception& ex) {
      log << "  error: " << ex.what() << '\n';
    }
    log << (ok ? "ok   " : "FAIL ") << name << "  (err " << e << ", tol " << tol << ")\n";
    if (!ok) ++failures;
  };

  run("coord_index/coord_pair round trip", [&] {
    double bad = 0;
    for (int d = 2; d <= 30; ++d)
      for (std::int64_t i = 1; i <= manifold_dim(d); ++i)
        bad += coord_index(coord_pair(CoordIndex(i), d), d).value() != i;
    return bad;
  }, 0.0);

  run("basis orthonormality (d=6)", [&] {
    const int d = 6;
    const std::int64_t D = manifold_dim(d);
    double e = 0;
    for (std::int64_t a = 1; a <= D; ++a)
      for (std::int64_t b = 1; b <= D; ++b) {
        const auto pa = coord_pair(CoordIndex(a), d), pb = coord_pair(CoordIndex(b), d);
        const double ip = (skew_basis(pa.j, pa.l, d).dense().array() * skew_basis(pb.j, pb.l, d).dense().array()).sum();
        e = std::max(e, std::abs(ip - (a == b ? 1.0 : 0.0)));
      }
    return e;
  }, 1e-12);

  run("Parseval (d=40)", [&] {
    const auto w = random_orthogonal(40, rng);
    const Matrix g = gaussian(40, 40, rng);
    const double a = all_partials(w, g).norm(), b = tangent_project(w, g).value().norm();
    return std::abs(a - b) / b;
  }, 1e-10);

  run("givens_update == exp_map (d=25)", [&] {
    const int d = 25;
    double e = 0;
    std::uniform_int_distribution<std::int64_t> pick(1, manifold_dim(d));
    std::uniform_real_distribution<double> th(-2.0, 2.0);
    for (int r = 0; r < 50; ++r) {
      const auto w = random_orthogonal(d, rng);
      const TangentCoordinate c{CoordIndex(pick(rng)), th(rng)};
      const Matrix oracle = w.matrix() * taylor_expm(w.matrix().transpose() * densify(w, c).value());
      e = std::max(e, (givens_update(w, c.index, c.theta).matrix() - oracle).cwiseAbs().maxCoeff());
    }
    return e;
  }, 1e-12);

  run("SRCD drift, 1e4 Givens updates (d=64)", [&] {
    OrthogonalMatrix w = OrthogonalMatrix::identity(64);
    for (int k = 0; k < 10000; ++k) {
      const std::int64_t i = select_uniform(rng, manifold_dim(64)).value();
      givens_update_inplace(w, CoordIndex(i), std::normal_distribution<double>(0.0, 1.0)(rng));
    }
    return w.orthogonality_error();
  }, 1e-8);

  run("serial vs parallel kernels", [&] {
    const Matrix a = gaussian(33, 33, rng);
    std::vector<double> s(static_cast<std::size_t>(manifold_dim(33))), p(s.size());
    kernels::serial::skew_partials(a, s);
    kernels::parallel::skew_partials(a, p);
    double e = 0;
    for (std::size_t i = 0; i < s.size(); ++i) e = std::max(e, std::abs(s[i] - p[i]));
    return e;
  }, 0.0);

  run("BPTT vs central differences (d=4, T=8, B=2)", [&] {
    CopyTaskConfig task{3, 2, 4, 2, 0, false};
    RnnParams p = init_params({4, task.input_classes(), task.output_classes()}, 7);
    const SequenceBatch batch = to_sequence_batch(task, generate_batch(task, 11));
    const LossAndGrads lg = backward(p, batch);
    const double h = 1e-5;
    double e = 0;
    for (Eigen::Index i = 0; i < p.w_out.size(); ++i) {
      const double keep = p.w_out.data()[i];
      p.w_out.data()[i] = keep + h;
      const double fp = loss(forward(p, batch.inputs).logits, batch.targets, batch.mask);
      p.w_out.data()[i] = keep - h;
      const double fm = loss(forward(p, batch.inputs).logits, batch.targets, batch.mask);
      p.w_out.data()[i] = keep;
      const double fd = (fp - fm) / (2 * h);
      e = std::max(e, std::abs(fd - lg.grads.w_out.data()[i]) / std::max(1e-3, std::abs(fd)));
    }
    return e;
  }, 1e-5);

  run("baseline loss closed form (K=10, L=1000, N=9)", [&] {
    CopyTaskConfig t = paper_copy_preset();
    return std::abs(baseline_loss(t) - 10.0 * std::log(9.0) / 1020.0);
  }, 1e-15);

  log << (failures == 0 ? "all checks passed\n" : "some checks FAILED\n");
  return failures == 0 ? 0 : 2;
}

}  // namespace orcd
