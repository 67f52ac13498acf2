#include "orcd/synthetic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace orcd {

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = n(rng);
  return m;
}

// QR of a Gaussian matrix with det forced to +1, so it is reachable from I.
OrthogonalMatrix random_rotation(int d, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(d, d, rng));
  Matrix q = qr.householderQ();
  for (Eigen::Index k = 0; k < d; ++k) {
    if (qr.matrixQR()(k, k) < 0.0) q.col(k) = -q.col(k);
  }
  if (q.determinant() < 0.0) q.col(0) = -q.col(0);
  return OrthogonalMatrix(std::move(q));
}

void add_noise(Matrix& g, double std_dev, Rng& rng) {
  if (std_dev == 0.0) return;
  std::normal_distribution<double> n(0.0, std_dev);
  for (Eigen::Index c = 0; c < g.cols(); ++c)
    for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) += n(rng);
}

}  // namespace

SyntheticProblem SyntheticProblem::make(int d, int m, int n, double noise_std, std::uint64_t seed) {
  if (d < 2 || m < 1 || n < 1) throw ConfigError("synthetic problem: need d >= 2, m, n >= 1");
  if (!(noise_std >= 0.0)) throw ConfigError("synthetic problem: noise_std must be >= 0");
  Rng rng(derive_seed(seed, streams::problem));
  // Well-conditioned A: identity plus a moderate random perturbation.
  Matrix a = Matrix::Identity(d, d) + 0.3 / std::sqrt(static_cast<double>(d)) * gaussian(d, d, rng);
  OrthogonalMatrix q = random_rotation(d, rng);
  Matrix b = q.matrix() * a;
  Matrix c = gaussian(m, n, rng);
  const double smax = Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
  return SyntheticProblem{std::move(a), std::move(b), std::move(c), std::move(q), noise_std,
                          std::max(smax * smax, 1.0)};
}

double SyntheticProblem::value(const Matrix& x, const OrthogonalMatrix& w) const {
  return 0.5 * (w.matrix() * a - b).squaredNorm() + 0.5 * (x - c).squaredNorm();
}

Matrix SyntheticProblem::grad_x(const Matrix& x) const { return x - c; }

Matrix SyntheticProblem::eucl_grad_w(const OrthogonalMatrix& w) const {
  return (w.matrix() * a - b) * a.transpose();
}

double SyntheticProblem::gradient_norm_sq(const Matrix& x, const OrthogonalMatrix& w) const {
  const TangentVector gw = tangent_project(w, eucl_grad_w(w));
  return grad_x(x).squaredNorm() + gw.value().squaredNorm();
}

double SyntheticProblem::noise_bound_x() const noexcept {
  return noise_std * noise_std * static_cast<double>(c.size());
}

double SyntheticProblem::noise_bound_w() const noexcept {
  return noise_std * noise_std * static_cast<double>(a.size());
}

SyntheticRun run_srcd_synthetic(const SyntheticProblem& problem, const SyntheticRunConfig& cfg) {
  if (cfg.iterations < 1) throw ConfigError("synthetic run: iterations must be >= 1");
  const int d = problem.dim();
  SyntheticRun run{{}, Matrix::Zero(problem.c.rows(), problem.c.cols()), OrthogonalMatrix::identity(d),
                   0.0};
  run.trace.reserve(static_cast<std::size_t>(cfg.iterations) + 1);
  Rng select_rng(derive_seed(cfg.seed, streams::select));
  Rng noise_rng(derive_seed(cfg.seed, streams::noise));

  for (std::int64_t k = 0; k < cfg.iterations; ++k) {
    const double alpha = cfg.schedule(k);
    Matrix gx = problem.grad_x(run.x);
    Matrix gw = problem.eucl_grad_w(run.w);
    const double gnorm_sq = gx.squaredNorm() + tangent_project(run.w, gw).value().squaredNorm();
    run.trace.push_back({alpha, problem.value(run.x, run.w), gnorm_sq});
    if (!std::isfinite(gnorm_sq)) throw NumericError("synthetic run: non-finite gradient");

    add_noise(gx, problem.noise_std, noise_rng);
    add_noise(gw, problem.noise_std, noise_rng);
    sgd_update(run.x, gx, alpha);
    srcd_update_w(run.w, gw, alpha, cfg.rule, select_rng);
  }
  // The final iterate closes the trace, so it holds iterations + 1 entries.
  run.final_gnorm_sq = problem.gradient_norm_sq(run.x, run.w);
  run.trace.push_back({cfg.schedule(cfg.iterations), problem.value(run.x, run.w), run.final_gnorm_sq});
  return run;
}

}  // namespace orcd
