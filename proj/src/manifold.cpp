#include "orcd/manifold.hpp"

#include "orcd/flops.hpp"
#include "orcd/kernels.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

namespace orcd {

namespace {

std::uint64_t next_stamp() noexcept {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

inline std::int64_t row_offset(std::int64_t j0, std::int64_t d) noexcept {
  return j0 * d - j0 * (j0 + 1) / 2;
}

void check_square(const Matrix& m, int d, const char* what) {
  if (m.rows() != d || m.cols() != d) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(d) + "x" +
                                std::to_string(d) + ", got " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()));
  }
}

}  // namespace

CoordIndex coord_index(int j, int l, int d) {
  if (j < 1 || j >= l || l > d) {
    throw std::out_of_range("coord_index: need 1 <= j < l <= d, got j=" + std::to_string(j) +
                            " l=" + std::to_string(l) + " d=" + std::to_string(d));
  }
  return CoordIndex(row_offset(j - 1, d) + (l - j));
}

ColumnPair coord_pair(CoordIndex idx, int d) {
  const std::int64_t D = manifold_dim(d);
  if (idx.value() < 1 || idx.value() > D) {
    throw std::out_of_range("coord_pair: index " + std::to_string(idx.value()) + " outside [1, " +
                            std::to_string(D) + "]");
  }
  // Rows counted from the bottom have lengths 1, 2, 3, ...
  const std::int64_t r = idx.offset();
  const std::int64_t m = D - 1 - r;
  auto t = static_cast<std::int64_t>((std::sqrt(8.0 * static_cast<double>(m) + 1.0) - 1.0) / 2.0);
  while (t * (t + 1) / 2 > m) --t;
  while ((t + 1) * (t + 2) / 2 <= m) ++t;
  const std::int64_t j0 = d - 2 - t;
  const std::int64_t l0 = j0 + 1 + (r - row_offset(j0, d));
  return ColumnPair{static_cast<int>(j0 + 1), static_cast<int>(l0 + 1)};
}

Matrix SkewBasisElement::dense() const {
  Matrix h = Matrix::Zero(dim, dim);
  h(pair.j0(), pair.l0()) = upper();
  h(pair.l0(), pair.j0()) = lower();
  return h;
}

SkewBasisElement skew_basis(int j, int l, int d) {
  coord_index(j, l, d);  // validates
  return SkewBasisElement{ColumnPair{j, l}, d};
}

// ---------------------------------------------------------------------------

OrthogonalMatrix::OrthogonalMatrix(Matrix w, Trusted) noexcept
    : w_(std::move(w)), stamp_(next_stamp()) {}

OrthogonalMatrix::OrthogonalMatrix(Matrix w) : w_(std::move(w)), stamp_(next_stamp()) {
  if (w_.rows() != w_.cols() || w_.rows() == 0) {
    throw std::invalid_argument("OrthogonalMatrix: matrix must be square and nonempty");
  }
  const double err = orthogonality_error();
  if (!(err <= kTolerance)) {
    throw std::invalid_argument("OrthogonalMatrix: ||W^T W - I||_F = " + std::to_string(err));
  }
  const double det = w_.determinant();
  if (!(std::abs(std::abs(det) - 1.0) <= 1e-6)) {
    throw std::invalid_argument("OrthogonalMatrix: |det W| = " + std::to_string(std::abs(det)));
  }
}

OrthogonalMatrix OrthogonalMatrix::identity(int d) {
  if (d < 1) throw std::invalid_argument("OrthogonalMatrix::identity: d < 1");
  return OrthogonalMatrix(Matrix::Identity(d, d), Trusted{});
}

OrthogonalMatrix OrthogonalMatrix::trusted(Matrix w) {
  if (w.rows() != w.cols()) throw std::invalid_argument("OrthogonalMatrix: matrix must be square");
  return OrthogonalMatrix(std::move(w), Trusted{});
}

double OrthogonalMatrix::orthogonality_error() const {
  return (w_.transpose() * w_ - Matrix::Identity(w_.rows(), w_.cols())).norm();
}

void OrthogonalMatrix::rotate_columns(ColumnPair p, double angle) {
  if (p.j < 1 || p.j >= p.l || p.l > dim()) throw std::out_of_range("rotate_columns: bad pair");
  kernels::rotate_column_pair(w_, p, angle);
  stamp_ = next_stamp();
}

// ---------------------------------------------------------------------------

TangentVector TangentVector::checked(const OrthogonalMatrix& base, Matrix value, double tol) {
  check_square(value, base.dim(), "TangentVector");
  const Matrix omega = base.matrix().transpose() * value;
  const double asym = (omega + omega.transpose()).norm();
  if (!(asym <= tol * std::max(1.0, value.norm()))) {
    throw std::invalid_argument("TangentVector: W^T xi is not skew-symmetric (residual " +
                                std::to_string(asym) + ")");
  }
  return TangentVector(base.stamp(), std::move(value));
}

TangentVector TangentVector::trusted(const OrthogonalMatrix& base, Matrix value) noexcept {
  return TangentVector(base.stamp(), std::move(value));
}

TangentVector densify(const OrthogonalMatrix& w, const TangentCoordinate& c) {
  const int d = w.dim();
  const ColumnPair p = coord_pair(c.index, d);
  Matrix v = Matrix::Zero(d, d);
  v.col(p.j0()) = -c.theta * kInvSqrt2 * w.matrix().col(p.l0());
  v.col(p.l0()) = c.theta * kInvSqrt2 * w.matrix().col(p.j0());
  return TangentVector::trusted(w, std::move(v));
}

TangentVector tangent_project(const OrthogonalMatrix& w, const Matrix& m) {
  check_square(m, w.dim(), "tangent_project");
  const Matrix a = w.matrix().transpose() * m;
  const Matrix omega = 0.5 * (a - a.transpose());
  const auto d = static_cast<std::uint64_t>(w.dim());
  flops::add(2 * flops::gemm(d, d, d));
  return TangentVector::trusted(w, w.matrix() * omega);
}

double partial_derivative(const OrthogonalMatrix& w, const Matrix& eucl_grad, CoordIndex idx) {
  check_square(eucl_grad, w.dim(), "partial_derivative");
  const ColumnPair p = coord_pair(idx, w.dim());
  const auto& m = w.matrix();
  const double a_jl = m.col(p.j0()).dot(eucl_grad.col(p.l0()));
  const double a_lj = m.col(p.l0()).dot(eucl_grad.col(p.j0()));
  flops::add(4 * static_cast<std::uint64_t>(w.dim()) + 2);
  return (a_jl - a_lj) * kInvSqrt2;
}

Vector all_partials(const OrthogonalMatrix& w, const Matrix& eucl_grad) {
  check_square(eucl_grad, w.dim(), "all_partials");
  const Matrix a = w.matrix().transpose() * eucl_grad;
  const auto d = static_cast<std::uint64_t>(w.dim());
  flops::add(flops::gemm(d, d, d));
  Vector v(manifold_dim(w.dim()));
  kernels::parallel::skew_partials(a, std::span<double>(v.data(), static_cast<std::size_t>(v.size())));
  return v;
}

double metric(const TangentVector& xi, const TangentVector& zeta) {
  if (xi.base_stamp() != zeta.base_stamp()) {
    throw std::invalid_argument("metric: tangent vectors live at different base points");
  }
  return xi.value().cwiseProduct(zeta.value()).sum();
}

double norm(const TangentVector& xi) { return std::sqrt(metric(xi, xi)); }

// ---------------------------------------------------------------------------

Matrix matrix_expm(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("matrix_expm: matrix must be square");
  const Eigen::Index n = a.rows();
  if (n == 0) return a;
  const double scale_ref = std::max(1.0, a.norm());
  if (!((a + a.transpose()).norm() <= 1e-10 * scale_ref)) {
    throw std::invalid_argument("matrix_expm: input is not skew-symmetric");
  }
  const auto nd = static_cast<std::uint64_t>(n);

  // Scale so ||A / 2^s||_1 <= 1/2, then a degree-15 Taylor polynomial
  // (truncation error below 1e-18) evaluated Paterson-Stockmeyer style.
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (norm1 > 0.5) s = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  const Matrix x = a / std::ldexp(1.0, s);

  static const auto coeff = [] {
    std::array<double, 16> c{};
    c[0] = 1.0;
    for (int k = 1; k < 16; ++k) c[k] = c[k - 1] / k;
    return c;
  }();

  const Matrix id = Matrix::Identity(n, n);
  const Matrix x2 = x * x;
  const Matrix x3 = x2 * x;
  const Matrix x4 = x2 * x2;
  auto block = [&](int k) -> Matrix {
    return coeff[4 * k] * id + coeff[4 * k + 1] * x + coeff[4 * k + 2] * x2 + coeff[4 * k + 3] * x3;
  };
  Matrix e = block(3);
  for (int k = 2; k >= 0; --k) e = (e * x4).eval() + block(k);
  for (int k = 0; k < s; ++k) e = (e * e).eval();
  flops::add(static_cast<std::uint64_t>(6 + s) * flops::gemm(nd, nd, nd));
  return e;
}

OrthogonalMatrix exp_map(const OrthogonalMatrix& w, const TangentVector& xi) {
  if (xi.base_stamp() != w.stamp()) {
    throw std::invalid_argument("exp_map: tangent vector is not based at W");
  }
  check_square(xi.value(), w.dim(), "exp_map");
  const Matrix omega_raw = w.matrix().transpose() * xi.value();
  const double asym = (omega_raw + omega_raw.transpose()).norm();
  if (!(asym <= 1e-10 * std::max(1.0, xi.value().norm()))) {
    throw std::invalid_argument("exp_map: xi is not tangent at W (residual " +
                                std::to_string(asym) + ")");
  }
  const Matrix omega = 0.5 * (omega_raw - omega_raw.transpose());
  const auto d = static_cast<std::uint64_t>(w.dim());
  flops::add(2 * flops::gemm(d, d, d));
  return OrthogonalMatrix::trusted(w.matrix() * matrix_expm(omega));
}

OrthogonalMatrix givens_update(const OrthogonalMatrix& w, CoordIndex idx, double theta) {
  OrthogonalMatrix out = w;
  givens_update_inplace(out, idx, theta);
  return out;
}

void givens_update_inplace(OrthogonalMatrix& w, CoordIndex idx, double theta) {
  // expm(theta H_{j,l}) rotates by theta / sqrt(2) since ||H_{j,l}||_F = 1.
  w.rotate_columns(coord_pair(idx, w.dim()), theta * kInvSqrt2);
}

OrthogonalMatrix reorthogonalize(const Matrix& w) {
  if (w.rows() != w.cols()) throw std::invalid_argument("reorthogonalize: matrix must be square");
  const double err = (w.transpose() * w - Matrix::Identity(w.rows(), w.cols())).norm();
  if (!(err <= 0.5)) {
    throw NumericError("reorthogonalize: ||W^T W - I||_F = " + std::to_string(err) +
                       " exceeds 0.5, upstream state is corrupted");
  }
  Eigen::HouseholderQR<Matrix> qr(w);
  Matrix q = qr.householderQ();
  const Matrix& r = qr.matrixQR();
  for (Eigen::Index k = 0; k < q.cols(); ++k) {
    if (r(k, k) < 0.0) q.col(k) = -q.col(k);
  }
  return OrthogonalMatrix::trusted(std::move(q));
}

}  // namespace orcd
