#pragma once

// Geometry of the orthogonal group O(d) with the embedded (Frobenius) metric.
//
// Tangent coordinates follow the column-pair numbering
//   i = sum_{k=1}^{j-1} (d - k) + (l - j),   1 <= j < l <= d,
// so i = 1 is the pair (1, 2) and i = D = d(d-1)/2 is the pair (d-1, d).
// Both CoordIndex and ColumnPair are 1-based to keep that numbering intact;
// use ColumnPair::j0()/l0() when indexing Eigen storage.

#include "orcd/types.hpp"

#include <cstdint>
#include <span>

namespace orcd {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;

// D = d(d-1)/2
constexpr std::int64_t manifold_dim(int d) noexcept {
  return static_cast<std::int64_t>(d) * (d - 1) / 2;
}

struct ColumnPair {
  int j = 1;
  int l = 2;

  int j0() const noexcept { return j - 1; }
  int l0() const noexcept { return l - 1; }
  bool shares_column(const ColumnPair& o) const noexcept {
    return j == o.j || j == o.l || l == o.j || l == o.l;
  }
  friend bool operator==(const ColumnPair&, const ColumnPair&) = default;
};

class CoordIndex {
public:
  constexpr CoordIndex() = default;
  constexpr explicit CoordIndex(std::int64_t i) noexcept : i_(i) {}
  constexpr std::int64_t value() const noexcept { return i_; }
  // 0-based position inside a D-vector of partials.
  constexpr std::int64_t offset() const noexcept { return i_ - 1; }
  friend constexpr bool operator==(CoordIndex, CoordIndex) = default;
  friend constexpr auto operator<=>(CoordIndex, CoordIndex) = default;

private:
  std::int64_t i_ = 1;
};

CoordIndex coord_index(int j, int l, int d);
ColumnPair coord_pair(CoordIndex i, int d);
inline CoordIndex coord_index(ColumnPair p, int d) { return coord_index(p.j, p.l, d); }

// H_{j,l} = (e_j e_l^T - e_l e_j^T) / sqrt(2), stored as its two nonzeros.
struct SkewBasisElement {
  ColumnPair pair;
  int dim = 2;
  double upper() const noexcept { return kInvSqrt2; }   // entry (j, l)
  double lower() const noexcept { return -kInvSqrt2; }  // entry (l, j)
  Matrix dense() const;
};

SkewBasisElement skew_basis(int j, int l, int d);

class OrthogonalMatrix {
public:
  static constexpr double kTolerance = 1e-8;

  // Throws std::invalid_argument unless ||W^T W - I||_F <= kTolerance and
  // | |det W| - 1 | <= 1e-6.
  explicit OrthogonalMatrix(Matrix w);

  static OrthogonalMatrix identity(int d);
  // Skips the O(d^3) validation; for results of exactly orthogonal operations.
  static OrthogonalMatrix trusted(Matrix w);

  int dim() const noexcept { return static_cast<int>(w_.rows()); }
  const Matrix& matrix() const noexcept { return w_; }
  double operator()(int r, int c) const { return w_(r, c); }

  // ||W^T W - I||_F
  double orthogonality_error() const;

  // Right-multiplies by the planar rotation [[c, s], [-s, c]] acting on
  // columns (j, l). Touches only those two columns; 6d flops.
  void rotate_columns(ColumnPair p, double angle);

  // Identity of the point a tangent vector was built at. Changes whenever the
  // matrix changes; copies share it.
  std::uint64_t stamp() const noexcept { return stamp_; }

private:
  struct Trusted {};
  OrthogonalMatrix(Matrix w, Trusted) noexcept;

  Matrix w_;
  std::uint64_t stamp_;
};

class TangentVector {
public:
  static constexpr double kSkewTolerance = 1e-12;

  // Validates ||W^T xi + (W^T xi)^T||_F <= tol * max(1, ||xi||_F).
  static TangentVector checked(const OrthogonalMatrix& base, Matrix value,
                               double tol = kSkewTolerance);
  static TangentVector trusted(const OrthogonalMatrix& base, Matrix value) noexcept;

  const Matrix& value() const noexcept { return value_; }
  std::uint64_t base_stamp() const noexcept { return base_; }
  int dim() const noexcept { return static_cast<int>(value_.rows()); }

private:
  TangentVector(std::uint64_t base, Matrix value) noexcept
      : value_(std::move(value)), base_(base) {}

  Matrix value_;
  std::uint64_t base_;
};

struct TangentCoordinate {
  CoordIndex index;
  double theta = 0.0;
};

// theta * eta_i = theta * W H_{j,l}; only columns j and l are nonzero.
TangentVector densify(const OrthogonalMatrix& w, const TangentCoordinate& c);

// W (W^T M - M^T W) / 2
TangentVector tangent_project(const OrthogonalMatrix& w, const Matrix& m);

// <P(G), eta_i> = ((W^T G)_{jl} - (W^T G)_{lj}) / sqrt(2), from columns j, l only.
double partial_derivative(const OrthogonalMatrix& w, const Matrix& eucl_grad, CoordIndex idx);

// All D partials via A = W^T G.
Vector all_partials(const OrthogonalMatrix& w, const Matrix& eucl_grad);

double metric(const TangentVector& xi, const TangentVector& zeta);
double norm(const TangentVector& xi);

// Scaling-and-squaring matrix exponential for skew-symmetric input.
Matrix matrix_expm(const Matrix& a);

// W expm(W^T xi)
OrthogonalMatrix exp_map(const OrthogonalMatrix& w, const TangentVector& xi);

// Exp_W(theta * eta_i), i.e. a rotation by theta / sqrt(2) of columns (j, l).
OrthogonalMatrix givens_update(const OrthogonalMatrix& w, CoordIndex idx, double theta);
void givens_update_inplace(OrthogonalMatrix& w, CoordIndex idx, double theta);

// QR-based projection back onto O(d), R's diagonal made positive.
OrthogonalMatrix reorthogonalize(const Matrix& w);

}  // namespace orcd
