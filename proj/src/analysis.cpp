#include "orcd/analysis.hpp"

#include "orcd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace orcd {

void NeumaierSum::add(double v) noexcept {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v)) {
    comp_ += (sum_ - t) + v;
  } else {
    comp_ += (v - t) + sum_;
  }
  sum_ = t;
}

double mass_fraction(const Vector& cumulative_mass, double p) {
  const auto D = cumulative_mass.size();
  if (D == 0) return 0.0;
  // Guard against the final entry landing a hair under p through rounding.
  const double target = p * cumulative_mass(D - 1);
  const auto* begin = cumulative_mass.data();
  const auto* it = std::lower_bound(begin, begin + D, target - 1e-15);
  const auto n = std::min<Eigen::Index>(static_cast<Eigen::Index>(it - begin) + 1, D);
  return static_cast<double>(n) / static_cast<double>(D);
}

namespace {

Vector cumulative(const Vector& sorted_mag, bool squared) {
  Vector cum(sorted_mag.size());
  NeumaierSum acc;
  for (Eigen::Index k = 0; k < sorted_mag.size(); ++k) {
    acc.add(squared ? sorted_mag(k) * sorted_mag(k) : sorted_mag(k));
    cum(k) = acc.value();
  }
  const double total = acc.value();
  if (total > 0.0) cum /= total;
  return cum;
}

}  // namespace

SparsityProfile sparsity_profile(std::span<const double> partials) {
  SparsityProfile prof;
  const auto D = static_cast<Eigen::Index>(partials.size());
  prof.sorted_magnitudes.resize(D);
  for (Eigen::Index k = 0; k < D; ++k) {
    if (!std::isfinite(partials[k])) throw std::invalid_argument("sparsity_profile: non-finite entry");
    prof.sorted_magnitudes(k) = std::abs(partials[k]);
  }
  std::sort(prof.sorted_magnitudes.data(), prof.sorted_magnitudes.data() + D, std::greater<>());
  prof.norm = prof.sorted_magnitudes.norm();
  if (D == 0 || prof.sorted_magnitudes(0) == 0.0) {
    prof.cumulative_mass = Vector::Zero(D);
    return prof;
  }
  prof.cumulative_mass = cumulative(prof.sorted_magnitudes, true);
  prof.frac95 = mass_fraction(prof.cumulative_mass, 0.95);
  prof.frac99 = mass_fraction(prof.cumulative_mass, 0.99);
  const Vector linear = cumulative(prof.sorted_magnitudes, false);
  prof.frac95_linear = mass_fraction(linear, 0.95);
  prof.frac99_linear = mass_fraction(linear, 0.99);
  return prof;
}

std::vector<double> decade_edges(int lo_exp, int hi_exp) {
  if (hi_exp < lo_exp) throw std::invalid_argument("decade_edges: hi < lo");
  std::vector<double> edges;
  for (int e = lo_exp; e <= hi_exp; ++e) edges.push_back(std::pow(10.0, e));
  return edges;
}

Histogram histogram(std::span<const double> values, std::span<const double> edges) {
  if (edges.empty() || !(edges.front() > 0.0)) {
    throw std::invalid_argument("histogram: edges must be positive");
  }
  Histogram h{{edges.begin(), edges.end()}, std::vector<std::int64_t>(edges.size() + 1, 0)};
  kernels::parallel::abs_histogram(values, h.edges, h.counts);
  return h;
}

std::vector<double> convergence_metric(std::span<const double> alpha, std::span<const double> gnorm_sq) {
  if (alpha.size() != gnorm_sq.size()) throw std::invalid_argument("convergence_metric: length mismatch");
  std::vector<double> m(alpha.size());
  NeumaierSum num;
  NeumaierSum den;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    num.add(alpha[k] * gnorm_sq[k]);
    den.add(alpha[k]);
    m[k] = num.value() / den.value();
  }
  return m;
}

ConvergenceTrace make_convergence_trace(std::vector<double> alpha, std::vector<double> gnorm_sq) {
  if (alpha.empty()) throw std::invalid_argument("convergence trace: empty");
  ConvergenceTrace t{std::move(alpha), std::move(gnorm_sq), {}};
  t.m_k = convergence_metric(t.alpha, t.gnorm_sq);
  return t;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 points");
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double lx = std::log(x[k]);
    const double ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace orcd
