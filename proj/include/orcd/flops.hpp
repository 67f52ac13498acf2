#pragma once

#include <cstdint>

namespace orcd::flops {

// Per-thread floating point operation counter. Kernels add their nominal
// operation count; benchmarks and tests read the delta through a Scope.
std::uint64_t& counter() noexcept;

inline void add(std::uint64_t n) noexcept { counter() += n; }

class Scope {
public:
  Scope() noexcept : start_(counter()) {}
  std::uint64_t elapsed() const noexcept { return counter() - start_; }

private:
  std::uint64_t start_;
};

// 2mnk for an (m x k) * (k x n) product.
constexpr std::uint64_t gemm(std::uint64_t m, std::uint64_t n, std::uint64_t k) noexcept {
  return 2 * m * n * k;
}

}  // namespace orcd::flops
