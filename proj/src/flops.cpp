#include "orcd/flops.hpp"

namespace orcd::flops {

std::uint64_t& counter() noexcept {
  thread_local std::uint64_t c = 0;
  return c;
}

}  // namespace orcd::flops
