#pragma once

// Binary parameter checkpoint, little-endian:
//
//   offset  size  field
//   0       8     magic "ORCDCKPT"
//   8       1     version (= 1)
//   9       8     seed (uint64)
//   17      4     d (int32)
//   21      4     d_in (int32)
//   25      4     d_out (int32)
//   29      ...   float64 blocks, each row-major:
//                 W_in (d x d_in), W (d x d), W_out (d_out x d), b_out (d_out), b_mod (d)
//
// Loading re-validates orthogonality of W.

#include "orcd/rnn.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>

namespace orcd {

inline constexpr char kCheckpointMagic[8] = {'O', 'R', 'C', 'D', 'C', 'K', 'P', 'T'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint64_t seed = 0;
  RnnParams params;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace orcd
