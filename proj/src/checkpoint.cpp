#include "orcd/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace orcd {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("checkpoint: truncated stream");
  return v;
}

template <class Derived>
void put_block(std::ostream& os, const Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(os, m(r, c));
}

Matrix get_block(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = get<double>(is);
  return m;
}

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  const auto& p = ckpt.params;
  p.validate();
  const auto dims = p.dims();
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint8_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, ckpt.seed);
  put<std::int32_t>(os, dims.d);
  put<std::int32_t>(os, dims.d_in);
  put<std::int32_t>(os, dims.d_out);
  put_block(os, p.w_in);
  put_block(os, p.w.matrix());
  put_block(os, p.w_out);
  put_block(os, p.b_out.transpose());
  put_block(os, p.b_mod.transpose());
  if (!os) throw IoError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& is) {
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || !std::equal(magic.begin(), magic.end(), kCheckpointMagic)) {
    throw IoError("checkpoint: bad magic header");
  }
  const auto version = get<std::uint8_t>(is);
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto seed = get<std::uint64_t>(is);
  const auto d = get<std::int32_t>(is);
  const auto d_in = get<std::int32_t>(is);
  const auto d_out = get<std::int32_t>(is);
  if (d <= 0 || d_in <= 0 || d_out <= 0) throw IoError("checkpoint: invalid dimensions");
  Matrix w_in = get_block(is, d, d_in);
  Matrix w = get_block(is, d, d);
  Matrix w_out = get_block(is, d_out, d);
  Vector b_out = get_block(is, 1, d_out).transpose();
  Vector b_mod = get_block(is, 1, d).transpose();
  return Checkpoint{seed, RnnParams{std::move(w_in), OrthogonalMatrix(std::move(w)), std::move(w_out),
                                    std::move(b_out), std::move(b_mod)}};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("checkpoint: cannot open " + path.string() + " for writing");
  write_checkpoint(os, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace orcd
