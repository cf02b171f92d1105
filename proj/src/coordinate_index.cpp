// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <bit>

#include "voxpipe/sparse_tensor.hpp"

namespace voxpipe {

namespace {

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

bool rows_equal(std::span<const Coord> a, std::span<const Coord> b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

CoordinateIndex::CoordinateIndex(const CoordinateList& coords) : coords_(&coords) {
  const std::size_t n = coords.size();
  const std::size_t capacity = std::bit_ceil(std::max<std::size_t>(16, 2 * n));
  slots_.assign(capacity, kNotFound);
  mask_ = capacity - 1;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = coords.row(i);
    std::uint64_t slot = hash_row(row) & mask_;
    while (true) {
      const std::int64_t occupant = slots_[slot];
      if (occupant == kNotFound) {
        slots_[slot] = static_cast<std::int64_t>(i);
        ++distinct_;
        break;
      }
      if (rows_equal(coords.row(static_cast<std::size_t>(occupant)), row)) {
        if (!first_duplicate_) first_duplicate_ = i;
        break;
      }
      slot = (slot + 1) & mask_;
    }
  }
}

std::uint64_t CoordinateIndex::hash_row(std::span<const Coord> row) const {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (Coord c : row) {
    h = mix64(h ^ static_cast<std::uint32_t>(c));
  }
  return h;
}

std::int64_t CoordinateIndex::find(std::span<const Coord> row) const {
  if (row.size() != coords_->row_width()) return kNotFound;
  std::uint64_t slot = hash_row(row) & mask_;
  while (true) {
    const std::int64_t occupant = slots_[slot];
    if (occupant == kNotFound) return kNotFound;
    if (rows_equal(coords_->row(static_cast<std::size_t>(occupant)), row)) return occupant;
    slot = (slot + 1) & mask_;
  }
}

}  // namespace voxpipe
