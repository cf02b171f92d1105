// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace voxpipe {

using Coord = std::int32_t;

/// Row-major list of coordinates. Each row is (batch_index, x_1, ..., x_D).
class CoordinateList {
 public:
  CoordinateList() = default;
  explicit CoordinateList(int dim);
  CoordinateList(int dim, std::vector<Coord> rows);

  int dim() const { return dim_; }
  std::size_t row_width() const { return static_cast<std::size_t>(dim_) + 1; }
  std::size_t size() const { return dim_ < 1 ? 0 : data_.size() / row_width(); }
  bool empty() const { return size() == 0; }

  std::span<const Coord> row(std::size_t i) const {
    return {data_.data() + i * row_width(), row_width()};
  }
  Coord batch(std::size_t i) const { return data_[i * row_width()]; }
  std::span<const Coord> axes(std::size_t i) const {
    return {data_.data() + i * row_width() + 1, static_cast<std::size_t>(dim_)};
  }

  void push_back(std::span<const Coord> row);
  void reserve(std::size_t rows) { data_.reserve(rows * row_width()); }

  const std::vector<Coord>& data() const { return data_; }

  friend bool operator==(const CoordinateList&, const CoordinateList&) = default;

 private:
  int dim_ = 0;
  std::vector<Coord> data_;
};

/// Open-addressing hash index from a coordinate row to its position in a
/// CoordinateList. The list must outlive the index and must not be mutated.
class CoordinateIndex {
 public:
  static constexpr std::int64_t kNotFound = -1;

  explicit CoordinateIndex(const CoordinateList& coords);

  /// Row index of `row` (batch + axes), or kNotFound.
  std::int64_t find(std::span<const Coord> row) const;

  /// Index of the first row that repeats an earlier one, if any.
  std::optional<std::size_t> first_duplicate() const { return first_duplicate_; }

  std::size_t distinct() const { return distinct_; }

 private:
  std::uint64_t hash_row(std::span<const Coord> row) const;

  const CoordinateList* coords_;
  std::vector<std::int64_t> slots_;
  std::uint64_t mask_ = 0;
  std::size_t distinct_ = 0;
  std::optional<std::size_t> first_duplicate_;
};

/// Coordinate matrix plus feature matrix. Invariants are checked once at
/// construction; instances are immutable afterwards.
class SparseTensor {
 public:
  /// Empty tensor (N = 0).
  SparseTensor(int dim, int feature_width, std::vector<int> tensor_stride = {});

  /// Throws InputError if any invariant fails.
  SparseTensor(CoordinateList coords, std::vector<double> features, int feature_width,
               std::vector<int> tensor_stride = {});

  int dim() const { return coords_.dim(); }
  int feature_width() const { return feature_width_; }
  std::size_t size() const { return coords_.size(); }
  bool empty() const { return size() == 0; }
  const std::vector<int>& tensor_stride() const { return tensor_stride_; }

  const CoordinateList& coords() const { return coords_; }
  const std::vector<double>& features() const { return features_; }
  std::span<const double> feature(std::size_t row) const {
    return {features_.data() + row * static_cast<std::size_t>(feature_width_),
            static_cast<std::size_t>(feature_width_)};
  }

  friend bool operator==(const SparseTensor&, const SparseTensor&) = default;

 private:
  void validate() const;

  CoordinateList coords_;
  std::vector<double> features_;
  int feature_width_ = 0;
  std::vector<int> tensor_stride_;
};

struct PointCloud {
  int dim = 3;
  std::vector<double> points;                  // N x dim, world units
  std::optional<std::vector<double>> features;  // N x feature_width
  int feature_width = 0;
  int batch_index = 0;

  std::size_t size() const { return dim < 1 ? 0 : points.size() / static_cast<std::size_t>(dim); }
};

/// Quantizes points to voxel indices floor(p / voxel_size), clamped to the
/// grid. Colliding points are merged by averaging their features; without
/// features every voxel gets the occupancy feature 1.0.
SparseTensor voxelize(const PointCloud& cloud, double voxel_size, std::span<const int> resolution);

/// Keeps exactly ceil(keep_ratio * N) rows, chosen by a seeded PRNG, in
/// their original relative order.
SparseTensor dropout(const SparseTensor& t, double keep_ratio, std::uint64_t seed);

/// Concatenates tensors, rewriting each row's batch index to its input position.
SparseTensor batch(std::span<const SparseTensor> tensors);

/// Inverse of batch(): one tensor per batch index 0..max (rows keep order,
/// batch index reset to 0).
std::vector<SparseTensor> split_by_batch(const SparseTensor& t);

// Serialization. Binary layout is little-endian:
//   "VPST" | u32 version | u32 dim | u32 feature_width | u64 N |
//   i32 stride[dim] | i32 coords[N*(dim+1)] | f64 features[N*feature_width]
nlohmann::json to_json(const SparseTensor& t);
SparseTensor sparse_tensor_from_json(const nlohmann::json& j);
std::vector<std::uint8_t> to_binary(const SparseTensor& t);
SparseTensor sparse_tensor_from_binary(std::span<const std::uint8_t> bytes);
std::size_t binary_size(const SparseTensor& t);

}  // namespace voxpipe
