// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxpipe/sparse_tensor.hpp"

namespace voxpipe {

/// Set of kernel offsets. Hypercube and box shapes enumerate offsets in
/// lexicographic order with the last axis varying fastest.
class KernelShape {
 public:
  /// k^dim offsets, each axis in [-(k-1)/2, (k-1)/2]. k must be odd.
  static KernelShape hypercube(int dim, int k);
  /// Per-axis odd extents.
  static KernelShape box(std::vector<int> extents);
  /// Explicit offsets; must be distinct and all of width dim.
  static KernelShape custom(int dim, const std::vector<std::vector<Coord>>& offsets);

  int dim() const { return dim_; }
  std::size_t volume() const { return offsets_.size() / static_cast<std::size_t>(dim_); }
  /// Empty for custom shapes.
  const std::vector<int>& extents() const { return extents_; }
  std::span<const Coord> offset(std::size_t k) const {
    return {offsets_.data() + k * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  /// Position of `off` in the offset list, or -1.
  std::int64_t find(std::span<const Coord> off) const;

  friend bool operator==(const KernelShape&, const KernelShape&) = default;

 private:
  KernelShape(int dim, std::vector<int> extents, std::vector<Coord> offsets);

  int dim_ = 0;
  std::vector<int> extents_;
  std::vector<Coord> offsets_;
};

/// One out_channels x in_channels matrix per kernel offset, stored
/// contiguously as [offset][out][in].
struct ConvWeights {
  std::size_t volume = 0;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> values;

  static ConvWeights zeros(std::size_t volume, int in_channels, int out_channels);
  /// Entries drawn uniformly from [-scale, scale).
  static ConvWeights random(std::size_t volume, int in_channels, int out_channels,
                            std::uint64_t seed, double scale = 1.0);

  std::size_t matrix_size() const {
    return static_cast<std::size_t>(in_channels) * static_cast<std::size_t>(out_channels);
  }
  double& at(std::size_t k, int out, int in) {
    return values[k * matrix_size() + static_cast<std::size_t>(out) * in_channels + in];
  }
  double at(std::size_t k, int out, int in) const {
    return values[k * matrix_size() + static_cast<std::size_t>(out) * in_channels + in];
  }
  void check() const;

  friend bool operator==(const ConvWeights&, const ConvWeights&) = default;
};

/// Per-offset (input row, output row) pairs, stored as parallel arrays.
struct KernelMap {
  std::vector<std::vector<std::size_t>> in_rows;
  std::vector<std::vector<std::size_t>> out_rows;

  std::size_t volume() const { return in_rows.size(); }
  std::size_t pairs() const;
};

struct OutputCoordinates {
  CoordinateList coords;
  std::vector<int> tensor_stride;
};

/// Stride 1 keeps the input coordinates. Otherwise each coordinate is
/// floor-divided by (tensor_stride * stride) and scaled back; distinct
/// results are kept in first-seen order.
OutputCoordinates generate_output_coords(const SparseTensor& in, std::span<const int> stride);

/// Pairs (v, u) at offset i whenever in[v] == out[u] + i * in_stride and
/// batch indices agree.
KernelMap build_kernel_map(const CoordinateList& in, const CoordinateList& out,
                           const KernelShape& shape, std::span<const int> in_stride);

SparseTensor sparse_conv_forward(const SparseTensor& in, const ConvWeights& w,
                                 const KernelShape& shape, std::span<const int> stride);

/// Forward with a precomputed output coordinate set and kernel map.
std::vector<double> sparse_conv_apply(const SparseTensor& in, const ConvWeights& w,
                                      const KernelMap& map, std::size_t out_rows);

struct ConvGradients {
  std::vector<double> grad_in;  // N_in x in_channels
  ConvWeights grad_w;
};

/// grad_out is N_out x out_channels, aligned with the forward output rows.
ConvGradients sparse_conv_backward(const SparseTensor& in, const ConvWeights& w,
                                   const KernelShape& shape, std::span<const int> stride,
                                   std::span<const double> grad_out);

ConvGradients sparse_conv_backward_with_map(const SparseTensor& in, const ConvWeights& w,
                                            const KernelMap& map,
                                            std::span<const double> grad_out);

/// Dense row-major grid with channels last.
struct DenseGrid {
  std::vector<int> extents;
  int channels = 0;
  std::vector<double> values;

  std::size_t sites() const;
  std::size_t flat_index(std::span<const Coord> position) const;
};

/// Cross-correlation out[x] = sum_i W_i * in[x + i] over the grid, with
/// positions outside the grid read as zero.
DenseGrid dense_conv_forward(const DenseGrid& grid, const ConvWeights& w, const KernelShape& shape);

/// Every site of the grid becomes a row with batch 0, in row-major order.
SparseTensor sparse_from_dense(const DenseGrid& grid);

nlohmann::json to_json(const ConvWeights& w, const KernelShape& shape);
ConvWeights conv_weights_from_json(const nlohmann::json& j, const KernelShape& shape);
std::vector<std::uint8_t> to_binary(const ConvWeights& w, const KernelShape& shape);
ConvWeights conv_weights_from_binary(std::span<const std::uint8_t> bytes, const KernelShape& shape);

}  // namespace voxpipe
