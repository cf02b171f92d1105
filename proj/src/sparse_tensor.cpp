// SPDX-License-Identifier: Apache-2.0
#include "voxpipe/sparse_tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <string>

#include "voxpipe/errors.hpp"

namespace voxpipe {

CoordinateList::CoordinateList(int dim) : dim_(dim) {
  if (dim < 1) throw InputError("coordinate dimension must be >= 1, got " + std::to_string(dim));
}

CoordinateList::CoordinateList(int dim, std::vector<Coord> rows) : CoordinateList(dim) {
  if (rows.size() % row_width() != 0) {
    throw StructuralError("coordinate buffer of " + std::to_string(rows.size()) +
                          " values is not a multiple of row width " +
                          std::to_string(row_width()));
  }
  data_ = std::move(rows);
}

void CoordinateList::push_back(std::span<const Coord> row) {
  if (row.size() != row_width()) {
    throw StructuralError("coordinate row has " + std::to_string(row.size()) +
                          " values, expected " + std::to_string(row_width()));
  }
  data_.insert(data_.end(), row.begin(), row.end());
}

SparseTensor::SparseTensor(int dim, int feature_width, std::vector<int> tensor_stride)
    : SparseTensor(CoordinateList(dim), {}, feature_width, std::move(tensor_stride)) {}

SparseTensor::SparseTensor(CoordinateList coords, std::vector<double> features, int feature_width,
                           std::vector<int> tensor_stride)
    : coords_(std::move(coords)),
      features_(std::move(features)),
      feature_width_(feature_width),
      tensor_stride_(std::move(tensor_stride)) {
  if (tensor_stride_.empty()) tensor_stride_.assign(static_cast<std::size_t>(coords_.dim()), 1);
  validate();
}

void SparseTensor::validate() const {
  const int d = coords_.dim();
  if (d < 1) throw InputError("sparse tensor dimension must be >= 1");
  if (feature_width_ < 0) throw InputError("feature width must be non-negative");
  if (tensor_stride_.size() != static_cast<std::size_t>(d)) {
    throw StructuralError("tensor stride has " + std::to_string(tensor_stride_.size()) +
                          " entries, expected " + std::to_string(d));
  }
  for (int s : tensor_stride_) {
    if (s < 1) throw InputError("tensor stride entries must be positive");
  }
  const std::size_t n = coords_.size();
  if (features_.size() != n * static_cast<std::size_t>(feature_width_)) {
    throw InputError("feature matrix has " + std::to_string(features_.size()) +
                     " values, expected " + std::to_string(n) + " x " +
                     std::to_string(feature_width_));
  }
  for (double f : features_) {
    if (!std::isfinite(f)) throw InputError("feature values must be finite");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (coords_.batch(i) < 0) {
      throw InputError("row " + std::to_string(i) + " has a negative batch index");
    }
    const auto ax = coords_.axes(i);
    for (int a = 0; a < d; ++a) {
      if (ax[a] % tensor_stride_[a] != 0) {
        throw InputError("row " + std::to_string(i) + " axis " + std::to_string(a) +
                         " is not a multiple of the tensor stride");
      }
    }
  }
  CoordinateIndex index(coords_);
  if (auto dup = index.first_duplicate()) {
    throw InputError("duplicate coordinate at row " + std::to_string(*dup));
  }
}

SparseTensor voxelize(const PointCloud& cloud, double voxel_size, std::span<const int> resolution) {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw InputError("voxel size must be a positive finite number");
  }
  if (cloud.dim < 1) throw InputError("point cloud dimension must be >= 1");
  if (cloud.batch_index < 0) throw InputError("point cloud batch index must be non-negative");
  if (resolution.size() != static_cast<std::size_t>(cloud.dim)) {
    throw StructuralError("resolution has " + std::to_string(resolution.size()) +
                          " entries, expected " + std::to_string(cloud.dim));
  }
  for (int r : resolution) {
    if (r < 1) throw InputError("resolution entries must be >= 1");
  }
  const auto d = static_cast<std::size_t>(cloud.dim);
  if (cloud.points.size() % d != 0) {
    throw StructuralError("point buffer is not a multiple of the dimension");
  }
  const std::size_t n = cloud.size();
  const bool has_features = cloud.features.has_value();
  const int width = has_features ? cloud.feature_width : 1;
  if (has_features) {
    if (cloud.feature_width < 0 ||
        cloud.features->size() != n * static_cast<std::size_t>(cloud.feature_width)) {
      throw StructuralError("point feature matrix does not match point count");
    }
  }

  CoordinateList raw(cloud.dim);
  raw.reserve(n);
  std::vector<Coord> row(d + 1);
  row[0] = cloud.batch_index;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      const double p = cloud.points[i * d + a];
      if (!std::isfinite(p)) {
        throw InputError("point " + std::to_string(i) + " has a non-finite component");
      }
      double q = std::floor(p / voxel_size);
      q = std::clamp(q, 0.0, static_cast<double>(resolution[a] - 1));
      row[a + 1] = static_cast<Coord>(q);
    }
    raw.push_back(row);
  }

  // The index maps every row to the first row with the same voxel, which
  // gives insertion-ordered deduplication for free.
  CoordinateIndex index(raw);
  std::vector<std::int64_t> slot_of_first(n, -1);
  std::vector<std::size_t> owner(n);
  CoordinateList coords(cloud.dim);
  coords.reserve(index.distinct());
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto first = static_cast<std::size_t>(index.find(raw.row(i)));
    if (first == i) {
      slot_of_first[i] = static_cast<std::int64_t>(next++);
      coords.push_back(raw.row(i));
    }
    owner[i] = static_cast<std::size_t>(slot_of_first[first]);
  }

  const auto w = static_cast<std::size_t>(width);
  std::vector<double> sums(next * w, 0.0);
  std::vector<std::size_t> counts(next, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t v = owner[i];
    ++counts[v];
    for (std::size_t c = 0; c < w; ++c) {
      sums[v * w + c] += has_features ? (*cloud.features)[i * w + c] : 1.0;
    }
  }
  for (std::size_t v = 0; v < next; ++v) {
    for (std::size_t c = 0; c < w; ++c) sums[v * w + c] /= static_cast<double>(counts[v]);
  }
  return SparseTensor(std::move(coords), std::move(sums), width);
}

namespace {

// Unbiased draw from [0, bound) without relying on the library's
// distribution implementation, so sequences match across toolchains.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  while (true) {
    const std::uint64_t x = rng();
    if (x < limit) return x % bound;
  }
}

}  // namespace

SparseTensor dropout(const SparseTensor& t, double keep_ratio, std::uint64_t seed) {
  if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) {
    throw InputError("keep ratio must lie in (0, 1]");
  }
  const std::size_t n = t.size();
  if (keep_ratio == 1.0 || n == 0) return t;

  // Small slack keeps products like 0.1 * 30 from rounding up past 3.
  const double exact = keep_ratio * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  k = std::clamp<std::size_t>(k, 1, n);

  // Floyd's algorithm: k distinct indices in O(k) draws.
  std::mt19937_64 rng(seed);
  std::set<std::size_t> chosen;
  for (std::size_t j = n - k; j < n; ++j) {
    const auto r = static_cast<std::size_t>(uniform_below(rng, j + 1));
    if (!chosen.insert(r).second) chosen.insert(j);
  }

  CoordinateList coords(t.dim());
  coords.reserve(k);
  std::vector<double> features;
  features.reserve(k * static_cast<std::size_t>(t.feature_width()));
  for (std::size_t i : chosen) {
    coords.push_back(t.coords().row(i));
    const auto f = t.feature(i);
    features.insert(features.end(), f.begin(), f.end());
  }
  return SparseTensor(std::move(coords), std::move(features), t.feature_width(),
                      t.tensor_stride());
}

SparseTensor batch(std::span<const SparseTensor> tensors) {
  if (tensors.empty()) throw StructuralError("cannot batch an empty list of tensors");
  const SparseTensor& ref = tensors.front();
  std::size_t total = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const SparseTensor& t = tensors[i];
    if (t.dim() != ref.dim() || t.feature_width() != ref.feature_width() ||
        t.tensor_stride() != ref.tensor_stride()) {
      throw StructuralError("tensor " + std::to_string(i) +
                            " differs from tensor 0 in dimension, feature width or stride");
    }
    total += t.size();
  }
  CoordinateList coords(ref.dim());
  coords.reserve(total);
  std::vector<double> features;
  features.reserve(total * static_cast<std::size_t>(ref.feature_width()));
  std::vector<Coord> row(coords.row_width());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const SparseTensor& t = tensors[i];
    for (std::size_t r = 0; r < t.size(); ++r) {
      const auto src = t.coords().row(r);
      std::copy(src.begin(), src.end(), row.begin());
      row[0] = static_cast<Coord>(i);
      coords.push_back(row);
    }
    features.insert(features.end(), t.features().begin(), t.features().end());
  }
  return SparseTensor(std::move(coords), std::move(features), ref.feature_width(),
                      ref.tensor_stride());
}

std::vector<SparseTensor> split_by_batch(const SparseTensor& t) {
  Coord max_batch = -1;
  for (std::size_t i = 0; i < t.size(); ++i) max_batch = std::max(max_batch, t.coords().batch(i));
  const auto groups = static_cast<std::size_t>(max_batch + 1);
  std::vector<CoordinateList> coords(groups, CoordinateList(t.dim()));
  std::vector<std::vector<double>> features(groups);
  std::vector<Coord> row(t.coords().row_width());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto src = t.coords().row(i);
    const auto g = static_cast<std::size_t>(src[0]);
    std::copy(src.begin(), src.end(), row.begin());
    row[0] = 0;
    coords[g].push_back(row);
    const auto f = t.feature(i);
    features[g].insert(features[g].end(), f.begin(), f.end());
  }
  std::vector<SparseTensor> out;
  out.reserve(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    out.emplace_back(std::move(coords[g]), std::move(features[g]), t.feature_width(),
                     t.tensor_stride());
  }
  return out;
}

}  // namespace voxpipe
