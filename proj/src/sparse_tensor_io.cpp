// SPDX-License-Identifier: Apache-2.0
#include <string>

#include "byte_io.hpp"
#include "voxpipe/errors.hpp"
#include "voxpipe/sparse_tensor.hpp"

namespace voxpipe {

namespace {

constexpr std::uint32_t kBinaryVersion = 1;

}  // namespace

nlohmann::json to_json(const SparseTensor& t) {
  nlohmann::json coords = nlohmann::json::array();
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto r = t.coords().row(i);
    coords.push_back(std::vector<Coord>(r.begin(), r.end()));
    const auto f = t.feature(i);
    features.push_back(std::vector<double>(f.begin(), f.end()));
  }
  return {{"dim", t.dim()},
          {"feature_width", t.feature_width()},
          {"tensor_stride", t.tensor_stride()},
          {"coords", std::move(coords)},
          {"features", std::move(features)}};
}

SparseTensor sparse_tensor_from_json(const nlohmann::json& j) {
  try {
    const int dim = j.at("dim").get<int>();
    const int width = j.at("feature_width").get<int>();
    std::vector<int> stride = j.value("tensor_stride", std::vector<int>{});
    const auto& rows = j.at("coords");
    const auto& feats = j.at("features");
    if (rows.size() != feats.size()) {
      throw InputError("sparse tensor JSON: coords and features differ in length");
    }
    CoordinateList coords(dim);
    coords.reserve(rows.size());
    std::vector<double> features;
    features.reserve(rows.size() * static_cast<std::size_t>(std::max(width, 0)));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      coords.push_back(rows[i].get<std::vector<Coord>>());
      const auto f = feats[i].get<std::vector<double>>();
      if (f.size() != static_cast<std::size_t>(width)) {
        throw InputError("sparse tensor JSON: feature row " + std::to_string(i) +
                         " has wrong width");
      }
      features.insert(features.end(), f.begin(), f.end());
    }
    return SparseTensor(std::move(coords), std::move(features), width, std::move(stride));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("sparse tensor JSON: ") + e.what());
  }
}

std::size_t binary_size(const SparseTensor& t) {
  const std::size_t n = t.size();
  return 4 + 4 + 4 + 4 + 8 + 4 * static_cast<std::size_t>(t.dim()) +
         4 * n * t.coords().row_width() + 8 * n * static_cast<std::size_t>(t.feature_width());
}

std::vector<std::uint8_t> to_binary(const SparseTensor& t) {
  detail::ByteWriter w(binary_size(t));
  w.magic("VPST");
  w.put<std::uint32_t>(kBinaryVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.feature_width()));
  w.put<std::uint64_t>(t.size());
  for (int s : t.tensor_stride()) w.put<std::int32_t>(s);
  w.put_all<Coord>(t.coords().data());
  w.put_all<double>(t.features());
  return w.take();
}

SparseTensor sparse_tensor_from_binary(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "sparse tensor binary");
  r.expect_magic("VPST");
  if (r.get<std::uint32_t>() != kBinaryVersion) {
    throw InputError("sparse tensor binary: unsupported version");
  }
  const auto dim = r.get<std::uint32_t>();
  const auto width = r.get<std::uint32_t>();
  const auto n = r.get<std::uint64_t>();
  if (dim < 1 || dim > 64) throw InputError("sparse tensor binary: bad dimension");
  if (n > bytes.size() || width > bytes.size()) throw InputError("sparse tensor binary: truncated");
  auto stride_raw = r.get_all<std::int32_t>(dim);
  std::vector<int> stride(stride_raw.begin(), stride_raw.end());
  auto coords = r.get_all<Coord>(n * (dim + 1ULL));
  auto features = r.get_all<double>(n * width);
  r.expect_end();
  return SparseTensor(CoordinateList(static_cast<int>(dim), std::move(coords)),
                      std::move(features), static_cast<int>(width), std::move(stride));
}

}  // namespace voxpipe
