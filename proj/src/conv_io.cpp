// SPDX-License-Identifier: Apache-2.0
#include <string>

#include "byte_io.hpp"
#include "voxpipe/errors.hpp"
#include "voxpipe/sparse_conv.hpp"

namespace voxpipe {

namespace {

constexpr std::uint32_t kWeightsVersion = 1;

std::string offset_key(std::span<const Coord> off) {
  std::string key;
  for (std::size_t a = 0; a < off.size(); ++a) {
    if (a) key += ',';
    key += std::to_string(off[a]);
  }
  return key;
}

}  // namespace

nlohmann::json to_json(const ConvWeights& w, const KernelShape& shape) {
  w.check();
  if (w.volume != shape.volume()) throw StructuralError("weights do not match kernel volume");
  nlohmann::json matrices = nlohmann::json::object();
  for (std::size_t k = 0; k < w.volume; ++k) {
    nlohmann::json rows = nlohmann::json::array();
    for (int o = 0; o < w.out_channels; ++o) {
      std::vector<double> row(static_cast<std::size_t>(w.in_channels));
      for (int c = 0; c < w.in_channels; ++c) row[static_cast<std::size_t>(c)] = w.at(k, o, c);
      rows.push_back(std::move(row));
    }
    matrices[offset_key(shape.offset(k))] = std::move(rows);
  }
  return {{"format_version", kWeightsVersion},
          {"dim", shape.dim()},
          {"in_channels", w.in_channels},
          {"out_channels", w.out_channels},
          {"weights", std::move(matrices)}};
}

ConvWeights conv_weights_from_json(const nlohmann::json& j, const KernelShape& shape) {
  try {
    if (j.at("format_version").get<int>() != static_cast<int>(kWeightsVersion)) {
      throw InputError("weights JSON: unsupported format_version");
    }
    if (j.at("dim").get<int>() != shape.dim()) {
      throw StructuralError("weights JSON: dimension does not match kernel");
    }
    const auto& matrices = j.at("weights");
    if (matrices.size() != shape.volume()) {
      throw StructuralError("weights JSON: offset count does not match kernel");
    }
    ConvWeights w = ConvWeights::zeros(shape.volume(), j.at("in_channels").get<int>(),
                                       j.at("out_channels").get<int>());
    for (std::size_t k = 0; k < shape.volume(); ++k) {
      const std::string key = offset_key(shape.offset(k));
      if (!matrices.contains(key)) throw StructuralError("weights JSON: missing offset " + key);
      const auto rows = matrices.at(key).get<std::vector<std::vector<double>>>();
      if (rows.size() != static_cast<std::size_t>(w.out_channels)) {
        throw StructuralError("weights JSON: offset " + key + " has wrong row count");
      }
      for (int o = 0; o < w.out_channels; ++o) {
        const auto& row = rows[static_cast<std::size_t>(o)];
        if (row.size() != static_cast<std::size_t>(w.in_channels)) {
          throw StructuralError("weights JSON: offset " + key + " has wrong column count");
        }
        for (int c = 0; c < w.in_channels; ++c) w.at(k, o, c) = row[static_cast<std::size_t>(c)];
      }
    }
    w.check();
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("weights JSON: ") + e.what());
  }
}

// "VPKW" | u32 version | u32 dim | u32 volume | u32 in | u32 out |
// i32 offsets[volume*dim] | f64 values[volume*out*in]
std::vector<std::uint8_t> to_binary(const ConvWeights& w, const KernelShape& shape) {
  w.check();
  if (w.volume != shape.volume()) throw StructuralError("weights do not match kernel volume");
  detail::ByteWriter out(24 + 4 * shape.volume() * static_cast<std::size_t>(shape.dim()) +
                         8 * w.values.size());
  out.magic("VPKW");
  out.put<std::uint32_t>(kWeightsVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(shape.dim()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(w.volume));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(w.in_channels));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(w.out_channels));
  for (std::size_t k = 0; k < shape.volume(); ++k) out.put_all<Coord>(shape.offset(k));
  out.put_all<double>(w.values);
  return out.take();
}

ConvWeights conv_weights_from_binary(std::span<const std::uint8_t> bytes, const KernelShape& shape) {
  detail::ByteReader r(bytes, "weights binary");
  r.expect_magic("VPKW");
  if (r.get<std::uint32_t>() != kWeightsVersion) {
    throw InputError("weights binary: unsupported version");
  }
  const auto dim = r.get<std::uint32_t>();
  const auto volume = r.get<std::uint32_t>();
  const auto nin = r.get<std::uint32_t>();
  const auto nout = r.get<std::uint32_t>();
  if (dim != static_cast<std::uint32_t>(shape.dim()) || volume != shape.volume()) {
    throw StructuralError("weights binary: kernel shape mismatch");
  }
  if (nin == 0 || nout == 0 || nin > bytes.size() || nout > bytes.size()) {
    throw InputError("weights binary: bad channel counts");
  }
  const auto offsets = r.get_all<Coord>(static_cast<std::uint64_t>(volume) * dim);
  // Offsets are stored so files can be matched against a reordered kernel.
  std::vector<std::size_t> target(volume);
  for (std::size_t k = 0; k < volume; ++k) {
    const std::int64_t pos = shape.find(std::span<const Coord>(offsets.data() + k * dim, dim));
    if (pos < 0) throw StructuralError("weights binary: offset not in kernel");
    target[k] = static_cast<std::size_t>(pos);
  }
  const auto values = r.get_all<double>(static_cast<std::uint64_t>(volume) * nin * nout);
  r.expect_end();
  ConvWeights w = ConvWeights::zeros(volume, static_cast<int>(nin), static_cast<int>(nout));
  const std::size_t m = w.matrix_size();
  for (std::size_t k = 0; k < volume; ++k) {
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(k * m),
              values.begin() + static_cast<std::ptrdiff_t>((k + 1) * m),
              w.values.begin() + static_cast<std::ptrdiff_t>(target[k] * m));
  }
  w.check();
  return w;
}

}  // namespace voxpipe
