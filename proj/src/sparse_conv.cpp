// SPDX-License-Identifier: Apache-2.0
#include "voxpipe/sparse_conv.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include "voxpipe/errors.hpp"

namespace voxpipe {

namespace {

std::vector<Coord> enumerate_box(const std::vector<int>& extents) {
  const std::size_t d = extents.size();
  std::size_t volume = 1;
  for (int e : extents) volume *= static_cast<std::size_t>(e);
  std::vector<Coord> offsets;
  offsets.reserve(volume * d);
  std::vector<Coord> cur(d);
  for (std::size_t a = 0; a < d; ++a) cur[a] = -(extents[a] - 1) / 2;
  for (std::size_t n = 0; n < volume; ++n) {
    offsets.insert(offsets.end(), cur.begin(), cur.end());
    for (std::size_t a = d; a-- > 0;) {
      if (cur[a] < (extents[a] - 1) / 2) {
        ++cur[a];
        break;
      }
      cur[a] = -(extents[a] - 1) / 2;
    }
  }
  return offsets;
}

void check_stride(std::span<const int> stride, int dim, const char* what) {
  if (stride.size() != static_cast<std::size_t>(dim)) {
    throw StructuralError(std::string(what) + " has " + std::to_string(stride.size()) +
                          " entries, expected " + std::to_string(dim));
  }
  for (int s : stride) {
    if (s < 1) throw InputError(std::string(what) + " entries must be >= 1");
  }
}

Coord floor_to_multiple(Coord c, Coord m) {
  Coord q = c / m;
  if ((c % m != 0) && (c < 0)) --q;
  return q * m;
}

void check_conv_inputs(const SparseTensor& in, const ConvWeights& w, const KernelShape& shape) {
  w.check();
  if (shape.dim() != in.dim()) {
    throw StructuralError("kernel dimension " + std::to_string(shape.dim()) +
                          " does not match tensor dimension " + std::to_string(in.dim()));
  }
  if (w.volume != shape.volume()) {
    throw StructuralError("weights hold " + std::to_string(w.volume) +
                          " matrices but the kernel has " + std::to_string(shape.volume()) +
                          " offsets");
  }
  if (in.feature_width() != w.in_channels) {
    throw StructuralError("input feature width " + std::to_string(in.feature_width()) +
                          " does not match weight input channels " +
                          std::to_string(w.in_channels));
  }
}

}  // namespace

KernelShape::KernelShape(int dim, std::vector<int> extents, std::vector<Coord> offsets)
    : dim_(dim), extents_(std::move(extents)), offsets_(std::move(offsets)) {}

KernelShape KernelShape::hypercube(int dim, int k) {
  if (dim < 1) throw InputError("kernel dimension must be >= 1");
  return box(std::vector<int>(static_cast<std::size_t>(dim), k));
}

KernelShape KernelShape::box(std::vector<int> extents) {
  if (extents.empty()) throw InputError("kernel needs at least one axis");
  for (int e : extents) {
    if (e < 1 || e % 2 == 0) throw InputError("kernel extents must be odd and positive");
  }
  auto offsets = enumerate_box(extents);
  const int dim = static_cast<int>(extents.size());
  return KernelShape(dim, std::move(extents), std::move(offsets));
}

KernelShape KernelShape::custom(int dim, const std::vector<std::vector<Coord>>& offsets) {
  if (dim < 1) throw InputError("kernel dimension must be >= 1");
  if (offsets.empty()) throw InputError("kernel needs at least one offset");
  std::set<std::vector<Coord>> seen;
  std::vector<Coord> flat;
  flat.reserve(offsets.size() * static_cast<std::size_t>(dim));
  for (const auto& off : offsets) {
    if (off.size() != static_cast<std::size_t>(dim)) {
      throw StructuralError("kernel offset has wrong dimension");
    }
    if (!seen.insert(off).second) throw InputError("kernel offsets must be distinct");
    flat.insert(flat.end(), off.begin(), off.end());
  }
  return KernelShape(dim, {}, std::move(flat));
}

std::int64_t KernelShape::find(std::span<const Coord> off) const {
  for (std::size_t k = 0; k < volume(); ++k) {
    const auto o = offset(k);
    if (std::equal(o.begin(), o.end(), off.begin(), off.end())) return static_cast<std::int64_t>(k);
  }
  return -1;
}

ConvWeights ConvWeights::zeros(std::size_t volume, int in_channels, int out_channels) {
  if (volume < 1 || in_channels < 1 || out_channels < 1) {
    throw InputError("weights need positive volume and channel counts");
  }
  ConvWeights w{volume, in_channels, out_channels, {}};
  w.values.assign(volume * w.matrix_size(), 0.0);
  return w;
}

ConvWeights ConvWeights::random(std::size_t volume, int in_channels, int out_channels,
                                std::uint64_t seed, double scale) {
  ConvWeights w = zeros(volume, in_channels, out_channels);
  std::mt19937_64 rng(seed);
  for (double& v : w.values) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = (2.0 * u - 1.0) * scale;
  }
  return w;
}

void ConvWeights::check() const {
  if (volume < 1 || in_channels < 1 || out_channels < 1) {
    throw StructuralError("weights need positive volume and channel counts");
  }
  if (values.size() != volume * matrix_size()) {
    throw StructuralError("weight buffer size does not match volume x out x in");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw InputError("weights must be finite");
  }
}

std::size_t KernelMap::pairs() const {
  std::size_t n = 0;
  for (const auto& rows : in_rows) n += rows.size();
  return n;
}

OutputCoordinates generate_output_coords(const SparseTensor& in, std::span<const int> stride) {
  check_stride(stride, in.dim(), "convolution stride");
  const bool identity = std::all_of(stride.begin(), stride.end(), [](int s) { return s == 1; });
  if (identity) return {in.coords(), in.tensor_stride()};

  std::vector<int> out_stride(stride.size());
  for (std::size_t a = 0; a < stride.size(); ++a) out_stride[a] = in.tensor_stride()[a] * stride[a];

  CoordinateList raw(in.dim());
  raw.reserve(in.size());
  std::vector<Coord> row(raw.row_width());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto src = in.coords().row(i);
    row[0] = src[0];
    for (std::size_t a = 0; a < out_stride.size(); ++a) {
      row[a + 1] = floor_to_multiple(src[a + 1], out_stride[a]);
    }
    raw.push_back(row);
  }
  CoordinateIndex index(raw);
  CoordinateList out(in.dim());
  out.reserve(index.distinct());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (index.find(raw.row(i)) == static_cast<std::int64_t>(i)) out.push_back(raw.row(i));
  }
  return {std::move(out), std::move(out_stride)};
}

KernelMap build_kernel_map(const CoordinateList& in, const CoordinateList& out,
                           const KernelShape& shape, std::span<const int> in_stride) {
  if (in.dim() != out.dim() || in.dim() != shape.dim()) {
    throw StructuralError("kernel map inputs differ in dimension");
  }
  check_stride(in_stride, in.dim(), "input tensor stride");
  const std::size_t d = static_cast<std::size_t>(in.dim());
  CoordinateIndex index(in);
  KernelMap map;
  map.in_rows.resize(shape.volume());
  map.out_rows.resize(shape.volume());
  std::vector<Coord> query(d + 1);
  for (std::size_t k = 0; k < shape.volume(); ++k) {
    const auto off = shape.offset(k);
    for (std::size_t u = 0; u < out.size(); ++u) {
      const auto o = out.row(u);
      query[0] = o[0];
      for (std::size_t a = 0; a < d; ++a) query[a + 1] = o[a + 1] + off[a] * in_stride[a];
      const std::int64_t v = index.find(query);
      if (v != CoordinateIndex::kNotFound) {
        map.in_rows[k].push_back(static_cast<std::size_t>(v));
        map.out_rows[k].push_back(u);
      }
    }
  }
  return map;
}

std::vector<double> sparse_conv_apply(const SparseTensor& in, const ConvWeights& w,
                                      const KernelMap& map, std::size_t out_rows) {
  if (map.volume() != w.volume) throw StructuralError("kernel map and weights differ in volume");
  const auto nin = static_cast<std::size_t>(w.in_channels);
  const auto nout = static_cast<std::size_t>(w.out_channels);
  std::vector<double> out(out_rows * nout, 0.0);
  const double* x = in.features().data();
  for (std::size_t k = 0; k < map.volume(); ++k) {
    const double* wk = w.values.data() + k * w.matrix_size();
    const auto& ins = map.in_rows[k];
    const auto& outs = map.out_rows[k];
    for (std::size_t p = 0; p < ins.size(); ++p) {
      const double* xv = x + ins[p] * nin;
      double* yu = out.data() + outs[p] * nout;
      for (std::size_t o = 0; o < nout; ++o) {
        const double* wrow = wk + o * nin;
        double acc = 0.0;
        for (std::size_t c = 0; c < nin; ++c) acc += wrow[c] * xv[c];
        yu[o] += acc;
      }
    }
  }
  return out;
}

SparseTensor sparse_conv_forward(const SparseTensor& in, const ConvWeights& w,
                                 const KernelShape& shape, std::span<const int> stride) {
  check_conv_inputs(in, w, shape);
  OutputCoordinates oc = generate_output_coords(in, stride);
  const KernelMap map = build_kernel_map(in.coords(), oc.coords, shape, in.tensor_stride());
  auto features = sparse_conv_apply(in, w, map, oc.coords.size());
  return SparseTensor(std::move(oc.coords), std::move(features), w.out_channels,
                      std::move(oc.tensor_stride));
}

ConvGradients sparse_conv_backward_with_map(const SparseTensor& in, const ConvWeights& w,
                                            const KernelMap& map,
                                            std::span<const double> grad_out) {
  if (map.volume() != w.volume) throw StructuralError("kernel map and weights differ in volume");
  const auto nin = static_cast<std::size_t>(w.in_channels);
  const auto nout = static_cast<std::size_t>(w.out_channels);
  if (grad_out.size() % nout != 0) {
    throw StructuralError("output gradient is not a multiple of the output channel count");
  }
  const std::size_t out_rows = grad_out.size() / nout;
  ConvGradients g{std::vector<double>(in.size() * nin, 0.0),
                  ConvWeights::zeros(w.volume, w.in_channels, w.out_channels)};
  const double* x = in.features().data();
  for (std::size_t k = 0; k < map.volume(); ++k) {
    const double* wk = w.values.data() + k * w.matrix_size();
    double* gwk = g.grad_w.values.data() + k * w.matrix_size();
    const auto& ins = map.in_rows[k];
    const auto& outs = map.out_rows[k];
    for (std::size_t p = 0; p < ins.size(); ++p) {
      if (outs[p] >= out_rows) throw StructuralError("output gradient has too few rows");
      const double* gy = grad_out.data() + outs[p] * nout;
      const double* xv = x + ins[p] * nin;
      double* gx = g.grad_in.data() + ins[p] * nin;
      for (std::size_t o = 0; o < nout; ++o) {
        const double go = gy[o];
        const double* wrow = wk + o * nin;
        double* gwrow = gwk + o * nin;
        for (std::size_t c = 0; c < nin; ++c) {
          gx[c] += wrow[c] * go;
          gwrow[c] += go * xv[c];
        }
      }
    }
  }
  return g;
}

ConvGradients sparse_conv_backward(const SparseTensor& in, const ConvWeights& w,
                                   const KernelShape& shape, std::span<const int> stride,
                                   std::span<const double> grad_out) {
  check_conv_inputs(in, w, shape);
  const OutputCoordinates oc = generate_output_coords(in, stride);
  const std::size_t expected = oc.coords.size() * static_cast<std::size_t>(w.out_channels);
  if (grad_out.size() != expected) {
    throw StructuralError("output gradient has " + std::to_string(grad_out.size()) +
                          " values, expected " + std::to_string(expected));
  }
  const KernelMap map = build_kernel_map(in.coords(), oc.coords, shape, in.tensor_stride());
  return sparse_conv_backward_with_map(in, w, map, grad_out);
}

}  // namespace voxpipe
