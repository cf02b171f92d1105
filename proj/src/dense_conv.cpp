// SPDX-License-Identifier: Apache-2.0
#include <string>

#include "voxpipe/errors.hpp"
#include "voxpipe/sparse_conv.hpp"

namespace voxpipe {

std::size_t DenseGrid::sites() const {
  std::size_t n = 1;
  for (int e : extents) n *= static_cast<std::size_t>(e);
  return n;
}

std::size_t DenseGrid::flat_index(std::span<const Coord> position) const {
  std::size_t idx = 0;
  for (std::size_t a = 0; a < extents.size(); ++a) {
    idx = idx * static_cast<std::size_t>(extents[a]) + static_cast<std::size_t>(position[a]);
  }
  return idx;
}

namespace {

void check_grid(const DenseGrid& g) {
  if (g.extents.empty()) throw InputError("dense grid needs at least one axis");
  for (int e : g.extents) {
    if (e < 1) throw InputError("dense grid extents must be positive");
  }
  if (g.channels < 1) throw InputError("dense grid needs at least one channel");
  if (g.values.size() != g.sites() * static_cast<std::size_t>(g.channels)) {
    throw StructuralError("dense grid buffer does not match extents x channels");
  }
}

}  // namespace

DenseGrid dense_conv_forward(const DenseGrid& grid, const ConvWeights& w, const KernelShape& shape) {
  check_grid(grid);
  w.check();
  const std::size_t d = grid.extents.size();
  if (static_cast<std::size_t>(shape.dim()) != d) {
    throw StructuralError("kernel dimension does not match grid dimension");
  }
  if (w.volume != shape.volume()) throw StructuralError("weights do not match kernel volume");
  if (grid.channels != w.in_channels) {
    throw StructuralError("grid channels do not match weight input channels");
  }
  const auto nin = static_cast<std::size_t>(w.in_channels);
  const auto nout = static_cast<std::size_t>(w.out_channels);
  DenseGrid out{grid.extents, w.out_channels, std::vector<double>(grid.sites() * nout, 0.0)};

  std::vector<Coord> pos(d, 0);
  std::vector<Coord> nb(d);
  for (std::size_t s = 0; s < grid.sites(); ++s) {
    double* y = out.values.data() + s * nout;
    for (std::size_t k = 0; k < shape.volume(); ++k) {
      const auto off = shape.offset(k);
      bool inside = true;
      for (std::size_t a = 0; a < d; ++a) {
        nb[a] = pos[a] + off[a];
        if (nb[a] < 0 || nb[a] >= grid.extents[a]) inside = false;
      }
      if (!inside) continue;
      const double* x = grid.values.data() + grid.flat_index(nb) * nin;
      for (std::size_t o = 0; o < nout; ++o) {
        double acc = 0.0;
        for (std::size_t c = 0; c < nin; ++c) acc += w.at(k, static_cast<int>(o), static_cast<int>(c)) * x[c];
        y[o] += acc;
      }
    }
    for (std::size_t a = d; a-- > 0;) {
      if (++pos[a] < grid.extents[a]) break;
      pos[a] = 0;
    }
  }
  return out;
}

SparseTensor sparse_from_dense(const DenseGrid& grid) {
  check_grid(grid);
  const std::size_t d = grid.extents.size();
  CoordinateList coords(static_cast<int>(d));
  coords.reserve(grid.sites());
  std::vector<Coord> row(d + 1, 0);
  for (std::size_t s = 0; s < grid.sites(); ++s) {
    coords.push_back(row);
    for (std::size_t a = d; a-- > 0;) {
      if (++row[a + 1] < grid.extents[a]) break;
      row[a + 1] = 0;
    }
  }
  return SparseTensor(std::move(coords), grid.values, grid.channels);
}

}  // namespace voxpipe
