// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "conv_oracles.hpp"
#include "voxpipe/errors.hpp"
#include "voxpipe/sparse_conv.hpp"

using namespace voxpipe;
using namespace voxpipe::testing;

TEST_CASE("hypercube offsets are lexicographic, last axis fastest") {
  const auto s = KernelShape::hypercube(2, 3);
  REQUIRE(s.volume() == 9);
  CHECK(s.offset(0)[0] == -1);
  CHECK(s.offset(0)[1] == -1);
  CHECK(s.offset(1)[0] == -1);
  CHECK(s.offset(1)[1] == 0);
  CHECK(s.offset(8)[0] == 1);
  CHECK(s.offset(8)[1] == 1);
  const std::array<Coord, 2> centre{0, 0};
  CHECK(s.find(centre) == 4);
  CHECK_THROWS_AS(KernelShape::hypercube(3, 2), InputError);
  CHECK(KernelShape::box({1, 3, 5}).volume() == 15);
  CHECK_THROWS_AS(KernelShape::custom(2, {{0, 0}, {0, 0}}), InputError);
}

TEST_CASE("kernel map pairs satisfy in = out + offset * stride") {
  std::mt19937_64 rng(1);
  const auto grid = random_grid(rng, {5, 4, 6}, 1);
  auto t = dropout(sparse_from_dense(grid), 0.6, 3);
  const auto shape = KernelShape::hypercube(3, 3);
  const std::array<int, 3> one{1, 1, 1};
  const auto map = build_kernel_map(t.coords(), t.coords(), shape, one);
  REQUIRE(map.volume() == shape.volume());
  std::size_t expected = 0;
  for (std::size_t u = 0; u < t.size(); ++u) {
    for (std::size_t v = 0; v < t.size(); ++v) {
      const auto a = t.coords().axes(v);
      const auto b = t.coords().axes(u);
      bool near = true;
      for (int d = 0; d < 3; ++d) near = near && std::abs(a[d] - b[d]) <= 1;
      expected += near;
    }
  }
  CHECK(map.pairs() == expected);
  for (std::size_t k = 0; k < map.volume(); ++k) {
    for (std::size_t p = 0; p < map.in_rows[k].size(); ++p) {
      const auto in = t.coords().axes(map.in_rows[k][p]);
      const auto out = t.coords().axes(map.out_rows[k][p]);
      for (int d = 0; d < 3; ++d) CHECK(in[d] == out[d] + shape.offset(k)[d]);
    }
  }
}

TEST_CASE("kernel map never pairs across batch entries") {
  CoordinateList c(1);
  c.push_back(std::array<Coord, 2>{0, 0});
  c.push_back(std::array<Coord, 2>{1, 1});
  const std::array<int, 1> one{1};
  const auto map = build_kernel_map(c, c, KernelShape::hypercube(1, 3), one);
  CHECK(map.pairs() == 2);  // only the two centre pairs
}

TEST_CASE("sparse forward matches the dense oracle on full grids") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const int dim = 1 + trial % 3;
    std::vector<int> extents;
    for (int d = 0; d < dim; ++d) extents.push_back(2 + static_cast<int>(rng() % 4));
    const int cin = 1 + static_cast<int>(rng() % 3);
    const int cout = 1 + static_cast<int>(rng() % 3);
    const auto grid = random_grid(rng, extents, cin);
    const auto shape = KernelShape::hypercube(dim, 3);
    const auto w = ConvWeights::random(shape.volume(), cin, cout, rng());
    const auto dense = dense_conv_forward(grid, w, shape);
    const auto sparse = sparse_conv_forward(sparse_from_dense(grid), w, shape,
                                            std::vector<int>(static_cast<std::size_t>(dim), 1));
    CHECK(max_abs_diff_at_occupied(sparse, dense) < 1e-9);
  }
}

TEST_CASE("sparse forward matches a direct sum on partially occupied inputs") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto grid = random_grid(rng, {6, 5, 4}, 2);
    const auto t = dropout(sparse_from_dense(grid), 0.4, rng());
    const auto shape = KernelShape::hypercube(3, 3);
    const auto w = ConvWeights::random(shape.volume(), 2, 3, rng());
    const std::array<int, 3> one{1, 1, 1};
    const auto out = sparse_conv_forward(t, w, shape, one);
    CHECK(out.coords() == t.coords());
    CHECK(max_abs_diff(out.features(), direct_sparse_conv(t, w, shape, t.coords(), 1)) < 1e-12);
  }
}

TEST_CASE("strided output coordinates are downsampled and distinct") {
  CoordinateList c(2);
  for (Coord x = 0; x < 5; ++x) c.push_back(std::array<Coord, 3>{0, x, 1});
  SparseTensor t(c, std::vector<double>(5, 1.0), 1);
  const std::array<int, 2> s2{2, 2};
  const auto out = generate_output_coords(t, s2);
  CHECK(out.tensor_stride == std::vector<int>{2, 2});
  REQUIRE(out.coords.size() == 3);
  CHECK(out.coords.axes(0)[0] == 0);
  CHECK(out.coords.axes(1)[0] == 2);
  CHECK(out.coords.axes(2)[0] == 4);
  for (std::size_t i = 0; i < 3; ++i) CHECK(out.coords.axes(i)[1] == 0);

  const auto shape = KernelShape::hypercube(2, 3);
  const auto w = ConvWeights::random(shape.volume(), 1, 2, 8);
  const auto y = sparse_conv_forward(t, w, shape, s2);
  CHECK(y.tensor_stride() == std::vector<int>{2, 2});
  CHECK(max_abs_diff(y.features(), direct_sparse_conv(t, w, shape, y.coords(), 1)) < 1e-12);
}

TEST_CASE("backward matches central finite differences") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const auto grid = random_grid(rng, {4, 3, 4}, 2);
    const auto t = dropout(sparse_from_dense(grid), 0.7, rng());
    const auto shape = KernelShape::hypercube(3, 3);
    const auto w = ConvWeights::random(shape.volume(), 2, 2, rng());
    const std::vector<int> stride = trial % 2 ? std::vector<int>{2, 2, 2} : std::vector<int>{1, 1, 1};
    const auto fd = finite_difference_check(rng, t, w, shape, stride, 10);
    CHECK(fd.max_rel_error < 1e-5);
  }
}

TEST_CASE("weights serialization round trips") {
  const auto shape = KernelShape::hypercube(3, 3);
  const auto w = ConvWeights::random(shape.volume(), 3, 4, 17);
  CHECK(conv_weights_from_json(to_json(w, shape), shape) == w);
  CHECK(conv_weights_from_binary(to_binary(w, shape), shape) == w);
  const auto other = KernelShape::hypercube(2, 3);
  CHECK_THROWS_AS(conv_weights_from_binary(to_binary(w, shape), other), StructuralError);
}

TEST_CASE("forward rejects mismatched weights") {
  CoordinateList c(1);
  c.push_back(std::array<Coord, 2>{0, 0});
  SparseTensor t(c, {1.0, 2.0}, 2);
  const auto shape = KernelShape::hypercube(1, 3);
  const std::array<int, 1> one{1};
  CHECK_THROWS(sparse_conv_forward(t, ConvWeights::zeros(3, 1, 1), shape, one));
  CHECK_THROWS(sparse_conv_forward(t, ConvWeights::zeros(5, 2, 1), shape, one));
}
