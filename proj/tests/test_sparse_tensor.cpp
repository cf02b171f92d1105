// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "voxpipe/errors.hpp"
#include "voxpipe/sparse_tensor.hpp"

using namespace voxpipe;

namespace {

CoordinateList coords3(std::initializer_list<std::array<Coord, 4>> rows) {
  CoordinateList c(3);
  for (const auto& r : rows) c.push_back(r);
  return c;
}

SparseTensor random_tensor(std::mt19937_64& rng, int n, int width, int batch = 0) {
  std::set<std::array<Coord, 4>> seen;
  std::uniform_int_distribution<Coord> axis(-20, 20);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  CoordinateList c(3);
  std::vector<double> f;
  while (static_cast<int>(c.size()) < n) {
    std::array<Coord, 4> r{batch, axis(rng), axis(rng), axis(rng)};
    if (!seen.insert(r).second) continue;
    c.push_back(r);
    for (int k = 0; k < width; ++k) f.push_back(val(rng));
  }
  return SparseTensor(std::move(c), std::move(f), width);
}

}  // namespace

TEST_CASE("coordinate index finds every row and nothing else") {
  std::mt19937_64 rng(7);
  const auto t = random_tensor(rng, 500, 1);
  CoordinateIndex idx(t.coords());
  CHECK(idx.distinct() == 500);
  CHECK_FALSE(idx.first_duplicate().has_value());
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(idx.find(t.coords().row(i)) == static_cast<std::int64_t>(i));
  }
  const std::array<Coord, 4> missing{0, 100, 100, 100};
  CHECK(idx.find(missing) == CoordinateIndex::kNotFound);
  const std::array<Coord, 4> other_batch{1, t.coords().axes(0)[0], t.coords().axes(0)[1],
                                         t.coords().axes(0)[2]};
  CHECK(idx.find(other_batch) == CoordinateIndex::kNotFound);
}

TEST_CASE("coordinate index reports the first duplicate") {
  const auto c = coords3({{0, 1, 2, 3}, {0, 4, 5, 6}, {0, 1, 2, 3}, {0, 4, 5, 6}});
  CoordinateIndex idx(c);
  REQUIRE(idx.first_duplicate().has_value());
  CHECK(*idx.first_duplicate() == 2);
  CHECK(idx.distinct() == 2);
  const std::array<Coord, 4> r{0, 1, 2, 3};
  CHECK(idx.find(r) == 0);
}

TEST_CASE("sparse tensor construction validates invariants") {
  SUBCASE("duplicate coordinates") {
    CHECK_THROWS_AS(SparseTensor(coords3({{0, 0, 0, 0}, {0, 0, 0, 0}}), {1.0, 2.0}, 1), InputError);
  }
  SUBCASE("feature count mismatch") {
    CHECK_THROWS_AS(SparseTensor(coords3({{0, 0, 0, 0}}), {1.0, 2.0}, 1), InputError);
  }
  SUBCASE("non-finite feature") {
    CHECK_THROWS_AS(SparseTensor(coords3({{0, 0, 0, 0}}), {std::nan("")}, 1), InputError);
  }
  SUBCASE("coordinates off the stride lattice") {
    CHECK_THROWS_AS(SparseTensor(coords3({{0, 1, 0, 0}}), {1.0}, 1, {2, 2, 2}), InputError);
    CHECK_NOTHROW(SparseTensor(coords3({{0, -2, 4, 0}}), {1.0}, 1, {2, 2, 2}));
  }
  SUBCASE("negative batch") {
    CHECK_THROWS_AS(SparseTensor(coords3({{-1, 0, 0, 0}}), {1.0}, 1), InputError);
  }
  SUBCASE("empty tensor is valid") {
    SparseTensor t(3, 4);
    CHECK(t.empty());
    CHECK(t.tensor_stride() == std::vector<int>{1, 1, 1});
  }
}

TEST_CASE("voxelize floors, clamps and averages") {
  PointCloud pc;
  pc.dim = 3;
  pc.points = {0.1, 0.1, 0.1,   // voxel (0,0,0)
               0.4, 0.2, 0.3,   // voxel (0,0,0)
               1.6, 0.0, 0.0,   // voxel (3,0,0)
               -5.0, 99.0, 0.0};  // clamped to (0,9,0)
  pc.features = std::vector<double>{1.0, 3.0, 5.0, 7.0};
  pc.feature_width = 1;
  const std::array<int, 3> res{10, 10, 10};
  const auto t = voxelize(pc, 0.5, res);
  REQUIRE(t.size() == 3);
  CoordinateIndex idx(t.coords());
  const std::array<Coord, 4> a{0, 0, 0, 0}, b{0, 3, 0, 0}, c{0, 0, 9, 0};
  REQUIRE(idx.find(a) >= 0);
  CHECK(t.feature(static_cast<std::size_t>(idx.find(a)))[0] == doctest::Approx(2.0));
  CHECK(t.feature(static_cast<std::size_t>(idx.find(b)))[0] == doctest::Approx(5.0));
  CHECK(t.feature(static_cast<std::size_t>(idx.find(c)))[0] == doctest::Approx(7.0));
}

TEST_CASE("voxelize without features yields occupancy") {
  PointCloud pc;
  pc.points = {0.0, 0.0, 0.0, 0.01, 0.0, 0.0, 2.0, 2.0, 2.0};
  const std::array<int, 3> res{4, 4, 4};
  const auto t = voxelize(pc, 1.0, res);
  CHECK(t.size() == 2);
  CHECK(t.feature_width() == 1);
  for (double f : t.features()) CHECK(f == 1.0);
  CHECK_THROWS_AS(voxelize(pc, 0.0, res), InputError);
}

TEST_CASE("dropout keeps ceil(keep * N) rows in order") {
  std::mt19937_64 rng(11);
  const auto t = random_tensor(rng, 101, 2);
  for (double keep : {0.01, 0.25, 0.5, 0.9, 1.0}) {
    const auto d = dropout(t, keep, 42);
    const auto expect = static_cast<std::size_t>(std::ceil(keep * 101 - 1e-9));
    CHECK(d.size() == std::max<std::size_t>(1, expect));
    CoordinateIndex idx(t.coords());
    std::int64_t last = -1;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto pos = idx.find(d.coords().row(i));
      REQUIRE(pos > last);
      last = pos;
      const auto src = t.feature(static_cast<std::size_t>(pos));
      CHECK(std::equal(src.begin(), src.end(), d.feature(i).begin()));
    }
  }
  CHECK(dropout(t, 0.3, 5) == dropout(t, 0.3, 5));
  CHECK_THROWS_AS(dropout(t, 0.0, 1), InputError);
  CHECK_THROWS_AS(dropout(t, 1.5, 1), InputError);
}

TEST_CASE("batch and split_by_batch are inverse") {
  std::mt19937_64 rng(3);
  std::vector<SparseTensor> parts;
  for (int i = 0; i < 4; ++i) parts.push_back(random_tensor(rng, 10 + i, 3));
  const auto b = batch(parts);
  CHECK(b.size() == 10 + 11 + 12 + 13);
  CHECK(b.coords().batch(10) == 1);
  const auto back = split_by_batch(b);
  REQUIRE(back.size() == parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) CHECK(back[i] == parts[i]);
}

TEST_CASE("json and binary round trips are exact") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = random_tensor(rng, trial * 3, 1 + trial % 4);
    CHECK(sparse_tensor_from_json(to_json(t)) == t);
    const auto bytes = to_binary(t);
    CHECK(bytes.size() == binary_size(t));
    CHECK(sparse_tensor_from_binary(bytes) == t);
  }
}

TEST_CASE("binary decoding rejects corrupt input") {
  std::mt19937_64 rng(9);
  const auto t = random_tensor(rng, 5, 2);
  auto bytes = to_binary(t);
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK_THROWS_AS(sparse_tensor_from_binary(bytes), InputError);
  }
  SUBCASE("truncated") {
    bytes.pop_back();
    CHECK_THROWS_AS(sparse_tensor_from_binary(bytes), InputError);
  }
  SUBCASE("trailing bytes") {
    bytes.push_back(0);
    CHECK_THROWS_AS(sparse_tensor_from_binary(bytes), InputError);
  }
}
