// SPDX-License-Identifier: Apache-2.0
// Reference implementations used to check the sparse convolution engine.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "voxpipe/sparse_conv.hpp"

namespace voxpipe::testing {

inline DenseGrid random_grid(std::mt19937_64& rng, std::vector<int> extents, int channels) {
  DenseGrid g;
  g.extents = std::move(extents);
  g.channels = channels;
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  g.values.resize(g.sites() * static_cast<std::size_t>(channels));
  for (auto& v : g.values) v = val(rng);
  return g;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Compares each occupied output row with the dense result at its position.
inline double max_abs_diff_at_occupied(const SparseTensor& sparse, const DenseGrid& dense) {
  if (sparse.feature_width() != dense.channels) return INFINITY;
  double m = 0.0;
  for (std::size_t r = 0; r < sparse.size(); ++r) {
    const auto base = dense.flat_index(sparse.coords().axes(r)) * static_cast<std::size_t>(dense.channels);
    const auto f = sparse.feature(r);
    for (int c = 0; c < dense.channels; ++c) {
      m = std::max(m, std::abs(f[static_cast<std::size_t>(c)] - dense.values[base + static_cast<std::size_t>(c)]));
    }
  }
  return m;
}

/// Quadratic-time convolution: every (output, input) row pair whose
/// difference is an offset times the input stride contributes.
inline std::vector<double> direct_sparse_conv(const SparseTensor& in, const ConvWeights& w,
                                              const KernelShape& shape, const CoordinateList& out,
                                              int in_stride) {
  const int dim = in.dim();
  std::vector<double> y(out.size() * static_cast<std::size_t>(w.out_channels), 0.0);
  std::vector<Coord> off(static_cast<std::size_t>(dim));
  for (std::size_t u = 0; u < out.size(); ++u) {
    for (std::size_t v = 0; v < in.size(); ++v) {
      if (in.coords().batch(v) != out.batch(u)) continue;
      bool ok = true;
      for (int d = 0; d < dim && ok; ++d) {
        const Coord diff = in.coords().axes(v)[d] - out.axes(u)[d];
        ok = diff % in_stride == 0;
        off[static_cast<std::size_t>(d)] = diff / in_stride;
      }
      if (!ok) continue;
      const auto k = shape.find(off);
      if (k < 0) continue;
      const auto f = in.feature(v);
      for (int o = 0; o < w.out_channels; ++o) {
        double acc = 0.0;
        for (int i = 0; i < w.in_channels; ++i) {
          acc += w.at(static_cast<std::size_t>(k), o, i) * f[static_cast<std::size_t>(i)];
        }
        y[u * static_cast<std::size_t>(w.out_channels) + static_cast<std::size_t>(o)] += acc;
      }
    }
  }
  return y;
}

struct FiniteDifferenceResult {
  double max_rel_error = 0.0;
  int checked = 0;
};

/// Loss = <g, forward(in, w)> for a random g. Perturbs `entries` randomly
/// chosen weight and input values, alternating, and compares the central
/// difference with the analytic gradient. Relative error uses
/// max(|analytic|, |numeric|, 1e-6) as denominator so that exactly-zero
/// gradients are compared absolutely.
inline FiniteDifferenceResult finite_difference_check(std::mt19937_64& rng, const SparseTensor& in,
                                                      const ConvWeights& w, const KernelShape& shape,
                                                      const std::vector<int>& stride, int entries) {
  const auto y = sparse_conv_forward(in, w, shape, stride);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  std::vector<double> g(y.features().size());
  for (auto& v : g) v = val(rng);
  const auto grads = sparse_conv_backward(in, w, shape, stride, g);

  auto loss = [&](const SparseTensor& t, const ConvWeights& ww) {
    const auto out = sparse_conv_forward(t, ww, shape, stride);
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * out.features()[i];
    return s;
  };
  const double h = 1e-5;
  FiniteDifferenceResult r;
  for (int e = 0; e < entries; ++e) {
    double analytic = 0.0;
    double numeric = 0.0;
    if (e % 2 == 0 || in.empty()) {
      const std::size_t idx = rng() % w.values.size();
      ConvWeights plus = w, minus = w;
      plus.values[idx] += h;
      minus.values[idx] -= h;
      numeric = (loss(in, plus) - loss(in, minus)) / (2 * h);
      analytic = grads.grad_w.values[idx];
    } else {
      const std::size_t idx = rng() % in.features().size();
      auto fp = in.features(), fm = in.features();
      fp[idx] += h;
      fm[idx] -= h;
      const SparseTensor tp(in.coords(), fp, in.feature_width(), in.tensor_stride());
      const SparseTensor tm(in.coords(), fm, in.feature_width(), in.tensor_stride());
      numeric = (loss(tp, w) - loss(tm, w)) / (2 * h);
      analytic = grads.grad_in[idx];
    }
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic - numeric) / denom);
    ++r.checked;
  }
  return r;
}

}  // namespace voxpipe::testing
