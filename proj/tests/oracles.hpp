#pragma once

// Slow reference implementations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "specgan/conv.hpp"
#include "specgan/random.hpp"
#include "specgan/tensor.hpp"

namespace specgan::oracle {

inline std::vector<double> random_values(CounterRng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline Tensor random_tensor(CounterRng& rng, Shape shape, bool requires_grad = false) {
  const auto n = numel(shape);
  Tensor t(std::move(shape), random_values(rng, n));
  t.set_requires_grad(requires_grad);
  return t;
}

// y[o,i,j] = b[o] + sum_{c,a,b} w[o,c,a,b] x[c, i*s-p+a, j*s-p+b]
inline std::vector<double> conv2d(const std::vector<double>& x, std::size_t C, std::size_t H, std::size_t W,
                                  const std::vector<double>& w, std::size_t O, const std::vector<double>& bias,
                                  const ConvGeometry& g, std::size_t& OH, std::size_t& OW) {
  OH = (H + 2 * g.pad_h - g.kernel_h) / g.stride_h + 1;
  OW = (W + 2 * g.pad_w - g.kernel_w) / g.stride_w + 1;
  std::vector<double> y(O * OH * OW, 0.0);
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t i = 0; i < OH; ++i)
      for (std::size_t j = 0; j < OW; ++j) {
        double acc = bias.empty() ? 0.0 : bias[o];
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t a = 0; a < g.kernel_h; ++a)
            for (std::size_t b = 0; b < g.kernel_w; ++b) {
              const long r = static_cast<long>(i * g.stride_h + a) - static_cast<long>(g.pad_h);
              const long q = static_cast<long>(j * g.stride_w + b) - static_cast<long>(g.pad_w);
              if (r < 0 || q < 0 || r >= static_cast<long>(H) || q >= static_cast<long>(W)) continue;
              acc += w[((o * C + c) * g.kernel_h + a) * g.kernel_w + b] * x[(c * H + r) * W + q];
            }
        y[(o * OH + i) * OW + j] = acc;
      }
  return y;
}

// Scatter form: every x[c,i,j] adds x * w[c,o,a,b] at (i*s-p+a, j*s-p+b).
inline std::vector<double> conv_transpose2d(const std::vector<double>& x, std::size_t C, std::size_t H,
                                            std::size_t W, const std::vector<double>& w, std::size_t O,
                                            const std::vector<double>& bias, const ConvGeometry& g,
                                            std::size_t& OH, std::size_t& OW) {
  OH = (H - 1) * g.stride_h + g.kernel_h + g.out_pad_h - 2 * g.pad_h;
  OW = (W - 1) * g.stride_w + g.kernel_w + g.out_pad_w - 2 * g.pad_w;
  std::vector<double> y(O * OH * OW, 0.0);
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t p = 0; p < OH * OW; ++p) y[o * OH * OW + p] = bias.empty() ? 0.0 : bias[o];
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j)
        for (std::size_t o = 0; o < O; ++o)
          for (std::size_t a = 0; a < g.kernel_h; ++a)
            for (std::size_t b = 0; b < g.kernel_w; ++b) {
              const long r = static_cast<long>(i * g.stride_h + a) - static_cast<long>(g.pad_h);
              const long q = static_cast<long>(j * g.stride_w + b) - static_cast<long>(g.pad_w);
              if (r < 0 || q < 0 || r >= static_cast<long>(OH) || q >= static_cast<long>(OW)) continue;
              y[(o * OH + r) * OW + q] += x[(c * H + i) * W + j] * w[((c * O + o) * g.kernel_h + a) * g.kernel_w + b];
            }
  return y;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Textbook Adam with bias correction, one scalar.
struct Adam {
  double m = 0, v = 0;
  long t = 0;
  double step(double x, double g, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    return x - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace specgan::oracle
