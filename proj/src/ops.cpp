#include "specgan/ops.hpp"

#include <cmath>
#include <numeric>

#include "specgan/blas.hpp"

namespace specgan {

namespace {

enum class Broadcast { kNone, kScalarA, kScalarB };

Broadcast check_binary(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (b.size() == 1) return Broadcast::kScalarB;
  if (a.size() == 1) return Broadcast::kScalarA;
  throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                   to_string(b.shape()));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

// Elementwise binary op with scalar broadcast. `da`/`db` give the local
// partials at element i, given the two operand values.
template <class F, class DA, class DB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  const auto mode = check_binary(name, a, b);
  const Shape shape = mode == Broadcast::kScalarA ? b.shape() : a.shape();
  const std::size_t n = numel(shape);
  auto av = a.data();
  auto bv = b.data();
  auto a_at = [mode](std::span<const double> v, std::size_t i) {
    return mode == Broadcast::kScalarA ? v[0] : v[i];
  };
  auto b_at = [mode](std::span<const double> v, std::size_t i) {
    return mode == Broadcast::kScalarB ? v[0] : v[i];
  };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(a_at(av, i), b_at(bv, i));
  return make_op_result(name, shape, std::move(out), {a, b},
                        [=](std::span<const double> g, std::span<Tensor> in) {
                          auto x = in[0].data();
                          auto y = in[1].data();
                          if (in[0].requires_grad()) {
                            auto ga = in[0].mutable_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              ga[mode == Broadcast::kScalarA ? 0 : i] +=
                                  g[i] * da(a_at(x, i), b_at(y, i));
                            }
                          }
                          if (in[1].requires_grad()) {
                            auto gb = in[1].mutable_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              gb[mode == Broadcast::kScalarB ? 0 : i] +=
                                  g[i] * db(a_at(x, i), b_at(y, i));
                            }
                          }
                        });
}

template <class F, class D>
Tensor unary_op(const char* name, const Tensor& a, F f, D d) {
  auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return make_op_result(name, a.shape(), std::move(out), {a},
                        [=](std::span<const double> g, std::span<Tensor> in) {
                          auto x = in[0].data();
                          auto gx = in[0].mutable_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * d(x[i]);
                        });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary_op(
      "scale", a, [factor](double x) { return factor * x; }, [factor](double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary_op(
      "add_scalar", a, [offset](double x) { return x + offset; }, [](double) { return 1.0; });
}

Tensor sum(const Tensor& a) {
  auto av = a.data();
  const double s = std::accumulate(av.begin(), av.end(), 0.0);
  return make_op_result("sum", Shape{}, {s}, {a}, [](std::span<const double> g, std::span<Tensor> in) {
    for (auto& v : in[0].mutable_grad()) v += g[0];
  });
}

Tensor mean(const Tensor& a) {
  auto av = a.data();
  const double n = static_cast<double>(av.size());
  const double s = std::accumulate(av.begin(), av.end(), 0.0) / n;
  return make_op_result("mean", Shape{}, {s}, {a}, [n](std::span<const double> g, std::span<Tensor> in) {
    for (auto& v : in[0].mutable_grad()) v += g[0] / n;
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  std::vector<double> out(m * p, 0.0);
  blas::gemm(false, false, m, p, k, 1.0, a.data().data(), b.data().data(), 0.0, out.data());
  return make_op_result("matmul", Shape{m, p}, std::move(out), {a, b},
                        [m, k, p](std::span<const double> g, std::span<Tensor> in) {
                          if (in[0].requires_grad()) {
                            // dA = dC * B^T
                            blas::gemm(false, true, m, k, p, 1.0, g.data(), in[1].data().data(), 1.0,
                                       in[0].mutable_grad().data());
                          }
                          if (in[1].requires_grad()) {
                            // dB = A^T * dC
                            blas::gemm(true, false, k, p, m, 1.0, in[0].data().data(), g.data(), 1.0,
                                       in[1].mutable_grad().data());
                          }
                        });
}

Tensor mse(const Tensor& pred, const Tensor& target) {
  require_same_shape("mse", pred, target);
  auto p = pred.data();
  auto t = target.data();
  const double n = static_cast<double>(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    acc += d * d;
  }
  std::vector<double> tv(t.begin(), t.end());
  return make_op_result("mse", Shape{}, {acc / n}, {pred},
                        [tv = std::move(tv), n](std::span<const double> g, std::span<Tensor> in) {
                          auto x = in[0].data();
                          auto gx = in[0].mutable_grad();
                          for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[0] * 2.0 * (x[i] - tv[i]) / n;
                        });
}

Tensor mse(const Tensor& pred, double target) {
  return mse(pred, Tensor(pred.shape(), target));
}

Tensor mae(const Tensor& pred, const Tensor& target) {
  require_same_shape("mae", pred, target);
  auto p = pred.data();
  auto t = target.data();
  const double n = static_cast<double>(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - t[i]);
  std::vector<double> tv(t.begin(), t.end());
  return make_op_result("mae", Shape{}, {acc / n}, {pred},
                        [tv = std::move(tv), n](std::span<const double> g, std::span<Tensor> in) {
                          auto x = in[0].data();
                          auto gx = in[0].mutable_grad();
                          for (std::size_t i = 0; i < x.size(); ++i) {
                            const double d = x[i] - tv[i];
                            const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                            gx[i] += g[0] * s / n;
                          }
                        });
}

Tensor leaky_relu(const Tensor& x, double alpha) {
  return unary_op(
      "leaky_relu", x, [alpha](double v) { return v >= 0.0 ? v : alpha * v; },
      [alpha](double v) { return v >= 0.0 ? 1.0 : alpha; });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() == 0 || a.rank() != b.rank() ||
      !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1)) {
    throw ShapeError("concat_channels: trailing shapes differ " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  Shape shape = a.shape();
  shape[0] += b.dim(0);
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  const std::size_t split = a.size();
  return make_op_result("concat_channels", std::move(shape), std::move(out), {a, b},
                        [split](std::span<const double> g, std::span<Tensor> in) {
                          if (in[0].requires_grad()) {
                            auto ga = in[0].mutable_grad();
                            for (std::size_t i = 0; i < split; ++i) ga[i] += g[i];
                          }
                          if (in[1].requires_grad()) {
                            auto gb = in[1].mutable_grad();
                            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[split + i];
                          }
                        });
}

Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count) {
  if (x.rank() == 0 || begin + count > x.dim(0) || count == 0) {
    throw ShapeError("slice_channels: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + to_string(x.shape()));
  }
  Shape shape = x.shape();
  shape[0] = count;
  const std::size_t stride = x.size() / x.dim(0);
  const std::size_t offset = begin * stride;
  auto xv = x.data();
  std::vector<double> out(xv.begin() + offset, xv.begin() + offset + count * stride);
  return make_op_result("slice_channels", std::move(shape), std::move(out), {x},
                        [offset](std::span<const double> g, std::span<Tensor> in) {
                          auto gx = in[0].mutable_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) gx[offset + i] += g[i];
                        });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_op_result("reshape", std::move(shape), std::move(out), {x},
                        [](std::span<const double> g, std::span<Tensor> in) {
                          auto gx = in[0].mutable_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                        });
}

Tensor transpose2d(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("transpose2d: expected rank 2, got " + to_string(x.shape()));
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = xv[r * cols + c];
  return make_op_result("transpose2d", Shape{cols, rows}, std::move(out), {x},
                        [rows, cols](std::span<const double> g, std::span<Tensor> in) {
                          auto gx = in[0].mutable_grad();
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[c * rows + r];
                        });
}

namespace {

// Calls f(src_flat, dst_flat) for every element of the leading `inner`
// corner shared by two row-major layouts.
template <class F>
void for_each_corner(const Shape& inner, const Shape& src, const Shape& dst, F f) {
  const std::size_t rank = inner.size();
  const std::size_t total = numel(inner);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t n = 0; n < total; ++n) {
    std::size_t s = 0, d = 0;
    for (std::size_t a = 0; a < rank; ++a) {
      s = s * src[a] + idx[a];
      d = d * dst[a] + idx[a];
    }
    f(s, d);
    for (std::size_t a = rank; a-- > 0;) {
      if (++idx[a] < inner[a]) break;
      idx[a] = 0;
    }
  }
}

}  // namespace

Tensor pad_trailing(const Tensor& x, const Shape& shape) {
  if (shape.size() != x.rank()) {
    throw ShapeError("pad_trailing: rank mismatch " + to_string(x.shape()) + " -> " + to_string(shape));
  }
  for (std::size_t a = 0; a < shape.size(); ++a) {
    if (shape[a] < x.dim(a)) {
      throw ShapeError("pad_trailing: target " + to_string(shape) + " smaller than " +
                       to_string(x.shape()));
    }
  }
  if (shape == x.shape()) return x;
  std::vector<double> out(numel(shape), 0.0);
  auto xv = x.data();
  for_each_corner(x.shape(), x.shape(), shape, [&](std::size_t s, std::size_t d) { out[d] = xv[s]; });
  return make_op_result("pad_trailing", shape, std::move(out), {x},
                        [src = x.shape(), dst = shape](std::span<const double> g, std::span<Tensor> in) {
                          auto gx = in[0].mutable_grad();
                          for_each_corner(src, src, dst, [&](std::size_t s, std::size_t d) { gx[s] += g[d]; });
                        });
}

Tensor crop_leading(const Tensor& x, const Shape& shape) {
  if (shape.size() != x.rank()) {
    throw ShapeError("crop_leading: rank mismatch " + to_string(x.shape()) + " -> " + to_string(shape));
  }
  for (std::size_t a = 0; a < shape.size(); ++a) {
    if (shape[a] > x.dim(a) || shape[a] == 0) {
      throw ShapeError("crop_leading: target " + to_string(shape) + " does not fit in " +
                       to_string(x.shape()));
    }
  }
  if (shape == x.shape()) return x;
  std::vector<double> out(numel(shape));
  auto xv = x.data();
  for_each_corner(shape, x.shape(), shape, [&](std::size_t s, std::size_t d) { out[d] = xv[s]; });
  return make_op_result("crop_leading", shape, std::move(out), {x},
                        [src = x.shape(), dst = shape](std::span<const double> g, std::span<Tensor> in) {
                          auto gx = in[0].mutable_grad();
                          for_each_corner(dst, src, dst, [&](std::size_t s, std::size_t d) { gx[s] += g[d]; });
                        });
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids) {
  if (table.rank() != 2) throw ShapeError("embedding_lookup: table must be rank 2, got " + to_string(table.shape()));
  const std::size_t vocab = table.dim(0), width = table.dim(1);
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  std::vector<double> out(rows.size() * width);
  auto tv = table.data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= vocab) {
      throw std::out_of_range("embedding_lookup: id " + std::to_string(rows[r]) +
                              " outside vocabulary of " + std::to_string(vocab));
    }
    std::copy_n(tv.begin() + rows[r] * width, width, out.begin() + r * width);
  }
  return make_op_result("embedding_lookup", Shape{rows.size(), width}, std::move(out), {table},
                        [rows, width](std::span<const double> g, std::span<Tensor> in) {
                          auto gt = in[0].mutable_grad();
                          for (std::size_t r = 0; r < rows.size(); ++r)
                            for (std::size_t j = 0; j < width; ++j) gt[rows[r] * width + j] += g[r * width + j];
                        });
}

Tensor repeat_columns(const Tensor& x, std::span<const std::size_t> repeats) {
  if (x.rank() != 2 || x.dim(1) != repeats.size()) {
    throw ShapeError("repeat_columns: " + to_string(x.shape()) + " needs " +
                     std::to_string(x.rank() == 2 ? x.dim(1) : 0) + " repeat counts, got " +
                     std::to_string(repeats.size()));
  }
  std::vector<std::size_t> source;  // output column -> input column
  for (std::size_t i = 0; i < repeats.size(); ++i) source.insert(source.end(), repeats[i], i);
  const std::size_t rows = x.dim(0), in_cols = x.dim(1), out_cols = source.size();
  if (out_cols == 0) throw ShapeError("repeat_columns: repeats sum to zero");
  auto xv = x.data();
  std::vector<double> out(rows * out_cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < out_cols; ++c) out[r * out_cols + c] = xv[r * in_cols + source[c]];
  return make_op_result("repeat_columns", Shape{rows, out_cols}, std::move(out), {x},
                        [source, rows, in_cols](std::span<const double> g, std::span<Tensor> in) {
                          auto gx = in[0].mutable_grad();
                          const std::size_t out_cols = source.size();
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t c = 0; c < out_cols; ++c) gx[r * in_cols + source[c]] += g[r * out_cols + c];
                        });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() == 0 || bias.rank() != 1 || bias.dim(0) != x.dim(0)) {
    throw ShapeError("add_channel_bias: bias " + to_string(bias.shape()) + " does not match " +
                     to_string(x.shape()));
  }
  const std::size_t channels = x.dim(0);
  const std::size_t plane = x.size() / channels;
  auto xv = x.data();
  auto bv = bias.data();
  std::vector<double> out(xv.begin(), xv.end());
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] += bv[c];
  return make_op_result("add_channel_bias", x.shape(), std::move(out), {x, bias},
                        [channels, plane](std::span<const double> g, std::span<Tensor> in) {
                          if (in[0].requires_grad()) {
                            auto gx = in[0].mutable_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                          }
                          if (in[1].requires_grad()) {
                            auto gb = in[1].mutable_grad();
                            for (std::size_t c = 0; c < channels; ++c)
                              for (std::size_t i = 0; i < plane; ++i) gb[c] += g[c * plane + i];
                          }
                        });
}

Tensor add_row_vector(const Tensor& x, const Tensor& b) {
  if (x.rank() != 2 || b.rank() != 1 || b.dim(0) != x.dim(1)) {
    throw ShapeError("add_row_vector: " + to_string(b.shape()) + " does not match rows of " +
                     to_string(x.shape()));
  }
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  auto xv = x.data();
  auto bv = b.data();
  std::vector<double> out(xv.begin(), xv.end());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[c];
  return make_op_result("add_row_vector", x.shape(), std::move(out), {x, b},
                        [rows, cols](std::span<const double> g, std::span<Tensor> in) {
                          if (in[0].requires_grad()) {
                            auto gx = in[0].mutable_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                          }
                          if (in[1].requires_grad()) {
                            auto gb = in[1].mutable_grad();
                            for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
                          }
                        });
}

}  // namespace specgan
