#include "specgan/conv.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "specgan/blas.hpp"
#include "specgan/ops.hpp"

namespace specgan {

namespace {

struct Plane {
  std::size_t channels, height, width;
};

// cols[(c,ki,kj), (oi,oj)] = x[c, oi*sh - ph + ki, oj*sw - pw + kj], zero outside.
// Channel c of x starts at x + c * x_stride; row r of cols at cols + r * ld.
void im2col(const double* x, Plane in, std::size_t x_stride, const ConvGeometry& g, std::size_t out_h,
            std::size_t out_w, double* cols, std::size_t ld) {
  for (std::size_t c = 0; c < in.channels; ++c) {
    const double* xc = x + c * x_stride;
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
        double* row = cols + ((c * g.kernel_h + ki) * g.kernel_w + kj) * ld;
        // Output columns whose source column lies inside the input.
        const auto off = static_cast<std::ptrdiff_t>(kj) - static_cast<std::ptrdiff_t>(g.pad_w);
        std::size_t lo = 0, hi = out_w;
        while (lo < hi && static_cast<std::ptrdiff_t>(lo * g.stride_w) + off < 0) ++lo;
        while (hi > lo && static_cast<std::ptrdiff_t>((hi - 1) * g.stride_w) + off >= static_cast<std::ptrdiff_t>(in.width)) --hi;
        for (std::size_t oi = 0; oi < out_h; ++oi) {
          const auto ii = static_cast<std::ptrdiff_t>(oi * g.stride_h + ki) - static_cast<std::ptrdiff_t>(g.pad_h);
          double* dst = row + oi * out_w;
          if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(in.height)) {
            std::fill_n(dst, out_w, 0.0);
            continue;
          }
          const double* src = xc + static_cast<std::size_t>(ii) * in.width + off;
          std::fill(dst, dst + lo, 0.0);
          if (g.stride_w == 1) {
            std::copy(src + lo, src + hi, dst + lo);
          } else {
            for (std::size_t oj = lo; oj < hi; ++oj) dst[oj] = src[oj * g.stride_w];
          }
          std::fill(dst + hi, dst + out_w, 0.0);
        }
      }
    }
  }
}

// Adjoint of im2col: scatters cols back into x (accumulating).
void col2im(const double* cols, std::size_t ld, Plane in, std::size_t x_stride, const ConvGeometry& g,
            std::size_t out_h, std::size_t out_w, double* x) {
  for (std::size_t c = 0; c < in.channels; ++c) {
    double* xc = x + c * x_stride;
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
        const double* row = cols + ((c * g.kernel_h + ki) * g.kernel_w + kj) * ld;
        const auto off = static_cast<std::ptrdiff_t>(kj) - static_cast<std::ptrdiff_t>(g.pad_w);
        std::size_t lo = 0, hi = out_w;
        while (lo < hi && static_cast<std::ptrdiff_t>(lo * g.stride_w) + off < 0) ++lo;
        while (hi > lo && static_cast<std::ptrdiff_t>((hi - 1) * g.stride_w) + off >= static_cast<std::ptrdiff_t>(in.width)) --hi;
        for (std::size_t oi = 0; oi < out_h; ++oi) {
          const auto ii = static_cast<std::ptrdiff_t>(oi * g.stride_h + ki) - static_cast<std::ptrdiff_t>(g.pad_h);
          if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(in.height)) continue;
          double* dst = xc + static_cast<std::size_t>(ii) * in.width + off;
          const double* src = row + oi * out_w;
          for (std::size_t oj = lo; oj < hi; ++oj) dst[oj * g.stride_w] += src[oj];
        }
      }
    }
  }
}

void check_conv_operands(const char* op, const Tensor& x, const Tensor& weight, const Tensor& bias,
                         const ConvGeometry& g, std::size_t x_channels_axis_w) {
  // x_channels_axis_w: which weight axis holds the input channels (1 for conv, 0 for transposed).
  if (!x.defined() || x.rank() != 3) {
    throw ShapeError(std::string(op) + ": input must be [C,H,W], got " +
                     (x.defined() ? to_string(x.shape()) : std::string("undefined")));
  }
  if (weight.rank() != 4 || weight.dim(2) != g.kernel_h || weight.dim(3) != g.kernel_w) {
    throw ShapeError(std::string(op) + ": weight " + to_string(weight.shape()) + " does not match kernel " +
                     std::to_string(g.kernel_h) + "x" + std::to_string(g.kernel_w));
  }
  if (weight.dim(x_channels_axis_w) != x.dim(0)) {
    throw ShapeError(std::string(op) + ": channel mismatch, input " + to_string(x.shape()) + " vs weight " +
                     to_string(weight.shape()));
  }
  const std::size_t out_channels = weight.dim(1 - x_channels_axis_w);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_channels)) {
    throw ShapeError(std::string(op) + ": bias " + to_string(bias.shape()) + " vs " +
                     std::to_string(out_channels) + " output channels");
  }
  if (g.stride_h == 0 || g.stride_w == 0) throw ShapeError(std::string(op) + ": zero stride");
  if (x_channels_axis_w == 0 && ((g.out_pad_h >= g.stride_h && g.out_pad_h > 0) ||
                                 (g.out_pad_w >= g.stride_w && g.out_pad_w > 0))) {
    throw ShapeError(std::string(op) + ": output padding must be < stride");
  }
}

// One batch item: input plane, output plane, geometry and column offsets
// into the packed input / output matrices.
struct Item {
  Plane in, out;
  ConvGeometry geom;
  std::size_t in_offset, out_offset;
};

void add_bias_rows(const Tensor& bias, std::size_t rows, std::size_t cols, double* out) {
  if (!bias.defined()) return;
  auto b = bias.data();
  for (std::size_t o = 0; o < rows; ++o)
    for (std::size_t p = 0; p < cols; ++p) out[o * cols + p] += b[o];
}

void bias_grad_rows(std::span<const double> gy, std::size_t rows, std::size_t cols, Tensor& bias) {
  auto gb = bias.mutable_grad();
  for (std::size_t o = 0; o < rows; ++o) {
    double acc = 0.0;
    for (std::size_t p = 0; p < cols; ++p) acc += gy[o * cols + p];
    gb[o] += acc;
  }
}

bool any_requires_grad(std::span<Tensor> ops, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (ops[i].requires_grad()) return true;
  return false;
}

// Output [O, sum of output positions]; item i occupies its own column block.
Tensor conv_forward(const char* op, const std::vector<Tensor>& xs, const std::vector<Item>& items,
                    const Tensor& weight, const Tensor& bias, Shape out_shape) {
  const std::size_t n = xs.size();
  const std::size_t outs = weight.dim(0);
  const ConvGeometry g = items[0].geom;
  const std::size_t patch = weight.dim(1) * g.kernel_h * g.kernel_w;
  const std::size_t total = items.back().out_offset + items.back().out.height * items.back().out.width;

  auto cols = std::make_shared<std::vector<double>>(patch * total);
  for (std::size_t i = 0; i < n; ++i) {
    const Item& it = items[i];
    im2col(xs[i].data().data(), it.in, it.in.height * it.in.width, g, it.out.height, it.out.width,
           cols->data() + it.out_offset, total);
  }
  std::vector<double> out(outs * total);
  blas::gemm(false, false, outs, total, patch, 1.0, weight.data().data(), cols->data(), 0.0, out.data());
  add_bias_rows(bias, outs, total, out.data());

  // The patch matrix is only reused for the weight gradient.
  if (!(grad_enabled() && weight.requires_grad())) cols.reset();
  std::vector<Tensor> inputs = xs;
  inputs.push_back(weight);
  if (bias.defined()) inputs.push_back(bias);
  return make_op_result(
      op, std::move(out_shape), std::move(out), std::move(inputs),
      [=](std::span<const double> gy, std::span<Tensor> ops) {
        const Tensor& w = ops[n];
        if (w.requires_grad()) {
          std::vector<double> fresh;
          const double* c = cols ? cols->data() : nullptr;
          if (!c) {
            fresh.resize(patch * total);
            for (std::size_t i = 0; i < n; ++i) {
              const Item& it = items[i];
              im2col(ops[i].data().data(), it.in, it.in.height * it.in.width, g, it.out.height, it.out.width,
                     fresh.data() + it.out_offset, total);
            }
            c = fresh.data();
          }
          blas::gemm(false, true, outs, patch, total, 1.0, gy.data(), c, 1.0, ops[n].mutable_grad().data());
        }
        if (any_requires_grad(ops, n)) {
          std::vector<double> c(patch * total);
          blas::gemm(true, false, patch, total, outs, 1.0, w.data().data(), gy.data(), 0.0, c.data());
          for (std::size_t i = 0; i < n; ++i) {
            if (!ops[i].requires_grad()) continue;
            const Item& it = items[i];
            col2im(c.data() + it.out_offset, total, it.in, it.in.height * it.in.width, g, it.out.height,
                   it.out.width, ops[i].mutable_grad().data());
          }
        }
        if (ops.size() > n + 1 && ops[n + 1].requires_grad()) bias_grad_rows(gy, outs, total, ops[n + 1]);
      });
}

// Transposed counterpart: item i reads input columns [in_offset, +h*w) of the
// packed input and writes output columns [out_offset, +H*W).
Tensor conv_transpose_forward(const char* op, const std::vector<Tensor>& xs, const std::vector<Item>& items,
                              const Tensor& weight, const Tensor& bias, Shape out_shape) {
  const std::size_t n = xs.size();
  const std::size_t ins = weight.dim(0), outs = weight.dim(1);
  const std::size_t patch = outs * weight.dim(2) * weight.dim(3);
  const std::size_t in_total = items.back().in_offset + items.back().in.height * items.back().in.width;
  const std::size_t out_total = items.back().out_offset + items.back().out.height * items.back().out.width;

  // Packed input [C, in_total]; a single item is used in place.
  std::shared_ptr<std::vector<double>> packed;
  const double* xp = xs[0].data().data();
  if (n > 1) {
    packed = std::make_shared<std::vector<double>>(ins * in_total);
    for (std::size_t i = 0; i < n; ++i) {
      const Item& it = items[i];
      const std::size_t pos = it.in.height * it.in.width;
      auto xd = xs[i].data();
      for (std::size_t c = 0; c < ins; ++c)
        std::copy_n(xd.data() + c * pos, pos, packed->data() + c * in_total + it.in_offset);
    }
    xp = packed->data();
  }

  // The weight viewed as [C, O*kh*kw]; cols = W^T x, then scatter.
  std::vector<double> cols(patch * in_total);
  blas::gemm(true, false, patch, in_total, ins, 1.0, weight.data().data(), xp, 0.0, cols.data());
  std::vector<double> out(outs * out_total, 0.0);
  for (const Item& it : items) {
    col2im(cols.data() + it.in_offset, in_total, it.out, out_total, it.geom, it.in.height, it.in.width,
           out.data() + it.out_offset);
  }
  add_bias_rows(bias, outs, out_total, out.data());

  if (!(grad_enabled() && weight.requires_grad())) packed.reset();
  std::vector<Tensor> inputs = xs;
  inputs.push_back(weight);
  if (bias.defined()) inputs.push_back(bias);
  return make_op_result(
      op, std::move(out_shape), std::move(out), std::move(inputs),
      [=](std::span<const double> gy, std::span<Tensor> ops) {
        const bool need_w = ops[n].requires_grad();
        const bool need_x = any_requires_grad(ops, n);
        if (need_w || need_x) {
          std::vector<double> c(patch * in_total);
          for (const Item& it : items) {
            im2col(gy.data() + it.out_offset, it.out, out_total, it.geom, it.in.height, it.in.width,
                   c.data() + it.in_offset, in_total);
          }
          if (need_x) {
            if (n == 1) {
              blas::gemm(false, false, ins, in_total, patch, 1.0, ops[n].data().data(), c.data(), 1.0,
                         ops[0].mutable_grad().data());
            } else {
              std::vector<double> gx(ins * in_total);
              blas::gemm(false, false, ins, in_total, patch, 1.0, ops[n].data().data(), c.data(), 0.0, gx.data());
              for (std::size_t i = 0; i < n; ++i) {
                if (!ops[i].requires_grad()) continue;
                const Item& it = items[i];
                const std::size_t pos = it.in.height * it.in.width;
                auto gi = ops[i].mutable_grad();
                for (std::size_t ch = 0; ch < ins; ++ch) {
                  const double* src = gx.data() + ch * in_total + it.in_offset;
                  for (std::size_t p = 0; p < pos; ++p) gi[ch * pos + p] += src[p];
                }
              }
            }
          }
          if (need_w) {
            std::vector<double> fresh;
            const double* x = n == 1 ? ops[0].data().data() : (packed ? packed->data() : nullptr);
            if (!x) {
              fresh.resize(ins * in_total);
              for (std::size_t i = 0; i < n; ++i) {
                const Item& it = items[i];
                const std::size_t pos = it.in.height * it.in.width;
                for (std::size_t ch = 0; ch < ins; ++ch)
                  std::copy_n(ops[i].data().data() + ch * pos, pos, fresh.data() + ch * in_total + it.in_offset);
              }
              x = fresh.data();
            }
            blas::gemm(false, true, ins, patch, in_total, 1.0, x, c.data(), 1.0, ops[n].mutable_grad().data());
          }
        }
        if (ops.size() > n + 1 && ops[n + 1].requires_grad()) bias_grad_rows(gy, outs, out_total, ops[n + 1]);
      });
}

std::vector<Item> conv_items(const char* op, std::span<const Tensor> xs, const Tensor& weight, const Tensor& bias,
                             const ConvGeometry& g) {
  if (xs.empty()) throw ShapeError(std::string(op) + ": empty batch");
  std::vector<Item> items;
  std::size_t in_off = 0, out_off = 0;
  for (const auto& x : xs) {
    check_conv_operands(op, x, weight, bias, g, 1);
    Item it{{x.dim(0), x.dim(1), x.dim(2)},
            {weight.dim(0), conv_output_size(x.dim(1), g.kernel_h, g.stride_h, g.pad_h, "height"),
             conv_output_size(x.dim(2), g.kernel_w, g.stride_w, g.pad_w, "width")},
            g, in_off, out_off};
    in_off += it.in.height * it.in.width;
    out_off += it.out.height * it.out.width;
    items.push_back(it);
  }
  return items;
}

std::vector<Item> conv_transpose_items(const char* op, std::span<const Tensor> xs, const Tensor& weight,
                                       const Tensor& bias, std::span<const ConvGeometry> geoms) {
  if (xs.empty()) throw ShapeError(std::string(op) + ": empty batch");
  if (geoms.size() != xs.size()) throw ShapeError(std::string(op) + ": one geometry per item required");
  std::vector<Item> items;
  std::size_t in_off = 0, out_off = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Tensor& x = xs[i];
    const ConvGeometry& g = geoms[i];
    check_conv_operands(op, x, weight, bias, g, 0);
    if (g.kernel_h != geoms[0].kernel_h || g.kernel_w != geoms[0].kernel_w) {
      throw ShapeError(std::string(op) + ": items must share one kernel size");
    }
    Item it{{x.dim(0), x.dim(1), x.dim(2)},
            {weight.dim(1), conv_transpose_output_size(x.dim(1), g.kernel_h, g.stride_h, g.pad_h, g.out_pad_h, "height"),
             conv_transpose_output_size(x.dim(2), g.kernel_w, g.stride_w, g.pad_w, g.out_pad_w, "width")},
            g, in_off, out_off};
    in_off += it.in.height * it.in.width;
    out_off += it.out.height * it.out.width;
    items.push_back(it);
  }
  return items;
}

std::vector<Shape> item_shapes(const std::vector<Item>& items) {
  std::vector<Shape> shapes;
  for (const auto& it : items) shapes.push_back({it.out.channels, it.out.height, it.out.width});
  return shapes;
}

std::size_t packed_columns(const std::vector<Item>& items) {
  return items.back().out_offset + items.back().out.height * items.back().out.width;
}

}  // namespace

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad,
                             const char* axis) {
  if (in + 2 * pad < kernel) {
    throw ShapeError(std::string("degenerate ") + axis + " axis: size " + std::to_string(in) +
                     " with padding " + std::to_string(pad) + " is smaller than kernel " + std::to_string(kernel));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

std::size_t conv_transpose_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                                       std::size_t pad, std::size_t out_pad, const char* axis) {
  const std::size_t full = (in - 1) * stride + kernel + out_pad;
  if (in == 0 || full <= 2 * pad) {
    throw ShapeError(std::string("degenerate ") + axis + " axis in transposed convolution: input " +
                     std::to_string(in));
  }
  return full - 2 * pad;
}

std::size_t output_padding_for(std::size_t in, std::size_t target, std::size_t kernel, std::size_t stride,
                               std::size_t pad, const char* axis) {
  const std::size_t base = conv_transpose_output_size(in, kernel, stride, pad, 0, axis);
  if (target < base || target - base >= std::max<std::size_t>(stride, 1)) {
    throw ShapeError(std::string("transposed convolution cannot reach ") + axis + " " + std::to_string(target) +
                     " from input " + std::to_string(in) + " (natural size " + std::to_string(base) + ")");
  }
  return target - base;
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvGeometry& g) {
  auto items = conv_items("conv2d", std::span(&x, 1), weight, bias, g);
  Shape shape = item_shapes(items)[0];
  return conv_forward("conv2d", {x}, items, weight, bias, std::move(shape));
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvGeometry& g) {
  auto items = conv_transpose_items("conv_transpose2d", std::span(&x, 1), weight, bias, std::span(&g, 1));
  Shape shape = item_shapes(items)[0];
  return conv_transpose_forward("conv_transpose2d", {x}, items, weight, bias, std::move(shape));
}

PackedBatch conv2d_packed(std::span<const Tensor> xs, const Tensor& weight, const Tensor& bias,
                          const ConvGeometry& geom) {
  auto items = conv_items("conv2d_packed", xs, weight, bias, geom);
  PackedBatch out;
  out.shapes = item_shapes(items);
  out.values = conv_forward("conv2d_packed", std::vector<Tensor>(xs.begin(), xs.end()), items, weight, bias,
                            Shape{weight.dim(0), packed_columns(items)});
  return out;
}

PackedBatch conv_transpose2d_packed(std::span<const Tensor> xs, const Tensor& weight, const Tensor& bias,
                                    std::span<const ConvGeometry> geoms) {
  auto items = conv_transpose_items("conv_transpose2d_packed", xs, weight, bias, geoms);
  PackedBatch out;
  out.shapes = item_shapes(items);
  out.values = conv_transpose_forward("conv_transpose2d_packed", std::vector<Tensor>(xs.begin(), xs.end()), items,
                                      weight, bias, Shape{weight.dim(1), packed_columns(items)});
  return out;
}

std::vector<Tensor> unpack(const PackedBatch& batch) {
  const Tensor& packed = batch.values;
  if (packed.rank() != 2) throw ShapeError("unpack: packed values must be [C,P], got " + to_string(packed.shape()));
  const std::size_t channels = packed.dim(0), total = packed.dim(1);
  std::vector<Tensor> out;
  std::size_t offset = 0;
  for (const auto& shape : batch.shapes) {
    if (shape.empty() || shape[0] != channels) {
      throw ShapeError("unpack: item shape " + to_string(shape) + " does not have " + std::to_string(channels) +
                       " channels");
    }
    const std::size_t pos = numel(shape) / channels;
    if (offset + pos > total) throw ShapeError("unpack: item shapes exceed the packed columns");
    std::vector<double> values(channels * pos);
    auto src = packed.data();
    for (std::size_t c = 0; c < channels; ++c)
      std::copy_n(src.data() + c * total + offset, pos, values.data() + c * pos);
    out.push_back(make_op_result("unpack", shape, std::move(values), {packed},
                                 [=](std::span<const double> gy, std::span<Tensor> in) {
                                   auto g = in[0].mutable_grad();
                                   for (std::size_t c = 0; c < channels; ++c)
                                     for (std::size_t p = 0; p < pos; ++p) g[c * total + offset + p] += gy[c * pos + p];
                                 }));
    offset += pos;
  }
  if (offset != total) throw ShapeError("unpack: item shapes do not cover the packed columns");
  return out;
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride, std::size_t pad) {
  if (x.rank() != 2) throw ShapeError("conv1d: input must be [C,T], got " + to_string(x.shape()));
  if (weight.rank() != 3) throw ShapeError("conv1d: weight must be [O,C,k], got " + to_string(weight.shape()));
  const ConvGeometry g{weight.dim(2), 1, stride, 1, pad, 0, 0, 0};
  auto y = conv2d(reshape(x, {x.dim(0), x.dim(1), 1}),
                  reshape(weight, {weight.dim(0), weight.dim(1), weight.dim(2), 1}), bias, g);
  return reshape(y, {y.dim(0), y.dim(1)});
}

Tensor conv_transpose1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
                        std::size_t pad, std::size_t out_pad) {
  if (x.rank() != 2) throw ShapeError("conv_transpose1d: input must be [C,T], got " + to_string(x.shape()));
  if (weight.rank() != 3) throw ShapeError("conv_transpose1d: weight must be [C,O,k], got " + to_string(weight.shape()));
  const ConvGeometry g{weight.dim(2), 1, stride, 1, pad, 0, out_pad, 0};
  auto y = conv_transpose2d(reshape(x, {x.dim(0), x.dim(1), 1}),
                            reshape(weight, {weight.dim(0), weight.dim(1), weight.dim(2), 1}), bias, g);
  return reshape(y, {y.dim(0), y.dim(1)});
}

Tensor weight_norm(const Tensor& v, const Tensor& g, std::size_t axis) {
  if (axis >= v.rank() || g.rank() != 1 || g.dim(0) != v.dim(axis)) {
    throw ShapeError("weight_norm: magnitude " + to_string(g.shape()) + " does not match direction " +
                     to_string(v.shape()) + " along axis " + std::to_string(axis));
  }
  // View v as [outer, O, inner]; slice o is v[:, o, :].
  const std::size_t outs = v.dim(axis);
  std::size_t outer = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= v.dim(a);
  const std::size_t inner = v.size() / (outer * outs);
  auto vv = v.data();
  auto gv = g.data();
  std::vector<double> sq(outs, 0.0);
  for (std::size_t a = 0; a < outer; ++a)
    for (std::size_t o = 0; o < outs; ++o) {
      const double* row = vv.data() + (a * outs + o) * inner;
      double acc = 0.0;
      for (std::size_t i = 0; i < inner; ++i) acc += row[i] * row[i];
      sq[o] += acc;
    }
  std::vector<double> norms(outs), factor(outs);
  for (std::size_t o = 0; o < outs; ++o) {
    norms[o] = std::sqrt(sq[o]);
    if (!(norms[o] > 0.0)) {
      throw NumericError("weight_norm: direction of output channel " + std::to_string(o) + " has zero norm");
    }
    factor[o] = gv[o] / norms[o];
  }
  std::vector<double> out(v.size());
  for (std::size_t a = 0; a < outer; ++a)
    for (std::size_t o = 0; o < outs; ++o) {
      const std::size_t base = (a * outs + o) * inner;
      for (std::size_t i = 0; i < inner; ++i) out[base + i] = factor[o] * vv[base + i];
    }
  return make_op_result(
      "weight_norm", v.shape(), std::move(out), {v, g},
      [outer, outs, inner, norms](std::span<const double> gw, std::span<Tensor> in) {
        auto vd = in[0].data();
        auto gd = in[1].data();
        std::vector<double> dot(outs, 0.0);
        for (std::size_t a = 0; a < outer; ++a)
          for (std::size_t o = 0; o < outs; ++o) {
            const std::size_t base = (a * outs + o) * inner;
            double acc = 0.0;
            for (std::size_t i = 0; i < inner; ++i) acc += gw[base + i] * vd[base + i];
            dot[o] += acc;
          }
        if (in[1].requires_grad()) {
          auto gg = in[1].mutable_grad();
          for (std::size_t o = 0; o < outs; ++o) gg[o] += dot[o] / norms[o];
        }
        if (in[0].requires_grad()) {
          // dv = (g/n) dw - (g * <dw,v> / n^3) v
          auto gv = in[0].mutable_grad();
          for (std::size_t a = 0; a < outer; ++a)
            for (std::size_t o = 0; o < outs; ++o) {
              const double n = norms[o];
              const double s1 = gd[o] / n;
              const double s2 = gd[o] * dot[o] / (n * n * n);
              const std::size_t base = (a * outs + o) * inner;
              for (std::size_t i = 0; i < inner; ++i) gv[base + i] += s1 * gw[base + i] - s2 * vd[base + i];
            }
        }
      });
}

}  // namespace specgan
