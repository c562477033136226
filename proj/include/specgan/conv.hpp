#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "specgan/tensor.hpp"

namespace specgan {

/// Kernel, stride, padding and (transposed only) output padding per axis.
struct ConvGeometry {
  std::size_t kernel_h = 1, kernel_w = 1;
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_h = 0, pad_w = 0;
  std::size_t out_pad_h = 0, out_pad_w = 0;
};

/// floor((in + 2p - k) / s) + 1; throws ShapeError naming `axis` when the
/// padded input is smaller than the kernel.
std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad,
                             const char* axis);
/// (in - 1) * s - 2p + k + output_padding.
std::size_t conv_transpose_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                                       std::size_t pad, std::size_t out_pad, const char* axis);
/// Output padding in [0, stride) that makes a transposed convolution of an
/// `in`-sized axis produce exactly `target`; throws ShapeError if none does.
std::size_t output_padding_for(std::size_t in, std::size_t target, std::size_t kernel, std::size_t stride,
                               std::size_t pad, const char* axis);

/// Cross-correlation of x[C,H,W] with weight[O,C,kh,kw], plus bias[O] when
/// `bias` is defined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvGeometry& geom);

/// Transposed convolution of x[C,H,W] with weight[C,O,kh,kw] -> [O,H',W'].
/// The weight layout is the one of the conv2d whose input-gradient this op
/// computes, so a conv2d kernel can be passed here unchanged.
Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                        const ConvGeometry& geom);

/// Batch items stored side by side as [C, sum_i P_i]. Item i has shape
/// shapes[i] = [C, H_i, W_i] and occupies P_i = H_i * W_i columns, after the
/// columns of items 0..i-1.
struct PackedBatch {
  Tensor values;
  std::vector<Shape> shapes;
};

/// conv2d over every item of a batch with one shared kernel; items may
/// differ in height and width. Equivalent to per-item conv2d, but runs one
/// matrix product for the whole batch.
PackedBatch conv2d_packed(std::span<const Tensor> xs, const Tensor& weight, const Tensor& bias,
                          const ConvGeometry& geom);
/// conv_transpose2d over a batch; each item has its own geometry so output
/// padding can differ (kernel sizes must agree).
PackedBatch conv_transpose2d_packed(std::span<const Tensor> xs, const Tensor& weight, const Tensor& bias,
                                    std::span<const ConvGeometry> geoms);
/// Splits a packed batch back into per-item tensors.
std::vector<Tensor> unpack(const PackedBatch& batch);

/// 1-D forms over x[C,T] with weight[O,C,k] (conv) or [C,O,k] (transposed).
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad);
Tensor conv_transpose1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
                        std::size_t pad, std::size_t out_pad);

/// w_o = g_o * v_o / ||v_o||, where v_o is the slice of v at index o along
/// `axis` (0 for conv kernels, 1 for transposed-conv kernels).
Tensor weight_norm(const Tensor& v, const Tensor& g, std::size_t axis = 0);

}  // namespace specgan
