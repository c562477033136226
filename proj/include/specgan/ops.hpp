#pragma once

#include <cstddef>
#include <span>

#include "specgan/tensor.hpp"

namespace specgan {

// Elementwise arithmetic. Operands must have identical shapes, or one side
// must be a single-element tensor (scalar broadcast).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// a[M,K] * b[K,P] -> [M,P].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Mean squared error; `target` is a constant (no gradient flows into it).
Tensor mse(const Tensor& pred, const Tensor& target);
/// MSE against a constant map filled with `target`.
Tensor mse(const Tensor& pred, double target);
/// Mean absolute error; subgradient 0 at exact ties. `target` is constant.
Tensor mae(const Tensor& pred, const Tensor& target);

Tensor leaky_relu(const Tensor& x, double alpha);

/// Concatenates along axis 0. Trailing dims must match.
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Rows [begin, begin + count) of axis 0.
Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count);

Tensor reshape(const Tensor& x, Shape shape);
/// [A,B] -> [B,A].
Tensor transpose2d(const Tensor& x);

/// Zero-pads each axis at its trailing edge up to `shape`.
Tensor pad_trailing(const Tensor& x, const Shape& shape);
/// Keeps the leading `shape` corner of every axis.
Tensor crop_leading(const Tensor& x, const Shape& shape);

/// Gathers rows of table[V,D] -> [ids.size(), D].
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids);

/// x[C,L] -> [C, sum(repeats)], column i repeated repeats[i] times.
Tensor repeat_columns(const Tensor& x, std::span<const std::size_t> repeats);

/// Adds bias[C] to every position of x[C, ...].
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);
/// Adds b[C] to every row of x[R,C].
Tensor add_row_vector(const Tensor& x, const Tensor& b);

}  // namespace specgan
