#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "specgan/conv.hpp"
#include "specgan/ops.hpp"
#include "specgan/random.hpp"
#include "specgan/tensor.hpp"

namespace specgan {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedTensor>;

/// Direction v, magnitude g and bias of one weight-normalized layer.
///
/// Init: v ~ N(0, 2 / fan_in), g = ||v_o|| per output channel, bias = 0, so
/// the effective weight equals v at construction.
struct WeightNormParams {
  Tensor v;     // output channels along `out_axis`
  Tensor g;     // [out]
  Tensor bias;  // [out]
  std::size_t out_axis = 0;

  static WeightNormParams init(Shape v_shape, std::size_t out_axis, std::size_t fan_in, CounterRng& rng);
  Tensor effective_weight() const { return weight_norm(v, g, out_axis); }
  void collect(const std::string& prefix, ParamList& out) const;
};

class Conv2d {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, const ConvGeometry& geom, CounterRng& rng);

  /// x[C,H,W] -> [O,H',W'].
  Tensor forward(const Tensor& x) const { return forward(x, effective_weight()); }
  /// Same, with an effective weight computed earlier by effective_weight().
  Tensor forward(const Tensor& x, const Tensor& weight) const;
  Tensor effective_weight() const { return params_.effective_weight(); }

  std::size_t in_channels() const { return params_.v.dim(1); }
  std::size_t out_channels() const { return params_.v.dim(0); }
  const ConvGeometry& geometry() const { return geom_; }
  WeightNormParams& params() { return params_; }
  const WeightNormParams& params() const { return params_; }
  void collect(const std::string& prefix, ParamList& out) const { params_.collect(prefix, out); }

 private:
  ConvGeometry geom_;
  WeightNormParams params_;
};

class ConvTranspose2d {
 public:
  ConvTranspose2d(std::size_t in_channels, std::size_t out_channels, const ConvGeometry& geom,
                  CounterRng& rng);

  /// Uses the output padding stored in the geometry.
  Tensor forward(const Tensor& x) const;
  /// Picks the output padding that lands exactly on (height, width); throws
  /// ShapeError if no padding in [0, stride) does.
  Tensor forward_to(const Tensor& x, std::size_t height, std::size_t width) const {
    return forward_to(x, height, width, effective_weight());
  }
  Tensor forward_to(const Tensor& x, std::size_t height, std::size_t width, const Tensor& weight) const;
  /// Kernel layout [in, out, kh, kw].
  Tensor effective_weight() const { return params_.effective_weight(); }

  std::size_t in_channels() const { return params_.v.dim(0); }
  std::size_t out_channels() const { return params_.v.dim(1); }
  const ConvGeometry& geometry() const { return geom_; }
  WeightNormParams& params() { return params_; }
  const WeightNormParams& params() const { return params_; }
  void collect(const std::string& prefix, ParamList& out) const { params_.collect(prefix, out); }

 private:
  ConvGeometry geom_;
  WeightNormParams params_;
};

class Conv1d {
 public:
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
         std::size_t pad, CounterRng& rng);

  /// x[C,T] -> [O,T'].
  Tensor forward(const Tensor& x) const { return forward(x, effective_weight()); }
  Tensor forward(const Tensor& x, const Tensor& weight) const;
  Tensor effective_weight() const { return params_.effective_weight(); }

  std::size_t in_channels() const { return params_.v.dim(1); }
  std::size_t out_channels() const { return params_.v.dim(0); }
  /// Equivalent 2-D geometry over [C,T,1] inputs.
  ConvGeometry geometry() const { return {params_.v.dim(2), 1, stride_, 1, pad_, 0, 0, 0}; }
  WeightNormParams& params() { return params_; }
  const WeightNormParams& params() const { return params_; }
  void collect(const std::string& prefix, ParamList& out) const { params_.collect(prefix, out); }

 private:
  std::size_t stride_, pad_;
  WeightNormParams params_;
};

class ConvTranspose1d {
 public:
  ConvTranspose1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
                  std::size_t pad, CounterRng& rng);

  Tensor forward(const Tensor& x, std::size_t out_pad = 0) const { return forward(x, out_pad, effective_weight()); }
  Tensor forward(const Tensor& x, std::size_t out_pad, const Tensor& weight) const;
  Tensor forward_to(const Tensor& x, std::size_t length) const { return forward_to(x, length, effective_weight()); }
  Tensor forward_to(const Tensor& x, std::size_t length, const Tensor& weight) const;
  /// Kernel layout [in, out, k].
  Tensor effective_weight() const { return params_.effective_weight(); }

  std::size_t in_channels() const { return params_.v.dim(0); }
  std::size_t out_channels() const { return params_.v.dim(1); }
  /// Equivalent 2-D geometry over [C,T,1] inputs (output padding 0).
  ConvGeometry geometry() const { return {params_.v.dim(2), 1, stride_, 1, pad_, 0, 0, 0}; }
  WeightNormParams& params() { return params_; }
  const WeightNormParams& params() const { return params_; }
  void collect(const std::string& prefix, ParamList& out) const { params_.collect(prefix, out); }

 private:
  std::size_t stride_, pad_;
  WeightNormParams params_;
};

/// Row lookup table.
class Embedding {
 public:
  Embedding(std::size_t vocab_size, std::size_t dim, CounterRng& rng);

  /// -> [ids.size(), dim]; throws std::out_of_range for ids >= vocab_size.
  Tensor forward(std::span<const std::size_t> ids) const { return embedding_lookup(table_, ids); }

  std::size_t vocab_size() const { return table_.dim(0); }
  std::size_t dim() const { return table_.dim(1); }
  Tensor& table() { return table_; }
  void collect(const std::string& prefix, ParamList& out) const { out.push_back({prefix + ".table", table_}); }

 private:
  Tensor table_;
};

/// x[rows, in] * W[in, out] + b.
class Linear {
 public:
  Linear(std::size_t in_features, std::size_t out_features, CounterRng& rng);

  Tensor forward(const Tensor& x) const;

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  Tensor weight_;
  Tensor bias_;
};

std::size_t parameter_count(const ParamList& params);

}  // namespace specgan
