#include "specgan/layers.hpp"

#include <cmath>

namespace specgan {

WeightNormParams WeightNormParams::init(Shape v_shape, std::size_t out_axis, std::size_t fan_in, CounterRng& rng) {
  WeightNormParams p;
  p.out_axis = out_axis;
  const std::size_t outs = v_shape.at(out_axis);
  const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<double> v(numel(v_shape));
  for (auto& x : v) x = std_dev * rng.normal();
  std::size_t outer = 1;
  for (std::size_t a = 0; a < out_axis; ++a) outer *= v_shape[a];
  const std::size_t inner = v.size() / (outer * outs);
  std::vector<double> sq(outs, 0.0);
  for (std::size_t a = 0; a < outer; ++a)
    for (std::size_t o = 0; o < outs; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        const double x = v[(a * outs + o) * inner + i];
        sq[o] += x * x;
      }
  std::vector<double> g(outs);
  for (std::size_t o = 0; o < outs; ++o) {
    g[o] = std::sqrt(sq[o]);
    if (!(g[o] > 0.0)) throw NumericError("weight norm init produced a zero-norm direction");
  }
  p.v = Tensor(std::move(v_shape), std::move(v));
  p.g = Tensor(Shape{outs}, std::move(g));
  p.bias = Tensor(Shape{outs}, 0.0);
  p.v.set_requires_grad(true);
  p.g.set_requires_grad(true);
  p.bias.set_requires_grad(true);
  return p;
}

void WeightNormParams::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".v", v});
  out.push_back({prefix + ".g", g});
  out.push_back({prefix + ".bias", bias});
}

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, const ConvGeometry& geom, CounterRng& rng)
    : geom_(geom),
      params_(WeightNormParams::init({out_channels, in_channels, geom.kernel_h, geom.kernel_w}, 0,
                                     in_channels * geom.kernel_h * geom.kernel_w, rng)) {}

Tensor Conv2d::forward(const Tensor& x, const Tensor& weight) const {
  return conv2d(x, weight, params_.bias, geom_);
}

ConvTranspose2d::ConvTranspose2d(std::size_t in_channels, std::size_t out_channels, const ConvGeometry& geom,
                                 CounterRng& rng)
    : geom_(geom),
      params_(WeightNormParams::init({in_channels, out_channels, geom.kernel_h, geom.kernel_w}, 1,
                                     in_channels * geom.kernel_h * geom.kernel_w, rng)) {}

Tensor ConvTranspose2d::forward(const Tensor& x) const {
  return conv_transpose2d(x, effective_weight(), params_.bias, geom_);
}


Tensor ConvTranspose2d::forward_to(const Tensor& x, std::size_t height, std::size_t width,
                                   const Tensor& weight) const {
  if (x.rank() != 3) throw ShapeError("ConvTranspose2d: input must be [C,H,W], got " + to_string(x.shape()));
  ConvGeometry g = geom_;
  g.out_pad_h = output_padding_for(x.dim(1), height, g.kernel_h, g.stride_h, g.pad_h, "height");
  g.out_pad_w = output_padding_for(x.dim(2), width, g.kernel_w, g.stride_w, g.pad_w, "width");
  return conv_transpose2d(x, weight, params_.bias, g);
}

Conv1d::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
               std::size_t pad, CounterRng& rng)
    : stride_(stride),
      pad_(pad),
      params_(WeightNormParams::init({out_channels, in_channels, kernel}, 0, in_channels * kernel, rng)) {}

Tensor Conv1d::forward(const Tensor& x, const Tensor& weight) const {
  return conv1d(x, weight, params_.bias, stride_, pad_);
}

ConvTranspose1d::ConvTranspose1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                                 std::size_t stride, std::size_t pad, CounterRng& rng)
    : stride_(stride),
      pad_(pad),
      params_(WeightNormParams::init({in_channels, out_channels, kernel}, 1, in_channels * kernel, rng)) {}

Tensor ConvTranspose1d::forward(const Tensor& x, std::size_t out_pad, const Tensor& weight) const {
  return conv_transpose1d(x, weight, params_.bias, stride_, pad_, out_pad);
}

Tensor ConvTranspose1d::forward_to(const Tensor& x, std::size_t length, const Tensor& weight) const {
  if (x.rank() != 2) throw ShapeError("ConvTranspose1d: input must be [C,T], got " + to_string(x.shape()));
  return forward(x, output_padding_for(x.dim(1), length, params_.v.dim(2), stride_, pad_, "time"), weight);
}

Embedding::Embedding(std::size_t vocab_size, std::size_t dim, CounterRng& rng) {
  std::vector<double> values(vocab_size * dim);
  for (auto& v : values) v = rng.normal();
  table_ = Tensor(Shape{vocab_size, dim}, std::move(values));
  table_.set_requires_grad(true);
}

Linear::Linear(std::size_t in_features, std::size_t out_features, CounterRng& rng) {
  const double std_dev = 1.0 / std::sqrt(static_cast<double>(in_features));
  std::vector<double> w(in_features * out_features);
  for (auto& v : w) v = std_dev * rng.normal();
  weight_ = Tensor(Shape{in_features, out_features}, std::move(w));
  bias_ = Tensor(Shape{out_features}, 0.0);
  weight_.set_requires_grad(true);
  bias_.set_requires_grad(true);
}

Tensor Linear::forward(const Tensor& x) const { return add_row_vector(matmul(x, weight_), bias_); }

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight_});
  out.push_back({prefix + ".bias", bias_});
}

std::size_t parameter_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.size();
  return n;
}

}  // namespace specgan
