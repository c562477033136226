#include "specgan/discriminator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "specgan/ops.hpp"

namespace specgan {

Spectrogram::Spectrogram(Tensor values) : values_(std::move(values)) {
  if (!values_.defined() || values_.rank() != 3 || values_.dim(0) != 1 || values_.dim(1) == 0 ||
      values_.dim(2) == 0) {
    throw ShapeError("spectrogram must be [1,T,N], got " +
                     (values_.defined() ? to_string(values_.shape()) : std::string("undefined")));
  }
  for (double v : values_.data()) {
    if (!std::isfinite(v)) throw NumericError("spectrogram contains a non-finite value");
  }
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kSingleScaleTime:
      return "s-t";
    case Variant::kMultiScaleTime:
      return "m-t";
    case Variant::kMultiScaleTimeFrequency:
      return "m-tf";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "s-t") return Variant::kSingleScaleTime;
  if (s == "m-t") return Variant::kMultiScaleTime;
  if (s == "m-tf") return Variant::kMultiScaleTimeFrequency;
  throw ConfigError("unknown discriminator variant '" + std::string(text) + "' (expected s-t, m-t or m-tf)");
}

std::size_t DiscriminatorConfig::reduction() const {
  std::size_t r = 1;
  for (auto s : strides) r *= s;
  return r;
}

void DiscriminatorConfig::validate() const {
  if (strides.empty()) throw ConfigError("discriminator needs at least one encoder stage");
  if (channels.size() != strides.size() + 1) {
    throw ConfigError("discriminator channels must list the input width plus one width per stride (" +
                      std::to_string(strides.size() + 1) + " values), got " + std::to_string(channels.size()));
  }
  if (std::any_of(channels.begin(), channels.end(), [](auto c) { return c == 0; })) {
    throw ConfigError("discriminator channel widths must be positive");
  }
  if (std::any_of(strides.begin(), strides.end(), [](auto s) { return s == 0; })) {
    throw ConfigError("discriminator strides must be positive");
  }
  if (reduction() != 8) {
    throw ConfigError("product of discriminator encoder strides must be 8, got " + std::to_string(reduction()));
  }
  if (kernel == 0 || input_kernel % 2 == 0 || head_kernel % 2 == 0) {
    throw ConfigError("discriminator input/head kernels must be odd and the stage kernel positive");
  }
  if (!(leaky_alpha >= 0.0) || !std::isfinite(leaky_alpha)) throw ConfigError("leaky_alpha must be >= 0");
  if (variant != Variant::kMultiScaleTimeFrequency && mel_bins == 0) {
    throw ConfigError("1-D discriminator variants need mel_bins > 0");
  }
}

Discriminator Discriminator::build(const DiscriminatorConfig& config, std::uint64_t seed) {
  config.validate();
  Discriminator d(config);
  CounterRng rng(hash_key(seed, 0xD15C, 0));
  const auto& ch = config.channels;
  const std::size_t stages = config.strides.size();
  const bool unet = has_decoder(config.variant);

  if (config.variant == Variant::kMultiScaleTimeFrequency) {
    const std::size_t ip = config.input_kernel / 2, hp = config.head_kernel / 2;
    const ConvGeometry input_geom{config.input_kernel, config.input_kernel, 1, 1, ip, ip, 0, 0};
    const ConvGeometry head_geom{config.head_kernel, config.head_kernel, 1, 1, hp, hp, 0, 0};
    d.conv2d_.emplace_back(1, ch[0], input_geom, rng);
    for (std::size_t i = 0; i < stages; ++i) {
      const std::size_t s = config.strides[i];
      d.conv2d_.emplace_back(ch[i], ch[i + 1],
                             ConvGeometry{config.kernel, config.kernel, s, s, config.padding, config.padding, 0, 0},
                             rng);
    }
    d.conv2d_.emplace_back(ch[stages], 1, head_geom, rng);
    for (std::size_t level = stages; level >= 1; --level) {
      const std::size_t in = level == stages ? ch[stages] : 2 * ch[level];
      const std::size_t s = config.strides[level - 1];
      d.deconv2d_.emplace_back(in, ch[level - 1],
                               ConvGeometry{config.kernel, config.kernel, s, s, config.padding, config.padding, 0, 0},
                               rng);
    }
    d.conv2d_.emplace_back(2 * ch[0], 1, head_geom, rng);
  } else {
    d.conv1d_.emplace_back(config.mel_bins, ch[0], config.input_kernel, 1, config.input_kernel / 2, rng);
    for (std::size_t i = 0; i < stages; ++i) {
      d.conv1d_.emplace_back(ch[i], ch[i + 1], config.kernel, config.strides[i], config.padding, rng);
    }
    d.conv1d_.emplace_back(ch[stages], 1, config.head_kernel, 1, config.head_kernel / 2, rng);
    if (unet) {
      for (std::size_t level = stages; level >= 1; --level) {
        const std::size_t in = level == stages ? ch[stages] : 2 * ch[level];
        d.deconv1d_.emplace_back(in, ch[level - 1], config.kernel, config.strides[level - 1], config.padding, rng);
      }
      d.conv1d_.emplace_back(2 * ch[0], 1, config.head_kernel, 1, config.head_kernel / 2, rng);
    }
  }
  return d;
}

std::size_t Discriminator::hidden_count() const {
  const std::size_t stages = config_.strides.size();
  return has_decoder(config_.variant) ? 1 + 2 * stages : 1 + stages;
}

ParamList Discriminator::parameters() const {
  ParamList out;
  const std::size_t stages = config_.strides.size();
  auto name_conv = [&](std::size_t i) -> std::string {
    if (i == 0) return "disc.input";
    if (i <= stages) return "disc.enc" + std::to_string(i);
    return i == stages + 1 ? "disc.coarse" : "disc.fine";
  };
  for (std::size_t i = 0; i < conv2d_.size(); ++i) conv2d_[i].collect(name_conv(i), out);
  for (std::size_t i = 0; i < conv1d_.size(); ++i) conv1d_[i].collect(name_conv(i), out);
  for (std::size_t i = 0; i < deconv2d_.size(); ++i) deconv2d_[i].collect("disc.dec" + std::to_string(i + 1), out);
  for (std::size_t i = 0; i < deconv1d_.size(); ++i) deconv1d_[i].collect("disc.dec" + std::to_string(i + 1), out);
  return out;
}

void Discriminator::set_trainable(bool on) const {
  for (auto& p : parameters()) {
    Tensor t = p.tensor;
    t.set_requires_grad(on);
  }
}

DiscriminatorWeights Discriminator::effective_weights() const {
  DiscriminatorWeights w;
  for (const auto& c : conv2d_) w.conv.push_back(c.effective_weight());
  for (const auto& c : deconv2d_) w.deconv.push_back(c.effective_weight());
  auto as_2d = [](const Tensor& k) { return reshape(k, {k.dim(0), k.dim(1), k.dim(2), 1}); };
  for (const auto& c : conv1d_) w.conv.push_back(as_2d(c.effective_weight()));
  for (const auto& c : deconv1d_) w.deconv.push_back(as_2d(c.effective_weight()));
  return w;
}

DiscriminatorOutput Discriminator::discriminate(const Spectrogram& s) const {
  return run(std::span(&s, 1), effective_weights(), std::nullopt)[0];
}

DiscriminatorOutput Discriminator::discriminate(const Spectrogram& s, const DiscriminatorWeights& weights) const {
  return run(std::span(&s, 1), weights, std::nullopt)[0];
}

std::vector<DiscriminatorOutput> Discriminator::discriminate_batch(std::span<const Spectrogram> batch,
                                                                   const DiscriminatorWeights& weights) const {
  return run(batch, weights, std::nullopt);
}

DiscriminatorOutput Discriminator::discriminate_masking_skip(const Spectrogram& s, std::size_t level) const {
  if (!has_decoder(config_.variant)) throw std::logic_error("S-T discriminator has no skip connections");
  if (level >= config_.strides.size()) throw std::out_of_range("skip level out of range");
  return run(std::span(&s, 1), effective_weights(), level)[0];
}

DiscriminatorOutput Discriminator::discriminate_tf(const Spectrogram& s) const {
  if (config_.variant != Variant::kMultiScaleTimeFrequency) throw std::logic_error("not an M-TF discriminator");
  return discriminate(s);
}

DiscriminatorOutput Discriminator::discriminate_st(const Spectrogram& s) const {
  if (config_.variant != Variant::kSingleScaleTime) throw std::logic_error("not an S-T discriminator");
  return discriminate(s);
}

DiscriminatorOutput Discriminator::discriminate_mt(const Spectrogram& s) const {
  if (config_.variant != Variant::kMultiScaleTime) throw std::logic_error("not an M-T discriminator");
  return discriminate(s);
}

namespace {

std::size_t round_up(std::size_t n, std::size_t m) { return (n + m - 1) / m * m; }

Tensor zeros_like(const Tensor& t) { return Tensor(t.shape(), 0.0); }

// [C,T,1] -> [C,T]
Tensor drop_unit_width(const Tensor& t) { return reshape(t, {t.dim(0), t.dim(1)}); }

}  // namespace

// Both layouts run as 2-D convolutions: M-TF over [C, T, N], the 1-D
// variants over [C, T, 1] with frequency bins as input channels.
std::vector<DiscriminatorOutput> Discriminator::run(std::span<const Spectrogram> batch, const DiscriminatorWeights& w,
                                                    std::optional<std::size_t> masked_skip) const {
  const bool tf = config_.variant == Variant::kMultiScaleTimeFrequency;
  const std::size_t stages = config_.strides.size();
  const std::size_t r = config_.reduction();
  const double alpha = config_.leaky_alpha;
  const std::size_t n = batch.size();
  if (n == 0) return {};
  if (w.conv.size() != conv2d_.size() + conv1d_.size() || w.deconv.size() != deconv2d_.size() + deconv1d_.size()) {
    throw std::invalid_argument("discriminator weights do not match this discriminator's layers");
  }

  std::vector<Tensor> h;
  for (const auto& s : batch) {
    if (tf) {
      h.push_back(pad_trailing(s.values(), {1, round_up(s.frames(), r), round_up(s.bins(), r)}));
      continue;
    }
    if (s.bins() != config_.mel_bins) {
      throw ShapeError("1-D discriminator expects " + std::to_string(config_.mel_bins) + " bins, got spectrogram " +
                       to_string(s.values().shape()));
    }
    Tensor x = transpose2d(reshape(s.values(), {s.frames(), s.bins()}));
    x = pad_trailing(x, {s.bins(), round_up(s.frames(), r)});
    h.push_back(reshape(x, {x.dim(0), x.dim(1), 1}));
  }

  auto conv_layer = [&](std::size_t i, const std::vector<Tensor>& xs, bool activate) {
    const ConvGeometry geom = tf ? conv2d_[i].geometry() : conv1d_[i].geometry();
    const Tensor& bias = tf ? conv2d_[i].params().bias : conv1d_[i].params().bias;
    PackedBatch p = conv2d_packed(xs, w.conv[i], bias, geom);
    if (activate) p.values = leaky_relu(p.values, alpha);
    return unpack(p);
  };
  std::vector<DiscriminatorOutput> out(n);
  auto keep_hidden = [&](const std::vector<Tensor>& maps) {
    for (std::size_t b = 0; b < n; ++b) out[b].hidden.push_back(tf ? maps[b] : drop_unit_width(maps[b]));
  };

  // Input layer has no activation.
  std::vector<std::vector<Tensor>> skips;
  h = conv_layer(0, h, false);
  keep_hidden(h);
  skips.push_back(h);
  for (std::size_t i = 1; i <= stages; ++i) {
    h = conv_layer(i, h, true);
    keep_hidden(h);
    if (i < stages) skips.push_back(h);
  }
  const auto coarse = conv_layer(stages + 1, h, false);
  for (std::size_t b = 0; b < n; ++b) out[b].coarse = tf ? coarse[b] : drop_unit_width(coarse[b]);
  if (!has_decoder(config_.variant)) return out;

  for (std::size_t j = 0; j < stages; ++j) {
    const std::size_t level = stages - 1 - j;  // skip index this stage restores
    const ConvGeometry base = tf ? deconv2d_[j].geometry() : deconv1d_[j].geometry();
    const Tensor& bias = tf ? deconv2d_[j].params().bias : deconv1d_[j].params().bias;
    std::vector<ConvGeometry> geoms(n, base);
    for (std::size_t b = 0; b < n; ++b) {
      const Tensor& skip = skips[level][b];
      geoms[b].out_pad_h = output_padding_for(h[b].dim(1), skip.dim(1), base.kernel_h, base.stride_h, base.pad_h, "time");
      geoms[b].out_pad_w =
          output_padding_for(h[b].dim(2), skip.dim(2), base.kernel_w, base.stride_w, base.pad_w, "frequency");
    }
    PackedBatch p = conv_transpose2d_packed(h, w.deconv[j], bias, geoms);
    p.values = leaky_relu(p.values, alpha);
    h = unpack(p);
    keep_hidden(h);
    for (std::size_t b = 0; b < n; ++b) {
      const Tensor& skip = skips[level][b];
      h[b] = concat_channels(h[b], masked_skip == level ? zeros_like(skip) : skip);
    }
  }
  const auto fine = conv_layer(stages + 2, h, false);
  for (std::size_t b = 0; b < n; ++b) {
    const Spectrogram& s = batch[b];
    out[b].fine = tf ? crop_leading(fine[b], {1, s.frames(), s.bins()})
                     : crop_leading(drop_unit_width(fine[b]), {1, s.frames()});
  }
  return out;
}

}  // namespace specgan
