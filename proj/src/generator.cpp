#include "specgan/generator.hpp"

#include <cmath>
#include <stdexcept>

#include "specgan/ops.hpp"

namespace specgan {

namespace {

constexpr double kLeakyAlpha = 0.2;

}  // namespace

void GeneratorConfig::validate() const {
  if (vocab_size == 0 || embed_dim == 0 || channels == 0 || mel_bins == 0) {
    throw ConfigError("generator sizes must be positive");
  }
  if (kernel % 2 == 0) throw ConfigError("generator kernel must be odd, got " + std::to_string(kernel));
}

Generator::Generator(const GeneratorConfig& config, CounterRng& rng)
    : config_(config),
      embedding_(config.vocab_size, config.embed_dim, rng),
      encoder1_(config.embed_dim, config.channels, config.kernel, 1, config.kernel / 2, rng),
      encoder2_(config.channels, config.channels, config.kernel, 1, config.kernel / 2, rng),
      duration_head_(config.channels, 1, rng),
      decoder1_(config.channels, config.channels, config.kernel, 1, config.kernel / 2, rng),
      decoder2_(config.channels, config.channels, config.kernel, 1, config.kernel / 2, rng),
      projection_(config.channels, config.mel_bins, rng) {}

Generator Generator::build(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  CounterRng rng(hash_key(seed, 0x6E4, 0));
  return Generator(config, rng);
}

ParamList Generator::parameters() const {
  ParamList out;
  embedding_.collect("gen.embedding", out);
  encoder1_.collect("gen.enc1", out);
  encoder2_.collect("gen.enc2", out);
  duration_head_.collect("gen.duration", out);
  decoder1_.collect("gen.dec1", out);
  decoder2_.collect("gen.dec2", out);
  projection_.collect("gen.proj", out);
  return out;
}

Tensor Generator::encode(std::span<const std::size_t> tokens) const {
  if (tokens.empty()) throw std::invalid_argument("generator needs at least one token");
  Tensor x = transpose2d(embedding_.forward(tokens));  // [E, L]
  x = leaky_relu(encoder1_.forward(x), kLeakyAlpha);
  return leaky_relu(encoder2_.forward(x), kLeakyAlpha);
}

Tensor Generator::predict_durations(const Tensor& encoded) const {
  const std::size_t length = encoded.dim(1);
  return reshape(duration_head_.forward(transpose2d(encoded)), {length});
}

Tensor Generator::decode(const Tensor& encoded, std::span<const std::size_t> durations) const {
  Tensor frames = repeat_columns(encoded, durations);  // [C, T]
  frames = leaky_relu(decoder1_.forward(frames), kLeakyAlpha);
  frames = leaky_relu(decoder2_.forward(frames), kLeakyAlpha);
  Tensor mel = projection_.forward(transpose2d(frames));  // [T, N]
  return reshape(mel, {1, mel.dim(0), mel.dim(1)});
}

GeneratorOutput Generator::generate(std::span<const std::size_t> tokens,
                                    std::span<const std::size_t> durations) const {
  if (durations.size() != tokens.size()) {
    throw std::invalid_argument("generator got " + std::to_string(tokens.size()) + " tokens but " +
                                std::to_string(durations.size()) + " durations");
  }
  for (auto d : durations) {
    if (d == 0) throw std::invalid_argument("durations must be positive");
  }
  Tensor encoded = encode(tokens);
  Tensor predicted = predict_durations(encoded);
  return GeneratorOutput{Spectrogram(decode(encoded, durations)), predicted};
}

GeneratorOutput Generator::infer(std::span<const std::size_t> tokens, std::vector<std::size_t>* used_durations) const {
  Tensor encoded = encode(tokens);
  Tensor predicted = predict_durations(encoded);
  auto durations = round_durations(predicted.data());
  if (used_durations) *used_durations = durations;
  return GeneratorOutput{Spectrogram(decode(encoded, durations)), predicted};
}

std::vector<std::size_t> round_durations(std::span<const double> predicted) {
  std::vector<std::size_t> out;
  out.reserve(predicted.size());
  for (double d : predicted) {
    if (!std::isfinite(d)) throw NumericError("predicted duration is not finite");
    const double r = std::round(d);
    out.push_back(r < 1.0 ? 1 : static_cast<std::size_t>(r));
  }
  return out;
}

TtsLoss tts_loss(const Tensor& predicted_spec, const Tensor& target_spec, const Tensor& predicted_durations,
                 std::span<const std::size_t> target_durations, double lambda_dur) {
  std::vector<double> d(target_durations.begin(), target_durations.end());
  const std::size_t length = d.size();
  Tensor target_d(Shape{length}, std::move(d));
  Tensor spec = add(mse(predicted_spec, target_spec), mae(predicted_spec, target_spec));
  Tensor dur = add(mse(predicted_durations, target_d), mae(predicted_durations, target_d));
  return TtsLoss{add(spec, scale(dur, lambda_dur)), spec, dur};
}

}  // namespace specgan
