#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "specgan/discriminator.hpp"
#include "specgan/layers.hpp"

namespace specgan {

struct GeneratorConfig {
  std::size_t vocab_size = 12;
  std::size_t embed_dim = 32;
  std::size_t channels = 64;
  std::size_t kernel = 3;
  std::size_t mel_bins = 16;

  void validate() const;
};

struct GeneratorOutput {
  Spectrogram spectrogram;  // [1, sum(durations), N]
  Tensor durations;         // [L], raw predicted frame counts
};

/// Toy non-autoregressive acoustic model: token encoder, per-token duration
/// head, repeat-upsampling by the given durations, frame decoder.
class Generator {
 public:
  static Generator build(const GeneratorConfig& config, std::uint64_t seed);

  /// Upsamples with `durations` (ground truth while training). Throws
  /// std::invalid_argument for empty input, zero durations or length
  /// mismatch, std::out_of_range for tokens outside the vocabulary.
  GeneratorOutput generate(std::span<const std::size_t> tokens, std::span<const std::size_t> durations) const;

  /// Inference mode: predicts durations first, rounds them to the nearest
  /// integer (at least 1), then decodes with them.
  GeneratorOutput infer(std::span<const std::size_t> tokens, std::vector<std::size_t>* used_durations = nullptr) const;

  const GeneratorConfig& config() const { return config_; }
  ParamList parameters() const;

 private:
  Generator(const GeneratorConfig& config, CounterRng& rng);

  Tensor encode(std::span<const std::size_t> tokens) const;  // -> [C, L]
  Tensor predict_durations(const Tensor& encoded) const;     // -> [L]
  Tensor decode(const Tensor& encoded, std::span<const std::size_t> durations) const;

  GeneratorConfig config_;
  Embedding embedding_;
  Conv1d encoder1_, encoder2_;
  Linear duration_head_;
  Conv1d decoder1_, decoder2_;
  Linear projection_;
};

/// Round raw predicted durations to positive frame counts.
std::vector<std::size_t> round_durations(std::span<const double> predicted);

struct TtsLoss {
  Tensor total;  // spec + lambda_dur * dur
  Tensor spec;   // MSE(S, S_hat) + MAE(S, S_hat)
  Tensor dur;    // MSE(D, D_hat) + MAE(D, D_hat)
};

/// Spectrogram + duration regression loss. Targets are constants.
TtsLoss tts_loss(const Tensor& predicted_spec, const Tensor& target_spec, const Tensor& predicted_durations,
                 std::span<const std::size_t> target_durations, double lambda_dur);

}  // namespace specgan
