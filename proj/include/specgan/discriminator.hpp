#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "specgan/layers.hpp"
#include "specgan/tensor.hpp"

namespace specgan {

/// Log-mel spectrogram held as a [1, T, N] tensor (T frames, N bins).
class Spectrogram {
 public:
  /// Throws ShapeError unless `values` is [1,T,N] with T,N > 0, and
  /// NumericError if any value is non-finite.
  explicit Spectrogram(Tensor values);

  std::size_t frames() const { return values_.dim(1); }
  std::size_t bins() const { return values_.dim(2); }
  const Tensor& values() const { return values_; }

 private:
  Tensor values_;
};

enum class Variant {
  kSingleScaleTime,         // "s-t": 1-D encoder only
  kMultiScaleTime,          // "m-t": 1-D U-Net
  kMultiScaleTimeFrequency  // "m-tf": 2-D U-Net
};

std::string to_string(Variant v);
/// Accepts "s-t", "m-t", "m-tf" (case-insensitive); throws ConfigError.
Variant parse_variant(std::string_view text);
inline bool has_decoder(Variant v) { return v != Variant::kSingleScaleTime; }

struct DiscriminatorConfig {
  Variant variant = Variant::kMultiScaleTimeFrequency;
  /// Input conv width followed by one width per encoder stage.
  std::vector<std::size_t> channels{32, 64, 128, 256};
  std::vector<std::size_t> strides{2, 2, 2};
  std::size_t kernel = 4;
  std::size_t padding = 1;
  std::size_t input_kernel = 3;
  std::size_t head_kernel = 3;
  double leaky_alpha = 0.2;
  /// Input channels of the 1-D variants (frequency bins become channels).
  std::size_t mel_bins = 16;

  /// Throws ConfigError on inconsistent settings, including a stride
  /// product other than 8.
  void validate() const;
  std::size_t reduction() const;
};

/// Coarse map, optional fine map and hidden feature maps of one pass.
///
/// M-TF: coarse [1, ceil(T/8), ceil(N/8)], fine [1, T, N].
/// M-T:  coarse [1, ceil(T/8)], fine [1, T].
/// S-T:  coarse [1, ceil(T/8)], no fine map.
struct DiscriminatorOutput {
  Tensor coarse;
  std::optional<Tensor> fine;
  std::vector<Tensor> hidden;
};

/// Weight-normalized kernels of every layer, computed once and shared by
/// several passes. 1-D kernels are stored in the [.., k, 1] 2-D layout.
struct DiscriminatorWeights {
  std::vector<Tensor> conv;    // input conv, encoder stages, coarse head, fine head
  std::vector<Tensor> deconv;  // decoder stages, deepest first
};

class Discriminator {
 public:
  static Discriminator build(const DiscriminatorConfig& config, std::uint64_t seed);

  /// Dispatches on the configured variant.
  DiscriminatorOutput discriminate(const Spectrogram& s) const;
  /// Same, reusing kernels from effective_weights(). Gradients flow through
  /// the shared kernels back to v and g.
  DiscriminatorOutput discriminate(const Spectrogram& s, const DiscriminatorWeights& weights) const;
  DiscriminatorWeights effective_weights() const;
  /// Runs every spectrogram of a batch through each layer with one matrix
  /// product per layer. Items may differ in length.
  std::vector<DiscriminatorOutput> discriminate_batch(std::span<const Spectrogram> batch,
                                                      const DiscriminatorWeights& weights) const;
  /// Same as discriminate(), but replaces the skip input taken from encoder
  /// level `level` (0 = input conv) with zeros. Used to probe that skip
  /// connections feed the fine map.
  DiscriminatorOutput discriminate_masking_skip(const Spectrogram& s, std::size_t level) const;

  DiscriminatorOutput discriminate_tf(const Spectrogram& s) const;
  DiscriminatorOutput discriminate_st(const Spectrogram& s) const;
  DiscriminatorOutput discriminate_mt(const Spectrogram& s) const;

  const DiscriminatorConfig& config() const { return config_; }
  /// Number of hidden maps produced per pass.
  std::size_t hidden_count() const;
  ParamList parameters() const;
  /// Toggles requires_grad on every parameter.
  void set_trainable(bool on) const;

 private:
  explicit Discriminator(DiscriminatorConfig config) : config_(std::move(config)) {}

  std::vector<DiscriminatorOutput> run(std::span<const Spectrogram> batch, const DiscriminatorWeights& w,
                                       std::optional<std::size_t> masked_skip) const;

  DiscriminatorConfig config_;
  // 2-D layers (M-TF)
  std::vector<Conv2d> conv2d_;            // input conv, encoder stages, coarse head, fine head
  std::vector<ConvTranspose2d> deconv2d_;  // decoder stages, deepest first
  // 1-D layers (S-T, M-T)
  std::vector<Conv1d> conv1d_;
  std::vector<ConvTranspose1d> deconv1d_;
};

}  // namespace specgan
