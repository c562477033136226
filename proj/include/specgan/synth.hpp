#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "specgan/discriminator.hpp"

namespace specgan {

struct CorpusConfig {
  std::size_t vocab_size = 12;
  std::size_t samples = 8;
  std::size_t min_tokens = 3, max_tokens = 6;
  std::size_t min_duration = 2, max_duration = 8;
  std::size_t mel_bins = 16;
  double noise_std = 0.01;
  std::uint64_t seed = 1234;

  /// Throws ConfigError on empty ranges or zero sizes.
  void validate() const;
};

/// Value range of rendered log-spectrogram cells.
inline constexpr double kLogFloor = -8.0;
inline constexpr double kLogCeil = 4.0;

struct SynthSample {
  std::vector<std::size_t> tokens;
  std::vector<std::size_t> durations;  // sums to target.frames()
  Spectrogram target;
};

/// Linear-magnitude profile of `token` over the N bins: 2-3 Gaussian formant
/// bumps, a cosine harmonic ripple and a 0.1 floor. Fixed per (seed, token).
std::vector<double> formant_profile(const CorpusConfig& config, std::size_t token);
/// clamp(log(profile)): the frame column of `token` at zero noise.
std::vector<double> template_column(const CorpusConfig& config, std::size_t token);

/// Sample `index` of the corpus. Throws std::out_of_range for
/// index >= samples.
SynthSample render_sample(const CorpusConfig& config, std::size_t index);

/// All samples, rendered once.
class Corpus {
 public:
  explicit Corpus(CorpusConfig config);

  const CorpusConfig& config() const { return config_; }
  std::size_t size() const { return samples_.size(); }
  const SynthSample& operator[](std::size_t i) const { return samples_.at(i); }
  std::size_t total_frames() const;

 private:
  CorpusConfig config_;
  std::vector<SynthSample> samples_;
};

/// Shuffled epochs of sample indices. Epoch e is a Fisher-Yates permutation
/// keyed by (epoch_seed, e); a final batch may be short when batch_size does
/// not divide the corpus size.
class BatchIterator {
 public:
  /// Throws ConfigError when batch_size is 0 or exceeds `samples`.
  BatchIterator(std::size_t samples, std::size_t batch_size, std::uint64_t epoch_seed);

  std::vector<std::size_t> next();
  std::size_t epoch() const { return epoch_; }

 private:
  void reshuffle();

  std::size_t samples_, batch_size_;
  std::uint64_t epoch_seed_;
  std::size_t epoch_ = 0, cursor_ = 0;
  std::vector<std::size_t> order_;
};

/// Writes sample_NNNN.txt per sample (header "T N L", a token line, a
/// duration line, then T rows of N values) and corpus.txt with the config.
void dump_corpus(const Corpus& corpus, const std::filesystem::path& dir);

}  // namespace specgan
