#include "specgan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "specgan/random.hpp"

namespace specgan {

namespace {

enum Stream : std::uint64_t { kTemplate = 0x7E3, kSample = 0x5A3, kNoise = 0x401, kShuffle = 0x5F1 };

}  // namespace

void CorpusConfig::validate() const {
  if (vocab_size == 0 || samples == 0 || mel_bins == 0) throw ConfigError("corpus sizes must be positive");
  if (min_tokens == 0 || min_tokens > max_tokens) throw ConfigError("corpus token-length range is empty");
  if (min_duration == 0 || min_duration > max_duration) throw ConfigError("corpus duration range is empty");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("corpus noise_std must be >= 0");
}

std::vector<double> formant_profile(const CorpusConfig& config, std::size_t token) {
  if (token >= config.vocab_size) throw std::out_of_range("token " + std::to_string(token) + " outside vocabulary");
  CounterRng rng(hash_key(config.seed, kTemplate, token));
  const double n = static_cast<double>(config.mel_bins);
  const double scale = n / 16.0;
  std::vector<double> profile(config.mel_bins, 0.1);
  const auto bumps = rng.uniform_int(2, 3);
  for (std::uint64_t b = 0; b < bumps; ++b) {
    const double center = rng.uniform(0.0, n - 1.0);
    const double width = rng.uniform(0.6, 2.0) * scale;
    const double height = rng.uniform(0.5, 3.0);
    for (std::size_t k = 0; k < config.mel_bins; ++k) {
      const double z = (static_cast<double>(k) - center) / width;
      profile[k] += height * std::exp(-0.5 * z * z);
    }
  }
  const double period = rng.uniform(2.5, 5.0) * scale;
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double depth = rng.uniform(0.1, 0.4);
  for (std::size_t k = 0; k < config.mel_bins; ++k) {
    profile[k] += depth * (1.0 + std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / period + phase));
  }
  return profile;
}

namespace {

double log_cell(double magnitude) {
  return std::clamp(std::log(std::max(magnitude, std::exp(kLogFloor))), kLogFloor, kLogCeil);
}

}  // namespace

std::vector<double> template_column(const CorpusConfig& config, std::size_t token) {
  auto column = formant_profile(config, token);
  for (auto& v : column) v = log_cell(v);
  return column;
}

SynthSample render_sample(const CorpusConfig& config, std::size_t index) {
  config.validate();
  if (index >= config.samples) {
    throw std::out_of_range("sample index " + std::to_string(index) + " outside corpus of " +
                            std::to_string(config.samples));
  }
  CounterRng rng(hash_key(config.seed, kSample, index));
  const auto length = rng.uniform_int(config.min_tokens, config.max_tokens);
  std::vector<std::size_t> tokens, durations;
  std::size_t frames = 0;
  for (std::uint64_t i = 0; i < length; ++i) {
    tokens.push_back(rng.uniform_int(0, config.vocab_size - 1));
    durations.push_back(rng.uniform_int(config.min_duration, config.max_duration));
    frames += durations.back();
  }

  const std::size_t n = config.mel_bins;
  CounterRng noise(hash_key(config.seed, kNoise, index));
  std::vector<double> values;
  values.reserve(frames * n);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto profile = formant_profile(config, tokens[i]);
    for (std::size_t f = 0; f < durations[i]; ++f) {
      for (std::size_t k = 0; k < n; ++k) {
        const double z = config.noise_std > 0.0 ? noise.normal() : 0.0;
        values.push_back(log_cell(profile[k] + config.noise_std * z));
      }
    }
  }
  return SynthSample{std::move(tokens), std::move(durations), Spectrogram(Tensor(Shape{1, frames, n}, std::move(values)))};
}

Corpus::Corpus(CorpusConfig config) : config_(std::move(config)) {
  config_.validate();
  for (std::size_t i = 0; i < config_.samples; ++i) samples_.push_back(render_sample(config_, i));
}

std::size_t Corpus::total_frames() const {
  std::size_t total = 0;
  for (const auto& s : samples_) total += s.target.frames();
  return total;
}

BatchIterator::BatchIterator(std::size_t samples, std::size_t batch_size, std::uint64_t epoch_seed)
    : samples_(samples), batch_size_(batch_size), epoch_seed_(epoch_seed) {
  if (batch_size == 0 || batch_size > samples) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " must be in [1, " + std::to_string(samples) + "]");
  }
  reshuffle();
}

void BatchIterator::reshuffle() {
  order_.resize(samples_);
  for (std::size_t i = 0; i < samples_; ++i) order_[i] = i;
  CounterRng rng(hash_key(epoch_seed_, kShuffle, epoch_));
  for (std::size_t i = samples_; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, i - 1));
    std::swap(order_[i - 1], order_[j]);
  }
  cursor_ = 0;
}

std::vector<std::size_t> BatchIterator::next() {
  if (cursor_ >= samples_) {
    ++epoch_;
    reshuffle();
  }
  const std::size_t end = std::min(samples_, cursor_ + batch_size_);
  std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return batch;
}

void dump_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& c = corpus.config();
  {
    std::ofstream m(dir / "corpus.txt");
    m << "seed = " << c.seed << "\nsamples = " << c.samples << "\nvocab_size = " << c.vocab_size
      << "\nmin_tokens = " << c.min_tokens << "\nmax_tokens = " << c.max_tokens
      << "\nmin_duration = " << c.min_duration << "\nmax_duration = " << c.max_duration
      << "\nmel_bins = " << c.mel_bins << "\nnoise_std = " << c.noise_std << "\n";
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "sample_%04zu.txt", i);
      m << "file = " << name << " frames = " << corpus[i].target.frames() << "\n";
    }
    if (!m) throw std::runtime_error("cannot write " + (dir / "corpus.txt").string());
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& s = corpus[i];
    char name[32];
    std::snprintf(name, sizeof name, "sample_%04zu.txt", i);
    std::ofstream f(dir / name);
    f << s.target.frames() << ' ' << s.target.bins() << ' ' << s.tokens.size() << '\n';
    for (std::size_t j = 0; j < s.tokens.size(); ++j) f << (j ? " " : "") << s.tokens[j];
    f << '\n';
    for (std::size_t j = 0; j < s.durations.size(); ++j) f << (j ? " " : "") << s.durations[j];
    f << '\n';
    auto v = s.target.values().data();
    char cell[32];
    for (std::size_t t = 0; t < s.target.frames(); ++t) {
      for (std::size_t k = 0; k < s.target.bins(); ++k) {
        std::snprintf(cell, sizeof cell, "%s%.9g", k ? " " : "", v[t * s.target.bins() + k]);
        f << cell;
      }
      f << '\n';
    }
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
  }
}

}  // namespace specgan
