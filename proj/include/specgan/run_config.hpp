#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "specgan/discriminator.hpp"
#include "specgan/generator.hpp"
#include "specgan/synth.hpp"
#include "specgan/trainer.hpp"

namespace specgan {

/// Everything one training or heatmap run needs. vocab_size and mel_bins are
/// shared by the corpus, the generator and the discriminator.
struct RunConfig {
  TrainConfig train;
  DiscriminatorConfig discriminator;
  GeneratorConfig generator;
  CorpusConfig corpus;
  std::filesystem::path out_dir = "run";
  /// Write a checkpoint every this many iterations (0: final only).
  std::size_t checkpoint_every = 100;
  /// Set when the config file gave lambda_a / lambda_f explicitly; otherwise
  /// they follow the variant.
  bool lambda_a_explicit = false, lambda_f_explicit = false;

  /// Applies the variant and re-derives non-explicit lambdas.
  void set_variant(Variant v);
  void set_seed(std::uint64_t seed) { train.seed = seed; }
  /// Cross-module consistency plus each module's own validate().
  void validate() const;
};

/// Parses `key = value` lines; '#' starts a comment. Unknown keys, malformed
/// values and duplicate keys throw ConfigError naming the line.
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::filesystem::path& path);
/// Writes every key so that parse_run_config reproduces `config`.
void write_run_config(std::ostream& out, const RunConfig& config);

/// Seeds of the two networks, derived from the training seed.
std::uint64_t generator_seed(const RunConfig& config);
std::uint64_t discriminator_seed(const RunConfig& config);

}  // namespace specgan
