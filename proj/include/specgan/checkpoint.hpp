#pragma once

#include <cstddef>
#include <filesystem>

#include "specgan/discriminator.hpp"
#include "specgan/generator.hpp"
#include "specgan/optim.hpp"
#include "specgan/run_config.hpp"
#include "specgan/trainer.hpp"

namespace specgan {

/// A checkpoint directory holds config.txt (the run config), tensors.bin
/// (little-endian float64 values back to back) and manifest.txt, one
/// `key = value` per line:
///   format = specgan-checkpoint 1
///   iteration = <n>
///   opt.gen.t = <n>, opt.gen.lookahead_counter = <n>, same for opt.disc
///   tensor.<name> = <dims joined by x> <offset> <count>
/// Tensor names are the parameter names (gen.*, disc.*) and the optimizer
/// buffers opt.{gen,disc}.{m,v,slow}.<parameter name>.
void save_checkpoint(const std::filesystem::path& dir, const RunConfig& config, GanTrainer& trainer);

struct LoadedCheckpoint {
  RunConfig config;
  std::size_t iteration = 0;
  Generator generator;
  Discriminator discriminator;
  OptimizerState generator_optimizer, discriminator_optimizer;
};

/// Throws std::runtime_error for a missing or unreadable checkpoint and
/// ShapeError when stored tensors do not fit the configured networks.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

/// Rebuilds a trainer (networks, optimizer state, iteration) from a checkpoint.
GanTrainer restore_trainer(const LoadedCheckpoint& checkpoint);

}  // namespace specgan
