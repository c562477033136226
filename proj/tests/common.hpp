#pragma once

#include <filesystem>
#include <string>

#include "specgan/run_config.hpp"

namespace specgan::testing {

// Small networks so training tests run in a fraction of a second per step.
inline RunConfig small_run_config() {
  RunConfig c;
  c.discriminator.channels = {4, 6, 8, 10};
  c.generator.embed_dim = 6;
  c.generator.channels = 8;
  c.corpus.samples = 4;
  c.train.batch_size = 2;
  c.train.total_iters = 6;
  c.checkpoint_every = 3;
  return c;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("specgan_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace specgan::testing
