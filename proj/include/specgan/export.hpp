#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "specgan/discriminator.hpp"
#include "specgan/run_config.hpp"
#include "specgan/trainer.hpp"

namespace specgan {

struct TrainSummary {
  std::vector<LossReport> reports;
  std::filesystem::path final_checkpoint;
  double seconds = 0.0;
};

/// Trains for config.train.total_iters iterations. Writes into out_dir:
/// losses.csv, tts_losses.csv, ckpt_NNNNNN/ every checkpoint_every
/// iterations and final/. Progress goes to `log` every `log_every` iterations.
TrainSummary run_training(const RunConfig& config, std::ostream& log, std::size_t log_every = 100);

/// 8-bit grayscale image, row-major, top row first.
struct GrayImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;
};

/// 0 -> 0, 1 -> 255, clamped outside [0, 1], rounded to nearest.
std::uint8_t map_pixel(double value);

/// Binary PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);

/// Images have time on the x axis and frequency bin 0 on the bottom row.
/// The spectrogram is min-max scaled to [0, 255].
GrayImage spectrogram_image(const Spectrogram& s);
/// A [1,T,N] map, or a [1,T] map repeated over `bins` rows.
GrayImage map_image(const Tensor& map, std::size_t bins);
/// Coarse map repeated `factor` times along each axis (nearest neighbour),
/// then cropped to frames x bins.
GrayImage upsampled_map_image(const Tensor& coarse, std::size_t factor, std::size_t frames, std::size_t bins);

/// Sum over 8x8 tiles of the number of distinct pixel values in the tile.
/// Tiles start at the bottom-left (frame 0, bin 0); top and right edge
/// tiles may be partial. A map that is constant on each tile scores one
/// per tile.
std::size_t distinct_block_values(const GrayImage& image, std::size_t block = 8);
double mean_pixel(const GrayImage& image);

struct HeatmapResult {
  GrayImage input, coarse;
  std::optional<GrayImage> fine;
  std::filesystem::path input_path, coarse_path;
  std::optional<std::filesystem::path> fine_path;
  std::string notice;  // set when the variant has no fine map
};

/// Writes <prefix>input.pgm, <prefix>fine.pgm and <prefix>coarse.pgm.
HeatmapResult render_heatmaps(const Discriminator& disc, const Spectrogram& s, const std::filesystem::path& prefix);

}  // namespace specgan
