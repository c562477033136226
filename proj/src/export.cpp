#include "specgan/export.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

#include "specgan/checkpoint.hpp"
#include "specgan/synth.hpp"

namespace specgan {

TrainSummary run_training(const RunConfig& config, std::ostream& log, std::size_t log_every) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  Corpus corpus(config.corpus);
  GanTrainer trainer(Generator::build(config.generator, generator_seed(config)),
                     Discriminator::build(config.discriminator, discriminator_seed(config)), config.train);
  BatchIterator batches(corpus.size(), config.train.batch_size, config.train.seed);

  std::filesystem::create_directories(config.out_dir);
  std::ofstream losses(config.out_dir / "losses.csv");
  std::ofstream tts(config.out_dir / "tts_losses.csv");
  if (!losses || !tts) throw std::runtime_error("cannot write loss files in " + config.out_dir.string());
  write_loss_header(losses);
  write_tts_header(tts);

  TrainSummary summary;
  for (std::size_t i = 0; i < config.train.total_iters; ++i) {
    std::vector<const SynthSample*> batch;
    for (auto idx : batches.next()) batch.push_back(&corpus[idx]);
    LossReport r = trainer.train_step(batch);
    write_loss_row(losses, r);
    write_tts_row(tts, r);
    summary.reports.push_back(r);
    if (log_every && r.iter % log_every == 0) {
      char line[200];
      std::snprintf(line, sizeof line, "iter %zu  L_d %.4f  L_a %.4f  L_f %.4f  L_tts %.4f  L_spec %.4f\n", r.iter,
                    r.L_d, r.L_a, r.L_f, r.L_tts, r.L_spec);
      log << line << std::flush;
    }
    if (config.checkpoint_every && r.iter % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "ckpt_%06zu", r.iter);
      save_checkpoint(config.out_dir / name, config, trainer);
    }
  }
  losses.flush();
  tts.flush();
  if (!losses || !tts) throw std::runtime_error("failed writing loss files in " + config.out_dir.string());
  summary.final_checkpoint = config.out_dir / "final";
  save_checkpoint(summary.final_checkpoint, config, trainer);
  summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summary;
}

std::uint8_t map_pixel(double value) {
  const double v = std::clamp(value, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  if (image.pixels.size() != image.width * image.height) throw ShapeError("write_pgm: pixel count mismatch");
  std::ofstream out(path, std::ios::binary);
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  GrayImage image;
  int maxval = 0;
  in >> magic >> image.width >> image.height >> maxval;
  if (!in || magic != "P5" || maxval != 255) throw std::runtime_error("not an 8-bit P5 image: " + path.string());
  in.get();
  image.pixels.resize(image.width * image.height);
  in.read(reinterpret_cast<char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!in) throw std::runtime_error("truncated image: " + path.string());
  return image;
}

namespace {

// value(t, n) -> pixel at column t, row (bins - 1 - n).
template <typename F>
GrayImage render(std::size_t frames, std::size_t bins, F value) {
  GrayImage image{frames, bins, std::vector<std::uint8_t>(frames * bins)};
  for (std::size_t n = 0; n < bins; ++n)
    for (std::size_t t = 0; t < frames; ++t) image.pixels[(bins - 1 - n) * frames + t] = value(t, n);
  return image;
}

}  // namespace

GrayImage spectrogram_image(const Spectrogram& s) {
  auto v = s.values().data();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  const std::size_t bins = s.bins();
  return render(s.frames(), bins, [&](std::size_t t, std::size_t n) {
    return range > 0.0 ? map_pixel((v[t * bins + n] - *lo) / range) : std::uint8_t{0};
  });
}

GrayImage map_image(const Tensor& map, std::size_t bins) {
  auto v = map.data();
  if (map.rank() == 3 && map.dim(0) == 1) {
    const std::size_t n_bins = map.dim(2);
    return render(map.dim(1), n_bins, [&](std::size_t t, std::size_t n) { return map_pixel(v[t * n_bins + n]); });
  }
  if (map.rank() == 2 && map.dim(0) == 1) {
    return render(map.dim(1), bins, [&](std::size_t t, std::size_t) { return map_pixel(v[t]); });
  }
  throw ShapeError("map_image: expected [1,T,N] or [1,T], got " + to_string(map.shape()));
}

GrayImage upsampled_map_image(const Tensor& coarse, std::size_t factor, std::size_t frames, std::size_t bins) {
  auto v = coarse.data();
  if (coarse.rank() == 3 && coarse.dim(0) == 1) {
    const std::size_t cb = coarse.dim(2);
    if (coarse.dim(1) * factor < frames || cb * factor < bins) throw ShapeError("coarse map too small to upsample");
    return render(frames, bins, [&](std::size_t t, std::size_t n) { return map_pixel(v[(t / factor) * cb + n / factor]); });
  }
  if (coarse.rank() == 2 && coarse.dim(0) == 1) {
    if (coarse.dim(1) * factor < frames) throw ShapeError("coarse map too small to upsample");
    return render(frames, bins, [&](std::size_t t, std::size_t) { return map_pixel(v[t / factor]); });
  }
  throw ShapeError("upsampled_map_image: expected [1,T',N'] or [1,T'], got " + to_string(coarse.shape()));
}

std::size_t distinct_block_values(const GrayImage& image, std::size_t block) {
  // Tiles are counted from the bottom-left corner, i.e. from frame 0 and bin
  // 0, so they line up with the discriminator's own reduction grid.
  std::size_t total = 0;
  for (std::size_t b0 = 0; b0 < image.height; b0 += block)
    for (std::size_t x0 = 0; x0 < image.width; x0 += block) {
      std::set<std::uint8_t> values;
      for (std::size_t b = b0; b < std::min(image.height, b0 + block); ++b) {
        const std::size_t y = image.height - 1 - b;
        for (std::size_t x = x0; x < std::min(image.width, x0 + block); ++x) values.insert(image.pixels[y * image.width + x]);
      }
      total += values.size();
    }
  return total;
}

double mean_pixel(const GrayImage& image) {
  if (image.pixels.empty()) return 0.0;
  double sum = 0.0;
  for (auto p : image.pixels) sum += p;
  return sum / static_cast<double>(image.pixels.size());
}

HeatmapResult render_heatmaps(const Discriminator& disc, const Spectrogram& s, const std::filesystem::path& prefix) {
  DiscriminatorOutput out;
  {
    NoGradGuard no_grad;
    out = disc.discriminate(s);
  }
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
  HeatmapResult r;
  auto path = [&](const char* what) { return std::filesystem::path(prefix.string() + what + ".pgm"); };
  r.input = spectrogram_image(s);
  r.input_path = path("input");
  write_pgm(r.input_path, r.input);
  if (out.fine) {
    r.fine = map_image(*out.fine, s.bins());
    r.fine_path = path("fine");
    write_pgm(*r.fine_path, *r.fine);
  } else {
    r.notice = "variant " + to_string(disc.config().variant) + " has no fine map; wrote the coarse map only";
  }
  r.coarse = upsampled_map_image(out.coarse, disc.config().reduction(), s.frames(), s.bins());
  r.coarse_path = path("coarse");
  write_pgm(r.coarse_path, r.coarse);
  return r;
}

}  // namespace specgan
