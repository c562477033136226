#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "common.hpp"
#include "oracles.hpp"
#include "specgan/checkpoint.hpp"
#include "specgan/cli.hpp"
#include "specgan/export.hpp"
#include "specgan/gradcheck.hpp"

using namespace specgan;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_run_config(in);
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "specgan");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (out_text) *out_text = out.str() + err.str();
  return code;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

std::string config_text(const RunConfig& c) {
  std::ostringstream out;
  write_run_config(out, c);
  return out.str();
}

}  // namespace

TEST_CASE("config parsing") {
  RunConfig c = parse("# comment\n variant = s-t \n\nseed=9  # trailing\nmel_bins = 20\n");
  CHECK(c.discriminator.variant == Variant::kSingleScaleTime);
  CHECK(c.train.lambda_a == 1.0);
  CHECK(c.train.lambda_f == 10.0);
  CHECK(c.train.seed == 9);
  CHECK(c.corpus.mel_bins == 20);
  CHECK(c.generator.mel_bins == 20);
  CHECK(c.discriminator.mel_bins == 20);

  RunConfig e = parse("lambda_a = 0.5\nvariant = s-t\n");
  CHECK(e.train.lambda_a == 0.5);
  CHECK(e.train.lambda_f == 10.0);

  CHECK_THROWS_WITH_AS(parse("seed = 1\nbogus = 2\n"), doctest::Contains("line 2"), ConfigError);
  CHECK_THROWS_AS(parse("seed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse("seed = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse("seed\n"), ConfigError);
  CHECK_THROWS_AS(parse("lr_start = nan\n"), ConfigError);
  CHECK_THROWS_AS(parse("disc_strides = 2,2\n").validate(), ConfigError);
}

TEST_CASE("config write and parse round trip") {
  RunConfig c = testing::small_run_config();
  c.set_variant(Variant::kMultiScaleTime);
  c.train.lr_start = 3.3e-4;
  c.train.schedule = LrSchedule::kDecayUntilStart;
  RunConfig back = parse(config_text(c));
  CHECK(config_text(back) == config_text(c));
  CHECK(back.train.lr_start == c.train.lr_start);
}

TEST_CASE("cross-module config checks") {
  RunConfig c;
  c.generator.mel_bins = 10;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.train.batch_size = 9;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("checkpoint round trip restores networks and optimizer state") {
  const auto dir = testing::scratch_dir("ckpt");
  RunConfig config = testing::small_run_config();
  Corpus corpus(config.corpus);
  GanTrainer t(Generator::build(config.generator, generator_seed(config)),
               Discriminator::build(config.discriminator, discriminator_seed(config)), config.train);
  std::vector<const SynthSample*> b{&corpus[0], &corpus[1]};
  t.train_step(b);
  t.train_step(b);
  save_checkpoint(dir, config, t);

  LoadedCheckpoint ck = load_checkpoint(dir);
  CHECK(ck.iteration == 2);
  CHECK(config_text(ck.config) == config_text(config));
  GanTrainer r = restore_trainer(ck);
  auto pa = t.discriminator().parameters(), pb = r.discriminator().parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(oracle::max_abs_diff(pa[i].tensor.data(), pb[i].tensor.data()) == 0);
  // Continuing from the checkpoint matches continuing in memory bit for bit.
  auto ra = t.train_step(b), rb = r.train_step(b);
  CHECK(ra.iter == rb.iter);
  CHECK(ra.L_d == rb.L_d);
  CHECK(ra.L_g == rb.L_g);

  CHECK_THROWS_AS(load_checkpoint(dir / "missing"), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint with a mismatched network is rejected") {
  const auto dir = testing::scratch_dir("ckpt_bad");
  RunConfig config = testing::small_run_config();
  GanTrainer t(Generator::build(config.generator, 1), Discriminator::build(config.discriminator, 2), config.train);
  save_checkpoint(dir, config, t);
  RunConfig other = config;
  other.discriminator.channels = {4, 6, 8, 12};
  std::ofstream(dir / "config.txt") << config_text(other);
  CHECK_THROWS_AS(load_checkpoint(dir), ShapeError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("pixel mapping and PGM files") {
  CHECK(map_pixel(0.0) == 0);
  CHECK(map_pixel(1.0) == 255);
  CHECK(map_pixel(-3.0) == 0);
  CHECK(map_pixel(7.0) == 255);
  CHECK(map_pixel(0.5) == 128);

  GrayImage ones = map_image(Tensor(Shape{1, 5, 3}, 1.0), 3);
  CHECK(ones.width == 5);
  CHECK(ones.height == 3);
  for (auto p : ones.pixels) CHECK(p == 255);

  const auto dir = testing::scratch_dir("pgm");
  std::filesystem::create_directories(dir);
  GrayImage img{3, 2, {0, 10, 20, 30, 40, 255}};
  write_pgm(dir / "a.pgm", img);
  std::ifstream in(dir / "a.pgm", std::ios::binary);
  std::string magic;
  in >> magic;
  CHECK(magic == "P5");
  GrayImage back = read_pgm(dir / "a.pgm");
  CHECK(back.width == 3);
  CHECK(back.pixels == img.pixels);
  std::filesystem::remove_all(dir);
}

TEST_CASE("map image orientation: time left to right, bin 0 at the bottom") {
  Tensor m(Shape{1, 2, 3}, std::vector<double>{0, 0.2, 1, 0, 0, 0});
  GrayImage img = map_image(m, 3);
  // Frame 0, bin 2 is the top-left pixel; frame 0, bin 0 the bottom-left.
  CHECK(img.pixels[0] == 255);
  CHECK(img.pixels[2 * img.width] == 0);
  CHECK(img.pixels[1 * img.width] == map_pixel(0.2));
  GrayImage tiled = map_image(Tensor(Shape{1, 4}, std::vector<double>{0, 1, 0, 1}), 2);
  CHECK(tiled.height == 2);
  CHECK(tiled.pixels[1] == 255);
  CHECK(tiled.pixels[5] == 255);
}

TEST_CASE("coarse upsampling is blockwise and matches the input size") {
  Tensor c(Shape{1, 2, 2}, std::vector<double>{0, 0.25, 0.5, 1});
  GrayImage img = upsampled_map_image(c, 8, 13, 11);
  CHECK(img.width == 13);
  CHECK(img.height == 11);
  CHECK(distinct_block_values(img) == 4);
  CHECK(mean_pixel(GrayImage{2, 1, {0, 255}}) == 127.5);
  GrayImage noisy{8, 8, {}};
  for (int i = 0; i < 64; ++i) noisy.pixels.push_back(static_cast<std::uint8_t>(i));
  CHECK(distinct_block_values(noisy) == 64);
}

TEST_CASE("heatmaps for each variant") {
  const auto dir = testing::scratch_dir("heat");
  CounterRng rng(4);
  Spectrogram s(oracle::random_tensor(rng, {1, 21, 16}));
  for (Variant v : {Variant::kMultiScaleTimeFrequency, Variant::kSingleScaleTime}) {
    DiscriminatorConfig c;
    c.variant = v;
    c.channels = {4, 6, 8, 10};
    auto r = render_heatmaps(Discriminator::build(c, 3), s, dir / (to_string(v) + "_"));
    CHECK(std::filesystem::exists(r.input_path));
    CHECK(std::filesystem::exists(r.coarse_path));
    CHECK(r.coarse.width == 21);
    CHECK(r.coarse.height == 16);
    if (v == Variant::kSingleScaleTime) {
      CHECK_FALSE(r.fine_path);
      CHECK_FALSE(r.notice.empty());
      CHECK_FALSE(std::filesystem::exists(dir / "s-t_fine.pgm"));
    } else {
      REQUIRE(r.fine_path);
      CHECK(read_pgm(*r.fine_path).pixels == r.fine->pixels);
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("gradcheck suite covers each op once and passes") {
  GradCheckOptions opts;
  auto report = run_gradcheck(standard_gradcheck_suite(3), opts);
  std::set<std::string> names;
  for (const auto& o : report.ops) {
    CHECK(names.insert(o.op).second);
    CHECK(o.coords > 0);
  }
  for (const char* op : {"conv2d", "conv_transpose2d", "conv1d", "conv_transpose1d", "weight_norm", "leaky_relu",
                         "mse", "mae", "tts_loss", "discriminator_loss", "Discriminator.m-tf", "Discriminator.m-t",
                         "Discriminator.s-t", "L_g"})
    CHECK(names.count(op) == 1);
  CHECK(report.passed());
  CHECK(gradcheck_relative_error(1.0, 1.0) == 0.0);
  CHECK(gradcheck_relative_error(0.0, 1e-9) < 1e-2);
}

TEST_CASE("a broken backward rule is caught and named") {
  std::ostringstream out, err;
  const int code = cmd_gradcheck(3, {}, {corrupted_gradcheck_case()}, out, err);
  CHECK(code == kExitFailure);
  CHECK(out.str().find("failing ops: corrupted_square") != std::string::npos);
}

TEST_CASE("command line exit codes") {
  const auto dir = testing::scratch_dir("cli");
  std::string text;
  CHECK(cli({}, &text) == kExitConfig);
  CHECK(cli({"train", "--variant", "xyz", "--out", (dir / "x").string()}, &text) == kExitConfig);
  CHECK(text.find("xyz") != std::string::npos);
  write_file(dir / "bad.cfg", "total_iters = 3\nunknown_key = 1\n");
  CHECK(cli({"train", "--config", (dir / "bad.cfg").string()}, &text) == kExitConfig);
  CHECK(text.find("unknown_key") != std::string::npos);
  CHECK(cli({"heatmap", "--checkpoint", (dir / "none").string()}, &text) == kExitFailure);
  CHECK(cli({"gradcheck", "--inject-fault"}, &text) == kExitFailure);
  CHECK(cli({"gradcheck"}, &text) == kExitOk);

  RunConfig c = testing::small_run_config();
  c.train.total_iters = 2;
  c.checkpoint_every = 1;
  write_file(dir / "ok.cfg", config_text(c));
  CHECK(cli({"train", "--config", (dir / "ok.cfg").string(), "--out", (dir / "run").string()}, &text) == kExitOk);
  std::ifstream csv(dir / "run" / "losses.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 3);
  CHECK(std::filesystem::exists(dir / "run" / "ckpt_000001" / "manifest.txt"));
  CHECK(std::filesystem::exists(dir / "run" / "final" / "manifest.txt"));
  CHECK(cli({"heatmap", "--checkpoint", (dir / "run" / "final").string(), "--sample", "1", "--generator",
             (dir / "run" / "ckpt_000001").string(), "--out", (dir / "h" / "fake_").string()},
            &text) == kExitOk);
  CHECK(std::filesystem::exists(dir / "h" / "fake_fine.pgm"));
  CHECK(cli({"heatmap", "--checkpoint", (dir / "run" / "final").string(), "--sample", "99"}, &text) == kExitFailure);

  // An absurd step size blows the weights up to infinity within two iterations.
  std::string blowup = config_text(c);
  blowup.replace(blowup.find("lr_start = "), std::string("lr_start = ").size(), "lr_start = 1e200 # ");
  write_file(dir / "blowup.cfg", blowup);
  CHECK(cli({"train", "--config", (dir / "blowup.cfg").string(), "--out", (dir / "blowup").string()}, &text) ==
        kExitNumeric);
  CHECK(text.find("non-finite") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("variant flag re-derives loss weights unless set explicitly") {
  const auto dir = testing::scratch_dir("cli_variant");
  const std::string small =
      "total_iters = 1\ncheckpoint_every = 0\nsamples = 4\nbatch_size = 2\n"
      "disc_channels = 4,6,8,10\ngen_embed_dim = 6\ngen_channels = 8\n";
  write_file(dir / "a.cfg", small);
  write_file(dir / "b.cfg", small + "lambda_f = 3\n");
  std::string text;
  REQUIRE(cli({"train", "--config", (dir / "a.cfg").string(), "--variant", "s-t", "--out", (dir / "a").string()},
              &text) == kExitOk);
  LoadedCheckpoint a = load_checkpoint(dir / "a" / "final");
  CHECK(a.config.discriminator.variant == Variant::kSingleScaleTime);
  CHECK(a.config.train.lambda_a == 1.0);
  CHECK(a.config.train.lambda_f == 10.0);
  REQUIRE(cli({"train", "--config", (dir / "b.cfg").string(), "--variant", "s-t", "--out", (dir / "b").string()},
              &text) == kExitOk);
  LoadedCheckpoint b = load_checkpoint(dir / "b" / "final");
  CHECK(b.config.train.lambda_a == 1.0);
  CHECK(b.config.train.lambda_f == 3.0);
  std::filesystem::remove_all(dir);
}
