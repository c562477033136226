#include <doctest.h>

#include "oracles.hpp"
#include "specgan/discriminator.hpp"
#include "specgan/generator.hpp"
#include "specgan/layers.hpp"
#include "specgan/ops.hpp"

using namespace specgan;

namespace {

Spectrogram random_spectrogram(CounterRng& rng, std::size_t frames, std::size_t bins) {
  return Spectrogram(oracle::random_tensor(rng, {1, frames, bins}));
}

DiscriminatorConfig config_for(Variant v, std::size_t bins = 16) {
  DiscriminatorConfig c;
  c.variant = v;
  c.mel_bins = bins;
  return c;
}

}  // namespace

TEST_CASE("weight-normalized layers start with effective weight equal to v") {
  CounterRng rng(1);
  Conv2d conv(3, 4, ConvGeometry{3, 3, 1, 1, 1, 1, 0, 0}, rng);
  CHECK(oracle::max_abs_diff(conv.effective_weight().data(), conv.params().v.data()) < 1e-14);
  ConvTranspose2d deconv(4, 2, ConvGeometry{4, 4, 2, 2, 1, 1, 0, 0}, rng);
  CHECK(oracle::max_abs_diff(deconv.effective_weight().data(), deconv.params().v.data()) < 1e-14);
  CHECK(deconv.in_channels() == 4);
  CHECK(deconv.out_channels() == 2);
  for (double b : conv.params().bias.data()) CHECK(b == 0.0);
}

TEST_CASE("layer output shapes") {
  CounterRng rng(2);
  ConvTranspose2d deconv(4, 2, ConvGeometry{4, 4, 2, 2, 1, 1, 0, 0}, rng);
  Tensor x(Shape{4, 3, 5}, 0.5);
  CHECK(deconv.forward_to(x, 7, 10).shape() == Shape{2, 7, 10});
  CHECK(deconv.forward_to(x, 6, 11).shape() == Shape{2, 6, 11});
  CHECK_THROWS_AS(deconv.forward_to(x, 9, 10), ShapeError);
  Conv1d c1(3, 5, 4, 2, 1, rng);
  CHECK(c1.forward(Tensor(Shape{3, 16}, 1.0)).shape() == Shape{5, 8});
  ConvTranspose1d t1(5, 3, 4, 2, 1, rng);
  CHECK(t1.forward_to(Tensor(Shape{5, 8}, 1.0), 17).shape() == Shape{3, 17});
  Linear lin(3, 2, rng);
  CHECK(lin.forward(Tensor(Shape{4, 3}, 1.0)).shape() == Shape{4, 2});
}

TEST_CASE("spectrogram validation") {
  CHECK_THROWS_AS(Spectrogram(Tensor(Shape{2, 3, 4}, 0.0)), ShapeError);
  CHECK_THROWS_AS(Spectrogram(Tensor(Shape{1, 0, 4}, 0.0)), ShapeError);
  Tensor bad(Shape{1, 2, 2}, 0.0);
  bad.mutable_data()[1] = NAN;
  CHECK_THROWS_AS(Spectrogram{bad}, NumericError);
}

TEST_CASE("variant names round trip") {
  for (Variant v : {Variant::kSingleScaleTime, Variant::kMultiScaleTime, Variant::kMultiScaleTimeFrequency})
    CHECK(parse_variant(to_string(v)) == v);
  CHECK(parse_variant("M-TF") == Variant::kMultiScaleTimeFrequency);
  CHECK_THROWS_AS(parse_variant("tf"), ConfigError);
}

TEST_CASE("discriminator config validation") {
  DiscriminatorConfig c;
  c.strides = {2, 2, 4};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = DiscriminatorConfig{};
  c.channels = {32, 64};
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("default M-TF discriminator size and bottleneck") {
  Discriminator d = Discriminator::build(config_for(Variant::kMultiScaleTimeFrequency), 5);
  CHECK(parameter_count(d.parameters()) == 1544676);
  CounterRng rng(3);
  auto out = d.discriminate(random_spectrogram(rng, 40, 16));
  CHECK(out.coarse.shape() == Shape{1, 5, 2});
  REQUIRE(out.fine);
  CHECK(out.fine->shape() == Shape{1, 40, 16});
  REQUIRE(out.hidden.size() == d.hidden_count());
  // Input conv, three encoder stages, three decoder stages.
  CHECK(out.hidden.size() == 7);
  CHECK(out.hidden[3].shape() == Shape{256, 5, 2});
}

TEST_CASE("pad and crop for sizes that are not multiples of 8") {
  Discriminator d = Discriminator::build(config_for(Variant::kMultiScaleTimeFrequency), 6);
  CounterRng rng(4);
  for (auto [t, n] : {std::pair<std::size_t, std::size_t>{9, 17}, {13, 11}, {8, 8}, {31, 80}}) {
    auto out = d.discriminate(random_spectrogram(rng, t, n));
    CHECK(out.fine->shape() == Shape{1, t, n});
    CHECK(out.coarse.shape() == Shape{1, (t + 7) / 8, (n + 7) / 8});
  }
}

TEST_CASE("1-D variants") {
  CounterRng rng(5);
  Discriminator mt = Discriminator::build(config_for(Variant::kMultiScaleTime), 7);
  auto o = mt.discriminate(random_spectrogram(rng, 21, 16));
  CHECK(o.coarse.shape() == Shape{1, 3});
  REQUIRE(o.fine);
  CHECK(o.fine->shape() == Shape{1, 21});
  Discriminator st = Discriminator::build(config_for(Variant::kSingleScaleTime), 7);
  auto s = st.discriminate(random_spectrogram(rng, 21, 16));
  CHECK(s.coarse.shape() == Shape{1, 3});
  CHECK_FALSE(s.fine);
  CHECK(s.hidden.size() == st.hidden_count());
  CHECK(parameter_count(st.parameters()) < parameter_count(mt.parameters()));
  CHECK_THROWS_AS(st.discriminate(random_spectrogram(rng, 21, 12)), ShapeError);
}

TEST_CASE("batched discrimination equals one pass per item") {
  CounterRng rng(6);
  for (Variant v : {Variant::kMultiScaleTimeFrequency, Variant::kMultiScaleTime, Variant::kSingleScaleTime}) {
    Discriminator d = Discriminator::build(config_for(v), 8);
    std::vector<Spectrogram> batch{random_spectrogram(rng, 19, 16), random_spectrogram(rng, 32, 16),
                                   random_spectrogram(rng, 9, 16)};
    auto w = d.effective_weights();
    auto outs = d.discriminate_batch(batch, w);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      auto single = d.discriminate(batch[i]);
      CHECK(oracle::max_abs_diff(outs[i].coarse.data(), single.coarse.data()) < 1e-12);
      if (single.fine) CHECK(oracle::max_abs_diff(outs[i].fine->data(), single.fine->data()) < 1e-12);
      for (std::size_t h = 0; h < single.hidden.size(); ++h)
        CHECK(oracle::max_abs_diff(outs[i].hidden[h].data(), single.hidden[h].data()) < 1e-12);
    }
  }
}

TEST_CASE("skip connections feed the fine map but not the coarse map") {
  CounterRng rng(7);
  Discriminator d = Discriminator::build(config_for(Variant::kMultiScaleTimeFrequency), 9);
  Spectrogram s = random_spectrogram(rng, 24, 16);
  auto full = d.discriminate(s);
  for (std::size_t level = 0; level < 3; ++level) {
    auto masked = d.discriminate_masking_skip(s, level);
    CHECK(oracle::max_abs_diff(masked.coarse.data(), full.coarse.data()) == 0.0);
    CHECK(oracle::max_abs_diff(masked.fine->data(), full.fine->data()) > 1e-6);
  }
  CHECK_THROWS(d.discriminate_masking_skip(s, 3));
}

TEST_CASE("frozen discriminator passes gradient to its input only") {
  CounterRng rng(8);
  Discriminator d = Discriminator::build(config_for(Variant::kMultiScaleTimeFrequency), 10);
  Tensor x = oracle::random_tensor(rng, {1, 16, 16}, true);
  d.set_trainable(false);
  sum(d.discriminate(Spectrogram(x)).coarse).backward();
  d.set_trainable(true);
  CHECK(x.has_grad());
  for (const auto& p : d.parameters()) CHECK_FALSE(p.tensor.has_grad());
}

TEST_CASE("generator shapes and duration handling") {
  GeneratorConfig gc;
  Generator g = Generator::build(gc, 3);
  const std::vector<std::size_t> tokens{1, 5, 7}, durations{2, 4, 3};
  auto out = g.generate(tokens, durations);
  CHECK(out.spectrogram.values().shape() == Shape{1, 9, 16});
  CHECK(out.durations.shape() == Shape{3});
  const std::vector<std::size_t> wrong{2, 4};
  CHECK_THROWS_AS(g.generate(tokens, wrong), std::invalid_argument);
  const std::vector<std::size_t> zero{2, 0, 1};
  CHECK_THROWS_AS(g.generate(tokens, zero), std::invalid_argument);
  const std::vector<std::size_t> oov{12};
  const std::vector<std::size_t> one{1};
  CHECK_THROWS_AS(g.generate(oov, one), std::out_of_range);
  std::vector<std::size_t> used;
  auto inf = g.infer(tokens, &used);
  std::size_t total = 0;
  for (auto d : used) total += d;
  CHECK(inf.spectrogram.frames() == total);
}

TEST_CASE("round_durations clamps to at least one frame") {
  const double raw[] = {-3.0, 0.4, 1.5, 2.49};
  CHECK(round_durations(raw) == std::vector<std::size_t>{1, 1, 2, 2});
  const double bad[] = {NAN};
  CHECK_THROWS_AS(round_durations(bad), NumericError);
}

TEST_CASE("tts loss terms") {
  Tensor pred(Shape{1, 2, 1}, std::vector<double>{1, 3});
  Tensor target(Shape{1, 2, 1}, std::vector<double>{0, 1});
  Tensor dur(Shape{2}, std::vector<double>{2, 2});
  const std::vector<std::size_t> d{1, 4};
  auto l = tts_loss(pred, target, dur, d, 0.02);
  CHECK(l.spec.item() == doctest::Approx((1 + 4) / 2.0 + (1 + 2) / 2.0));
  CHECK(l.dur.item() == doctest::Approx((1 + 4) / 2.0 + (1 + 2) / 2.0));
  CHECK(l.total.item() == doctest::Approx(l.spec.item() * 1.02));
}
