#include <doctest.h>

#include "oracles.hpp"
#include "specgan/ops.hpp"
#include "specgan/trainer.hpp"

using namespace specgan;

namespace {

double mean_sq_from(double c, const Tensor& t) {
  double s = 0;
  for (double x : t.data()) s += (c - x) * (c - x);
  return s / static_cast<double>(t.size());
}

DiscriminatorOutput constant_output(double value, bool with_fine) {
  DiscriminatorOutput o;
  o.coarse = Tensor(Shape{1, 2, 2}, value);
  if (with_fine) o.fine = Tensor(Shape{1, 16, 16}, value);
  return o;
}

Discriminator small(Variant v) {
  DiscriminatorConfig c;
  c.variant = v;
  c.channels = {4, 6, 8, 10};
  c.mel_bins = 8;
  return Discriminator::build(c, 21);
}

}  // namespace

TEST_CASE("perfect discriminator has zero loss, a fooled one does not") {
  CHECK(discriminator_loss(constant_output(1, true), constant_output(0, true)).item() == 0.0);
  CHECK(discriminator_loss(constant_output(1, false), constant_output(0, false)).item() == 0.0);
  CHECK(discriminator_loss(constant_output(0, true), constant_output(1, true)).item() == doctest::Approx(4.0));
  CHECK(discriminator_loss(constant_output(0, false), constant_output(1, false)).item() == doctest::Approx(2.0));
  CHECK_THROWS_AS(discriminator_loss(constant_output(1, true), constant_output(0, false)), ShapeError);
}

TEST_CASE("discriminator loss matches hand-computed least squares terms") {
  CounterRng rng(31);
  for (Variant v : {Variant::kMultiScaleTimeFrequency, Variant::kMultiScaleTime, Variant::kSingleScaleTime}) {
    Discriminator d = small(v);
    auto r = d.discriminate(Spectrogram(oracle::random_tensor(rng, {1, 12, 8})));
    auto f = d.discriminate(Spectrogram(oracle::random_tensor(rng, {1, 12, 8})));
    double want = mean_sq_from(1, r.coarse) + mean_sq_from(0, f.coarse);
    if (r.fine) want += mean_sq_from(1, *r.fine) + mean_sq_from(0, *f.fine);
    CHECK(std::abs(discriminator_loss(r, f).item() - want) < 1e-12);
  }
}

TEST_CASE("identical fake and real: no feature loss, adversarial loss is the real-side error") {
  CounterRng rng(32);
  for (Variant v : {Variant::kMultiScaleTimeFrequency, Variant::kMultiScaleTime, Variant::kSingleScaleTime}) {
    Discriminator d = small(v);
    Spectrogram s(oracle::random_tensor(rng, {1, 10, 8}));
    auto r = d.discriminate(s);
    auto f = d.discriminate(s);
    auto l = generator_adv_losses(f, r);
    CHECK(l.feature.item() == 0.0);
    double want = mean_sq_from(1, r.coarse);
    if (r.fine) want += mean_sq_from(1, *r.fine);
    CHECK(std::abs(l.adversarial.item() - want) < 1e-12);
  }
}

TEST_CASE("feature loss is the mean over maps of the per-map mean absolute error") {
  CounterRng rng(33);
  Discriminator d = small(Variant::kMultiScaleTimeFrequency);
  auto r = d.discriminate(Spectrogram(oracle::random_tensor(rng, {1, 12, 8})));
  auto f = d.discriminate(Spectrogram(oracle::random_tensor(rng, {1, 12, 8})));
  double want = 0;
  for (std::size_t i = 0; i < r.hidden.size(); ++i) {
    double s = 0;
    for (std::size_t k = 0; k < r.hidden[i].size(); ++k) s += std::abs(f.hidden[i].data()[k] - r.hidden[i].data()[k]);
    want += s / static_cast<double>(r.hidden[i].size());
  }
  want /= static_cast<double>(r.hidden.size());
  CHECK(std::abs(generator_adv_losses(f, r).feature.item() - want) < 1e-12);
  DiscriminatorOutput short_real = r;
  short_real.hidden.pop_back();
  CHECK_THROWS_AS(generator_adv_losses(f, short_real), ShapeError);
}

TEST_CASE("real side of the adversarial losses gets no gradient") {
  CounterRng rng(34);
  Discriminator d = small(Variant::kMultiScaleTimeFrequency);
  d.set_trainable(false);
  Tensor xr = oracle::random_tensor(rng, {1, 12, 8}, true);
  Tensor xf = oracle::random_tensor(rng, {1, 12, 8}, true);
  auto l = generator_adv_losses(d.discriminate(Spectrogram(xf)), d.discriminate(Spectrogram(xr)));
  add(l.adversarial, l.feature).backward();
  d.set_trainable(true);
  CHECK(xf.has_grad());
  CHECK_FALSE(xr.has_grad());
}

TEST_CASE("default loss weights per variant") {
  CHECK(default_lambda_a(Variant::kMultiScaleTimeFrequency) == 0.2);
  CHECK(default_lambda_f(Variant::kMultiScaleTime) == 2.0);
  CHECK(default_lambda_a(Variant::kSingleScaleTime) == 1.0);
  CHECK(default_lambda_f(Variant::kSingleScaleTime) == 10.0);
}
