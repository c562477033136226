#include <doctest.h>

#include "oracles.hpp"
#include "specgan/conv.hpp"
#include "specgan/ops.hpp"

using namespace specgan;

namespace {

ConvGeometry random_geometry(CounterRng& rng) {
  ConvGeometry g;
  g.kernel_h = rng.uniform_int(1, 4);
  g.kernel_w = rng.uniform_int(1, 4);
  g.stride_h = rng.uniform_int(1, 3);
  g.stride_w = rng.uniform_int(1, 3);
  g.pad_h = rng.uniform_int(0, g.kernel_h - 1);
  g.pad_w = rng.uniform_int(0, g.kernel_w - 1);
  return g;
}

}  // namespace

TEST_CASE("conv2d matches the nested-loop oracle") {
  CounterRng rng(101);
  for (int trial = 0; trial < 40; ++trial) {
    const ConvGeometry g = random_geometry(rng);
    const std::size_t C = rng.uniform_int(1, 3), O = rng.uniform_int(1, 4);
    const std::size_t H = rng.uniform_int(g.kernel_h, 9), W = rng.uniform_int(g.kernel_w, 9);
    Tensor x = oracle::random_tensor(rng, {C, H, W});
    Tensor w = oracle::random_tensor(rng, {O, C, g.kernel_h, g.kernel_w});
    Tensor b = oracle::random_tensor(rng, {O});
    std::size_t oh, ow;
    auto want = oracle::conv2d({x.data().begin(), x.data().end()}, C, H, W, {w.data().begin(), w.data().end()}, O,
                               {b.data().begin(), b.data().end()}, g, oh, ow);
    Tensor y = conv2d(x, w, b, g);
    REQUIRE(y.shape() == Shape{O, oh, ow});
    CHECK(oracle::max_abs_diff(y.data(), want) < 1e-12);
  }
}

TEST_CASE("conv_transpose2d matches the scatter oracle") {
  CounterRng rng(202);
  for (int trial = 0; trial < 40; ++trial) {
    ConvGeometry g = random_geometry(rng);
    g.out_pad_h = rng.uniform_int(0, g.stride_h - 1);
    g.out_pad_w = rng.uniform_int(0, g.stride_w - 1);
    const std::size_t C = rng.uniform_int(1, 3), O = rng.uniform_int(1, 4);
    const std::size_t H = rng.uniform_int(1, 6), W = rng.uniform_int(1, 6);
    if ((H - 1) * g.stride_h + g.kernel_h + g.out_pad_h <= 2 * g.pad_h) continue;
    if ((W - 1) * g.stride_w + g.kernel_w + g.out_pad_w <= 2 * g.pad_w) continue;
    Tensor x = oracle::random_tensor(rng, {C, H, W});
    Tensor w = oracle::random_tensor(rng, {C, O, g.kernel_h, g.kernel_w});
    Tensor b = oracle::random_tensor(rng, {O});
    std::size_t oh, ow;
    auto want = oracle::conv_transpose2d({x.data().begin(), x.data().end()}, C, H, W,
                                         {w.data().begin(), w.data().end()}, O, {b.data().begin(), b.data().end()},
                                         g, oh, ow);
    Tensor y = conv_transpose2d(x, w, b, g);
    REQUIRE(y.shape() == Shape{O, oh, ow});
    CHECK(oracle::max_abs_diff(y.data(), want) < 1e-12);
  }
}

TEST_CASE("transposed conv is the input gradient of conv") {
  CounterRng rng(303);
  const ConvGeometry g{4, 3, 2, 2, 1, 1, 0, 0};
  Tensor x = oracle::random_tensor(rng, {3, 9, 8}, true);
  Tensor w = oracle::random_tensor(rng, {5, 3, 4, 3});
  Tensor y = conv2d(x, w, Tensor(), g);
  Tensor r = oracle::random_tensor(rng, y.shape());
  sum(mul(y, r)).backward();
  ConvGeometry gt = g;
  gt.out_pad_h = output_padding_for(y.dim(1), 9, 4, 2, 1, "h");
  gt.out_pad_w = output_padding_for(y.dim(2), 8, 3, 2, 1, "w");
  // The conv kernel [O,C,..] is the transposed kernel [in=O, out=C, ..].
  Tensor back = conv_transpose2d(r, w, Tensor(), gt);
  REQUIRE(back.shape() == x.shape());
  CHECK(oracle::max_abs_diff(back.data(), x.grad()) < 1e-12);
}

TEST_CASE("packed batch equals per-item convolution") {
  CounterRng rng(404);
  const ConvGeometry g{4, 4, 2, 2, 1, 1, 0, 0};
  std::vector<Tensor> xs{oracle::random_tensor(rng, {3, 8, 16}), oracle::random_tensor(rng, {3, 16, 8}),
                         oracle::random_tensor(rng, {3, 4, 4})};
  Tensor w = oracle::random_tensor(rng, {2, 3, 4, 4});
  Tensor b = oracle::random_tensor(rng, {2});
  auto items = unpack(conv2d_packed(xs, w, b, g));
  REQUIRE(items.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    Tensor single = conv2d(xs[i], w, b, g);
    REQUIRE(items[i].shape() == single.shape());
    CHECK(oracle::max_abs_diff(items[i].data(), single.data()) < 1e-12);
  }

  Tensor wt = oracle::random_tensor(rng, {2, 3, 4, 4});
  Tensor bt = oracle::random_tensor(rng, {3});
  std::vector<Tensor> ys{items[0], items[2]};
  ConvGeometry g0 = g, g1 = g;
  g1.out_pad_h = 1;
  const ConvGeometry gs[] = {g0, g1};
  auto back = unpack(conv_transpose2d_packed(ys, wt, bt, gs));
  CHECK(oracle::max_abs_diff(back[0].data(), conv_transpose2d(ys[0], wt, bt, g0).data()) < 1e-12);
  CHECK(oracle::max_abs_diff(back[1].data(), conv_transpose2d(ys[1], wt, bt, g1).data()) < 1e-12);
  CHECK(back[1].shape() == Shape{3, 5, 4});
}

TEST_CASE("1-D convolutions agree with the 2-D oracle on [C,T,1]") {
  CounterRng rng(505);
  Tensor x = oracle::random_tensor(rng, {3, 11});
  Tensor w = oracle::random_tensor(rng, {4, 3, 4});
  Tensor b = oracle::random_tensor(rng, {4});
  std::size_t oh, ow;
  auto want = oracle::conv2d({x.data().begin(), x.data().end()}, 3, 11, 1, {w.data().begin(), w.data().end()}, 4,
                             {b.data().begin(), b.data().end()}, ConvGeometry{4, 1, 2, 1, 1, 0, 0, 0}, oh, ow);
  Tensor y = conv1d(x, w, b, 2, 1);
  CHECK(y.shape() == Shape{4, 5});
  CHECK(oracle::max_abs_diff(y.data(), want) < 1e-12);

  Tensor wt = oracle::random_tensor(rng, {4, 3, 4});
  Tensor bt(Shape{3}, std::vector<double>{0.5, -0.5, 0.25});
  Tensor yt = conv_transpose1d(y, wt, bt, 2, 1, 1);
  REQUIRE(yt.shape() == Shape{3, 11});
  auto want_t = oracle::conv_transpose2d({y.data().begin(), y.data().end()}, 4, 5, 1,
                                         {wt.data().begin(), wt.data().end()}, 3, {0.5, -0.5, 0.25},
                                         ConvGeometry{4, 1, 2, 1, 1, 0, 1, 0}, oh, ow);
  CHECK(oracle::max_abs_diff(yt.data(), want_t) < 1e-12);
}

TEST_CASE("output size arithmetic and errors") {
  CHECK(conv_output_size(16, 4, 2, 1, "t") == 8);
  CHECK(conv_transpose_output_size(8, 4, 2, 1, 0, "t") == 16);
  CHECK(output_padding_for(3, 7, 4, 2, 1, "t") == 1);
  CHECK_THROWS_AS(output_padding_for(3, 9, 4, 2, 1, "time"), ShapeError);
  CHECK_THROWS_WITH(conv_output_size(1, 4, 1, 0, "frequency"), doctest::Contains("frequency"));
  Tensor x(Shape{2, 4, 4}, 1.0);
  CHECK_THROWS_AS(conv2d(x, Tensor(Shape{1, 3, 3, 3}, 1.0), Tensor(), ConvGeometry{3, 3}), ShapeError);
  ConvGeometry bad{3, 3, 2, 2, 0, 0, 2, 0};
  CHECK_THROWS_AS(conv_transpose2d(x, Tensor(Shape{2, 1, 3, 3}, 1.0), Tensor(), bad), ShapeError);
}

TEST_CASE("weight norm rescales each output slice to norm g") {
  CounterRng rng(606);
  Tensor v = oracle::random_tensor(rng, {3, 2, 2, 2});
  Tensor g(Shape{3}, std::vector<double>{0.5, 1.0, 2.0});
  Tensor w = weight_norm(v, g, 0);
  for (std::size_t o = 0; o < 3; ++o) {
    double sq = 0;
    for (std::size_t i = 0; i < 8; ++i) sq += w.data()[o * 8 + i] * w.data()[o * 8 + i];
    CHECK(std::sqrt(sq) == doctest::Approx(g.data()[o]).epsilon(1e-12));
  }
  Tensor v1 = oracle::random_tensor(rng, {2, 3, 4});
  Tensor w1 = weight_norm(v1, g, 1);
  for (std::size_t o = 0; o < 3; ++o) {
    double sq = 0;
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t k = 0; k < 4; ++k) sq += std::pow(w1.data()[(a * 3 + o) * 4 + k], 2);
    CHECK(std::sqrt(sq) == doctest::Approx(g.data()[o]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(weight_norm(Tensor(Shape{2, 3}, 0.0), Tensor(Shape{2}, 1.0), 0), NumericError);
}
