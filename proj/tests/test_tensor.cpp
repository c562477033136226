#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "specgan/ops.hpp"
#include "specgan/tensor.hpp"

using namespace specgan;

TEST_CASE("shape mismatch on construction names both sizes") {
  CHECK_THROWS_AS(Tensor(Shape{2, 3}, std::vector<double>(5)), ShapeError);
  CHECK_THROWS_WITH(Tensor(Shape{2, 3}, std::vector<double>(5)), doctest::Contains("(2,3)"));
}

TEST_CASE("copies alias storage, clone and detach do not") {
  Tensor a(Shape{2}, std::vector<double>{1, 2});
  Tensor b = a;
  b.mutable_data()[0] = 5;
  CHECK(a.data()[0] == 5);
  Tensor c = a.clone();
  c.mutable_data()[0] = 7;
  CHECK(a.data()[0] == 5);
  a.set_requires_grad(true);
  CHECK_FALSE(a.detach().requires_grad());
  CHECK(a.clone().requires_grad());
}

TEST_CASE("backward of a product and leaf accumulation") {
  Tensor x(Shape{3}, std::vector<double>{1, 2, 3});
  Tensor y(Shape{3}, std::vector<double>{4, 5, 6});
  x.set_requires_grad(true);
  y.set_requires_grad(true);
  sum(mul(x, y)).backward();
  CHECK(x.grad()[1] == 5);
  CHECK(y.grad()[2] == 3);
  sum(mul(x, y)).backward();
  CHECK(x.grad()[1] == 10);
  x.zero_grad();
  CHECK_FALSE(x.has_grad());
}

TEST_CASE("a tensor used twice receives both contributions") {
  Tensor x(Shape{}, std::vector<double>{3});
  x.set_requires_grad(true);
  Tensor y = mul(x, x);  // x^2
  add(y, mul(y, x)).backward();  // x^2 + x^3 -> 2x + 3x^2
  CHECK(x.grad()[0] == doctest::Approx(6 + 27));
}

TEST_CASE("backward needs a scalar") {
  Tensor x(Shape{2}, 1.0);
  x.set_requires_grad(true);
  CHECK_THROWS_AS(scale(x, 2).backward(), ShapeError);
}

TEST_CASE("no-grad guard records nothing and restores the previous mode") {
  Tensor x(Shape{2}, 1.0);
  x.set_requires_grad(true);
  {
    NoGradGuard g;
    CHECK_FALSE(grad_enabled());
    Tensor y = scale(x, 2);
    CHECK_FALSE(y.requires_grad());
    {
      NoGradGuard inner;
    }
    CHECK_FALSE(grad_enabled());
  }
  CHECK(grad_enabled());
  CHECK(scale(x, 2).requires_grad());
}

TEST_CASE("scalar broadcast and shape errors in elementwise ops") {
  Tensor a(Shape{2, 2}, std::vector<double>{1, 2, 3, 4});
  Tensor s = Tensor::scalar(10);
  CHECK(add(a, s).data()[3] == 14);
  CHECK(sub(s, a).data()[0] == 9);
  CHECK_THROWS_AS(add(a, Tensor(Shape{3}, 0.0)), ShapeError);
  CHECK_THROWS_AS(matmul(a, Tensor(Shape{3, 1}, 0.0)), ShapeError);
}

TEST_CASE("mse and mae values; targets receive no gradient") {
  Tensor p(Shape{2}, std::vector<double>{1, -1});
  Tensor t(Shape{2}, std::vector<double>{0, 1});
  p.set_requires_grad(true);
  t.set_requires_grad(true);
  Tensor l = add(mse(p, t), mae(p, t));
  CHECK(l.item() == doctest::Approx((1 + 4) / 2.0 + (1 + 2) / 2.0));
  l.backward();
  CHECK_FALSE(t.has_grad());
  CHECK(mse(p, 1.0).item() == doctest::Approx(2.0));
}

TEST_CASE("mae subgradient is zero at a tie") {
  Tensor p(Shape{1}, std::vector<double>{2});
  p.set_requires_grad(true);
  mae(p, Tensor(Shape{1}, std::vector<double>{2})).backward();
  CHECK(p.grad()[0] == 0.0);
}

TEST_CASE("pad then crop is the identity and gradients pass through the kept corner") {
  CounterRng rng(3);
  Tensor x = oracle::random_tensor(rng, {2, 5, 3}, true);
  Tensor y = crop_leading(pad_trailing(x, {2, 8, 8}), {2, 5, 3});
  CHECK(oracle::max_abs_diff(x.data(), y.data()) == 0.0);
  sum(y).backward();
  for (double g : x.grad()) CHECK(g == 1.0);
  CHECK_THROWS_AS(pad_trailing(x, {2, 4, 8}), ShapeError);
  CHECK_THROWS_AS(crop_leading(x, {2, 6, 3}), ShapeError);
}

TEST_CASE("repeat_columns and embedding_lookup") {
  Tensor x(Shape{1, 3}, std::vector<double>{1, 2, 3});
  const std::size_t reps[] = {2, 0, 1};
  Tensor y = repeat_columns(x, reps);
  CHECK(y.shape() == Shape{1, 3});
  CHECK(y.data()[1] == 1);
  CHECK(y.data()[2] == 3);
  Tensor table(Shape{2, 2}, std::vector<double>{1, 2, 3, 4});
  const std::size_t bad[] = {2};
  CHECK_THROWS_AS(embedding_lookup(table, bad), std::out_of_range);
}

TEST_CASE("leaky relu slope") {
  Tensor x(Shape{2}, std::vector<double>{-2, 3});
  x.set_requires_grad(true);
  Tensor y = leaky_relu(x, 0.2);
  CHECK(y.data()[0] == doctest::Approx(-0.4));
  sum(y).backward();
  CHECK(x.grad()[0] == doctest::Approx(0.2));
  CHECK(x.grad()[1] == 1.0);
}
