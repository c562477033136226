#include "specgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "specgan/conv.hpp"
#include "specgan/discriminator.hpp"
#include "specgan/generator.hpp"
#include "specgan/layers.hpp"
#include "specgan/ops.hpp"
#include "specgan/random.hpp"
#include "specgan/trainer.hpp"

namespace specgan {

double gradcheck_relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

bool GradCheckReport::passed() const {
  return std::all_of(ops.begin(), ops.end(), [](const OpCheck& o) { return o.passed; });
}

std::vector<std::string> GradCheckReport::failed_ops() const {
  std::vector<std::string> out;
  for (const auto& o : ops)
    if (!o.passed) out.push_back(o.op);
  return out;
}

GradCheckReport run_gradcheck(const std::vector<GradCheckCase>& cases, const GradCheckOptions& options) {
  GradCheckReport report;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto& k = cases[c];
    auto it = std::find_if(report.ops.begin(), report.ops.end(), [&](const OpCheck& o) { return o.op == k.op; });
    if (it == report.ops.end()) {
      report.ops.push_back({k.op});
      it = report.ops.end() - 1;
    }
    std::vector<Tensor> inputs = k.inputs;
    for (auto& t : inputs) t.zero_grad();
    Tensor loss = k.loss();
    loss.backward();
    CounterRng rng(hash_key(options.seed, c, 0));
    for (auto& t : inputs) {
      std::vector<double> analytic = t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                                  : std::vector<double>(t.size(), 0.0);
      std::vector<std::size_t> coords;
      if (t.size() <= options.max_coords) {
        for (std::size_t i = 0; i < t.size(); ++i) coords.push_back(i);
      } else {
        for (std::size_t i = 0; i < options.max_coords; ++i) coords.push_back(rng.uniform_int(0, t.size() - 1));
      }
      for (auto i : coords) {
        auto data = t.mutable_data();
        const double saved = data[i];
        double plus, minus;
        {
          NoGradGuard no_grad;
          data[i] = saved + options.eps;
          plus = k.loss().item();
          data[i] = saved - options.eps;
          minus = k.loss().item();
        }
        data[i] = saved;
        const double numeric = (plus - minus) / (2.0 * options.eps);
        const double err = gradcheck_relative_error(analytic[i], numeric);
        it->worst = std::max(it->worst, std::isfinite(err) ? err : INFINITY);
        ++it->coords;
      }
      t.zero_grad();
    }
    it->passed = it->worst < options.tolerance;
  }
  return report;
}

namespace {

Tensor random_tensor(CounterRng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  Tensor t(std::move(shape), std::move(v));
  t.set_requires_grad(true);
  return t;
}

// Values bounded away from zero so kinks sit far from the probes.
Tensor away_from_zero(CounterRng& rng, Shape shape) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
  Tensor t(std::move(shape), std::move(v));
  t.set_requires_grad(true);
  return t;
}

Tensor constant_tensor(CounterRng& rng, Shape shape) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor(std::move(shape), std::move(v));
}

// Reduces y to a scalar with fixed random weights so every output element
// gets a distinct gradient.
Tensor probe(const Tensor& y, const Tensor& weights) { return sum(mul(y, weights)); }

std::vector<Tensor> param_tensors(const ParamList& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

}  // namespace

std::vector<GradCheckCase> standard_gradcheck_suite(std::uint64_t seed) {
  CounterRng rng(hash_key(seed, 0x6C, 0));
  std::vector<GradCheckCase> cases;
  auto unary = [&](std::string op, Tensor x, Shape out_shape, std::function<Tensor(const Tensor&)> f) {
    Tensor w = constant_tensor(rng, std::move(out_shape));
    cases.push_back({std::move(op), {x}, [x, w, f] { return probe(f(x), w); }});
  };
  auto binary = [&](std::string op, Tensor a, Tensor b, Shape out_shape,
                    std::function<Tensor(const Tensor&, const Tensor&)> f) {
    Tensor w = constant_tensor(rng, std::move(out_shape));
    cases.push_back({std::move(op), {a, b}, [a, b, w, f] { return probe(f(a, b), w); }});
  };

  // Elementwise and reductions.
  binary("add", random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4}), {3, 4}, add);
  binary("add", random_tensor(rng, {3, 4}), random_tensor(rng, {}), {3, 4}, add);
  binary("sub", random_tensor(rng, {2, 5}), random_tensor(rng, {2, 5}), {2, 5}, sub);
  binary("sub", random_tensor(rng, {}), random_tensor(rng, {2, 5}), {2, 5}, sub);
  binary("mul", random_tensor(rng, {4, 3}), random_tensor(rng, {4, 3}), {4, 3}, mul);
  binary("mul", random_tensor(rng, {4, 3}), random_tensor(rng, {1}), {4, 3}, mul);
  unary("scale", random_tensor(rng, {5}), {5}, [](const Tensor& x) { return scale(x, -1.7); });
  unary("add_scalar", random_tensor(rng, {5}), {5}, [](const Tensor& x) { return add_scalar(x, 0.3); });
  unary("sum", random_tensor(rng, {2, 3, 2}), {}, sum);
  unary("mean", random_tensor(rng, {2, 3, 2}), {}, mean);
  binary("matmul", random_tensor(rng, {3, 5}), random_tensor(rng, {5, 2}), {3, 2}, matmul);
  {
    Tensor x = random_tensor(rng, {3, 4});
    Tensor target = constant_tensor(rng, {3, 4});
    cases.push_back({"mse", {x}, [x, target] { return mse(x, target); }});
    cases.push_back({"mse", {x}, [x] { return mse(x, 1.0); }});
    Tensor y = random_tensor(rng, {3, 4});
    Tensor target2 = constant_tensor(rng, {3, 4});
    cases.push_back({"mae", {y}, [y, target2] { return mae(y, target2); }});
  }
  unary("leaky_relu", away_from_zero(rng, {4, 5}), {4, 5}, [](const Tensor& x) { return leaky_relu(x, 0.2); });

  // Shape ops.
  binary("concat_channels", random_tensor(rng, {2, 3, 2}), random_tensor(rng, {3, 3, 2}), {5, 3, 2},
         concat_channels);
  unary("slice_channels", random_tensor(rng, {5, 3}), {2, 3}, [](const Tensor& x) { return slice_channels(x, 2, 2); });
  unary("reshape", random_tensor(rng, {2, 6}), {3, 4}, [](const Tensor& x) { return reshape(x, {3, 4}); });
  unary("transpose2d", random_tensor(rng, {3, 5}), {5, 3}, transpose2d);
  unary("pad_trailing", random_tensor(rng, {1, 5, 3}), {1, 8, 8},
        [](const Tensor& x) { return pad_trailing(x, {1, 8, 8}); });
  unary("crop_leading", random_tensor(rng, {2, 8, 8}), {2, 5, 3},
        [](const Tensor& x) { return crop_leading(x, {2, 5, 3}); });
  unary("embedding_lookup", random_tensor(rng, {6, 3}), {4, 3}, [](const Tensor& t) {
    const std::size_t ids[] = {2, 0, 2, 5};
    return embedding_lookup(t, ids);
  });
  unary("repeat_columns", random_tensor(rng, {2, 3}), {2, 6}, [](const Tensor& x) {
    const std::size_t reps[] = {1, 3, 2};
    return repeat_columns(x, reps);
  });
  binary("add_channel_bias", random_tensor(rng, {3, 2, 2}), random_tensor(rng, {3}), {3, 2, 2}, add_channel_bias);
  binary("add_row_vector", random_tensor(rng, {4, 3}), random_tensor(rng, {3}), {4, 3}, add_row_vector);

  // Convolutions.
  {
    const ConvGeometry g{4, 3, 2, 1, 1, 1, 0, 0};
    Tensor x = random_tensor(rng, {2, 7, 5}), w = random_tensor(rng, {3, 2, 4, 3}), b = random_tensor(rng, {3});
    Shape out{3, conv_output_size(7, 4, 2, 1, "h"), conv_output_size(5, 3, 1, 1, "w")};
    Tensor r = constant_tensor(rng, out);
    cases.push_back({"conv2d", {x, w, b}, [=] { return probe(conv2d(x, w, b, g), r); }});
  }
  {
    const ConvGeometry g{4, 3, 2, 1, 1, 1, 1, 0};
    Tensor x = random_tensor(rng, {3, 4, 3}), w = random_tensor(rng, {3, 2, 4, 3}), b = random_tensor(rng, {2});
    Shape out{2, conv_transpose_output_size(4, 4, 2, 1, 1, "h"), conv_transpose_output_size(3, 3, 1, 1, 0, "w")};
    Tensor r = constant_tensor(rng, out);
    cases.push_back({"conv_transpose2d", {x, w, b}, [=] { return probe(conv_transpose2d(x, w, b, g), r); }});
  }
  {
    Tensor x = random_tensor(rng, {3, 9}), w = random_tensor(rng, {2, 3, 4}), b = random_tensor(rng, {2});
    Tensor r = constant_tensor(rng, {2, conv_output_size(9, 4, 2, 1, "t")});
    cases.push_back({"conv1d", {x, w, b}, [=] { return probe(conv1d(x, w, b, 2, 1), r); }});
  }
  {
    Tensor x = random_tensor(rng, {3, 5}), w = random_tensor(rng, {3, 2, 4}), b = random_tensor(rng, {2});
    Tensor r = constant_tensor(rng, {2, conv_transpose_output_size(5, 4, 2, 1, 1, "t")});
    cases.push_back({"conv_transpose1d", {x, w, b}, [=] { return probe(conv_transpose1d(x, w, b, 2, 1, 1), r); }});
  }
  {
    const ConvGeometry g{3, 3, 2, 2, 1, 1, 0, 0};
    Tensor x1 = random_tensor(rng, {2, 5, 4}), x2 = random_tensor(rng, {2, 3, 6});
    Tensor w = random_tensor(rng, {3, 2, 3, 3}), b = random_tensor(rng, {3});
    Tensor r1 = constant_tensor(rng, {3, 3, 2}), r2 = constant_tensor(rng, {3, 2, 3});
    cases.push_back({"conv2d_packed", {x1, x2, w, b}, [=] {
                       const Tensor xs[] = {x1, x2};
                       auto items = unpack(conv2d_packed(xs, w, b, g));
                       return add(probe(items[0], r1), probe(items[1], r2));
                     }});
  }
  {
    Tensor x1 = random_tensor(rng, {3, 2, 3}), x2 = random_tensor(rng, {3, 3, 1});
    Tensor w = random_tensor(rng, {3, 2, 4, 4}), b = random_tensor(rng, {2});
    const ConvGeometry g1{4, 4, 2, 2, 1, 1, 1, 0}, g2{4, 4, 2, 2, 1, 1, 0, 1};
    Tensor r1 = constant_tensor(rng, {2, 5, 6}), r2 = constant_tensor(rng, {2, 6, 3});
    cases.push_back({"conv_transpose2d_packed", {x1, x2, w, b}, [=] {
                       const Tensor xs[] = {x1, x2};
                       const ConvGeometry gs[] = {g1, g2};
                       auto items = unpack(conv_transpose2d_packed(xs, w, b, gs));
                       return add(probe(items[0], r1), probe(items[1], r2));
                     }});
  }
  {
    Tensor x1 = random_tensor(rng, {2, 2, 2}), x2 = random_tensor(rng, {2, 3, 1});
    Tensor w = random_tensor(rng, {2, 2, 1, 1});
    Tensor r1 = constant_tensor(rng, {2, 2, 2}), r2 = constant_tensor(rng, {2, 3, 1});
    cases.push_back({"unpack", {x1, x2, w}, [=] {
                       const Tensor xs[] = {x1, x2};
                       auto items = unpack(conv2d_packed(xs, w, Tensor(), ConvGeometry{}));
                       return add(probe(items[0], r1), probe(items[1], r2));
                     }});
  }
  {
    Tensor v = random_tensor(rng, {3, 2, 2, 2}), g = random_tensor(rng, {3}, 0.5, 1.5);
    Tensor r = constant_tensor(rng, {3, 2, 2, 2});
    cases.push_back({"weight_norm", {v, g}, [=] { return probe(weight_norm(v, g, 0), r); }});
    Tensor v1 = random_tensor(rng, {2, 4, 3}), g1 = random_tensor(rng, {4}, 0.5, 1.5);
    Tensor r1 = constant_tensor(rng, {2, 4, 3});
    cases.push_back({"weight_norm", {v1, g1}, [=] { return probe(weight_norm(v1, g1, 1), r1); }});
  }

  // Layers (inputs: x plus every parameter).
  {
    Conv2d layer(2, 3, ConvGeometry{4, 4, 2, 2, 1, 1, 0, 0}, rng);
    Tensor x = random_tensor(rng, {2, 6, 4});
    Tensor r = constant_tensor(rng, {3, 3, 2});
    auto in = param_tensors(layer.params().v.defined() ? ParamList{{"v", layer.params().v}, {"g", layer.params().g},
                                                                   {"b", layer.params().bias}}
                                                       : ParamList{});
    in.insert(in.begin(), x);
    cases.push_back({"Conv2d", in, [=] { return probe(layer.forward(x), r); }});
  }
  {
    ConvTranspose2d layer(3, 2, ConvGeometry{4, 4, 2, 2, 1, 1, 0, 0}, rng);
    Tensor x = random_tensor(rng, {3, 2, 3});
    Tensor r = constant_tensor(rng, {2, 5, 6});
    std::vector<Tensor> in{x, layer.params().v, layer.params().g, layer.params().bias};
    cases.push_back({"ConvTranspose2d", in, [=] { return probe(layer.forward_to(x, 5, 6), r); }});
  }
  {
    Conv1d layer(3, 2, 3, 1, 1, rng);
    Tensor x = random_tensor(rng, {3, 6});
    Tensor r = constant_tensor(rng, {2, 6});
    std::vector<Tensor> in{x, layer.params().v, layer.params().g, layer.params().bias};
    cases.push_back({"Conv1d", in, [=] { return probe(layer.forward(x), r); }});
  }
  {
    ConvTranspose1d layer(3, 2, 4, 2, 1, rng);
    Tensor x = random_tensor(rng, {3, 4});
    Tensor r = constant_tensor(rng, {2, 9});
    std::vector<Tensor> in{x, layer.params().v, layer.params().g, layer.params().bias};
    cases.push_back({"ConvTranspose1d", in, [=] { return probe(layer.forward_to(x, 9), r); }});
  }
  {
    Embedding layer(5, 3, rng);
    ParamList p;
    layer.collect("e", p);
    Tensor r = constant_tensor(rng, {3, 3});
    cases.push_back({"Embedding", param_tensors(p), [=] {
                       const std::size_t ids[] = {4, 1, 4};
                       return probe(layer.forward(ids), r);
                     }});
  }
  {
    Linear layer(4, 3, rng);
    ParamList p;
    layer.collect("l", p);
    Tensor x = random_tensor(rng, {2, 4});
    Tensor r = constant_tensor(rng, {2, 3});
    auto in = param_tensors(p);
    in.insert(in.begin(), x);
    cases.push_back({"Linear", in, [=] { return probe(layer.forward(x), r); }});
  }

  // Losses.
  {
    Tensor pred = random_tensor(rng, {1, 6, 4});
    Tensor target = constant_tensor(rng, {1, 6, 4});
    Tensor dur = random_tensor(rng, {3}, 1.0, 4.0);
    cases.push_back({"tts_loss", {pred, dur}, [=] {
                       const std::size_t d[] = {2, 1, 3};
                       return tts_loss(pred, target, dur, d, 0.02).total;
                     }});
  }

  // Small discriminators keep finite differences cheap; T and N are not
  // multiples of 8 so padding and cropping are exercised.
  auto small_disc = [&](Variant v, std::size_t bins) {
    DiscriminatorConfig c;
    c.variant = v;
    c.channels = {4, 6, 8, 10};
    c.mel_bins = bins;
    Discriminator d = Discriminator::build(c, rng.next_u64());
    // Zero biases put every all-padding position exactly on the leaky kink.
    for (auto& p : d.parameters()) {
      if (!p.name.ends_with(".bias")) continue;
      Tensor t = p.tensor;
      for (auto& x : t.mutable_data()) x = (rng.uniform() < 0.5 ? -0.1 : 0.1) * rng.uniform(0.5, 1.0);
    }
    return d;
  };
  auto spectrogram_input = [&](std::size_t frames, std::size_t bins) {
    return random_tensor(rng, {1, frames, bins});
  };
  {
    Discriminator d = small_disc(Variant::kMultiScaleTimeFrequency, 11);
    Tensor real = spectrogram_input(13, 11), fake = spectrogram_input(13, 11);
    auto params = param_tensors(d.parameters());
    std::vector<Tensor> in{real, fake, params[0], params[4], params.back()};
    cases.push_back({"discriminator_loss", in, [=] {
                       return discriminator_loss(d.discriminate(Spectrogram(real)), d.discriminate(Spectrogram(fake)));
                     }});
    Tensor real2 = spectrogram_input(10, 11).detach(), fake2 = spectrogram_input(10, 11);
    cases.push_back({"generator_adv_losses.L_a", {fake2}, [=] {
                       DiscriminatorOutput r = d.discriminate(Spectrogram(real2));
                       return generator_adv_losses(d.discriminate(Spectrogram(fake2)), r).adversarial;
                     }});
    cases.push_back({"generator_adv_losses.L_f", {fake2}, [=] {
                       DiscriminatorOutput r = d.discriminate(Spectrogram(real2));
                       return generator_adv_losses(d.discriminate(Spectrogram(fake2)), r).feature;
                     }});
  }
  for (Variant v : {Variant::kMultiScaleTimeFrequency, Variant::kMultiScaleTime, Variant::kSingleScaleTime}) {
    const std::size_t bins = v == Variant::kMultiScaleTimeFrequency ? 11 : 5;
    Discriminator d = small_disc(v, bins);
    Tensor x = spectrogram_input(13, bins);
    auto probe_out = d.discriminate(Spectrogram(x.detach()));
    std::vector<Tensor> weights;
    weights.push_back(constant_tensor(rng, probe_out.coarse.shape()));
    if (probe_out.fine) weights.push_back(constant_tensor(rng, probe_out.fine->shape()));
    for (const auto& h : probe_out.hidden) weights.push_back(constant_tensor(rng, h.shape()));
    std::vector<Tensor> in{x};
    for (const auto& p : d.parameters()) in.push_back(p.tensor);
    cases.push_back({"Discriminator." + to_string(v), in, [=] {
                       auto o = d.discriminate(Spectrogram(x));
                       std::size_t k = 0;
                       Tensor total = probe(o.coarse, weights[k++]);
                       if (o.fine) total = add(total, probe(*o.fine, weights[k++]));
                       for (const auto& h : o.hidden) total = add(total, probe(h, weights[k++]));
                       return total;
                     }});
  }

  // End to end: L_g through the generator and a frozen discriminator.
  {
    GeneratorConfig gc;
    gc.vocab_size = 5;
    gc.embed_dim = 4;
    gc.channels = 6;
    gc.mel_bins = 9;
    Generator g = Generator::build(gc, rng.next_u64());
    Discriminator d = small_disc(Variant::kMultiScaleTimeFrequency, 9);
    d.set_trainable(false);
    const std::vector<std::size_t> tokens{1, 4, 2}, durations{3, 2, 4};
    Tensor target = constant_tensor(rng, {1, 9, 9});
    const double lambda_a = 0.2, lambda_f = 2.0;
    cases.push_back({"L_g", param_tensors(g.parameters()), [=] {
                       DiscriminatorOutput real;
                       {
                         NoGradGuard no_grad;
                         real = d.discriminate(Spectrogram(target));
                       }
                       auto out = g.generate(tokens, durations);
                       auto tts = tts_loss(out.spectrogram.values(), target, out.durations, durations, 0.02);
                       auto adv = generator_adv_losses(d.discriminate(out.spectrogram), real);
                       return add(add(tts.total, scale(adv.adversarial, lambda_a)), scale(adv.feature, lambda_f));
                     }});
  }
  return cases;
}

GradCheckCase corrupted_gradcheck_case() {
  Tensor x(Shape{4}, std::vector<double>{0.3, -0.7, 1.1, 0.2});
  x.set_requires_grad(true);
  auto doubled_square = [](const Tensor& t) {
    std::vector<double> out;
    for (double v : t.data()) out.push_back(v * v);
    return make_op_result("corrupted_square", t.shape(), std::move(out), {t},
                          [](std::span<const double> gy, std::span<Tensor> in) {
                            auto g = in[0].mutable_grad();
                            auto x = in[0].data();
                            // Deliberately wrong: 4x instead of 2x.
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += 4.0 * x[i] * gy[i];
                          });
  };
  return {"corrupted_square", {x}, [x, doubled_square] { return sum(doubled_square(x)); }};
}

void print_gradcheck_report(std::ostream& out, const GradCheckReport& report, const GradCheckOptions& options) {
  char line[200];
  for (const auto& o : report.ops) {
    std::snprintf(line, sizeof line, "%-28s worst rel err %.3e over %4zu coords  %s\n", o.op.c_str(), o.worst,
                  o.coords, o.passed ? "ok" : "FAIL");
    out << line;
  }
  std::snprintf(line, sizeof line, "eps %.0e, tolerance %.0e: %s\n", options.eps, options.tolerance,
                report.passed() ? "all checks passed" : "FAILED");
  out << line;
  if (!report.passed()) {
    out << "failing ops:";
    for (const auto& op : report.failed_ops()) out << ' ' << op;
    out << '\n';
  }
}

}  // namespace specgan
