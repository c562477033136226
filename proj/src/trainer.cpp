#include "specgan/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "specgan/ops.hpp"

namespace specgan {

void TrainConfig::validate() const {
  if (!(lambda_a >= 0.0) || !(lambda_f >= 0.0) || !(lambda_dur >= 0.0)) {
    throw ConfigError("loss weights lambda_a, lambda_f, lambda_dur must be >= 0");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (total_iters == 0) throw ConfigError("total_iters must be positive");
  if (!(lr_floor > 0.0) || !(lr_floor <= lr_start) || !std::isfinite(lr_start)) {
    throw ConfigError("learning rates need 0 < lr_floor <= lr_start");
  }
  if (lookahead.k == 0 || !(lookahead.alpha >= 0.0 && lookahead.alpha <= 1.0)) {
    throw ConfigError("lookahead needs k >= 1 and alpha in [0, 1]");
  }
  if (!(radam.beta1 >= 0.0 && radam.beta1 < 1.0) || !(radam.beta2 > 0.0 && radam.beta2 < 1.0) || !(radam.eps > 0.0)) {
    throw ConfigError("RAdam needs beta1 in [0,1), beta2 in (0,1), eps > 0");
  }
  if (schedule == LrSchedule::kDecayUntilStart && decay_start_iter == 0) {
    throw ConfigError("lr_schedule = until_start needs decay_start_iter > 0");
  }
}

double default_lambda_a(Variant v) { return has_decoder(v) ? 0.2 : 1.0; }
double default_lambda_f(Variant v) { return has_decoder(v) ? 2.0 : 10.0; }

double lr_at(std::size_t iter, const TrainConfig& c) {
  const double ratio = std::log(c.lr_start / c.lr_floor);
  double lr = c.lr_start;
  if (c.schedule == LrSchedule::kDecayAfterStart) {
    if (iter > c.decay_start_iter) {
      if (c.total_iters <= c.decay_start_iter) return c.lr_start;  // the run ends before decay begins
      const double kappa = ratio / static_cast<double>(c.total_iters - c.decay_start_iter);
      lr = c.lr_start * std::exp(-kappa * static_cast<double>(iter - c.decay_start_iter));
    }
  } else {
    const double kappa = ratio / static_cast<double>(c.decay_start_iter);
    lr = c.lr_start * std::exp(-kappa * static_cast<double>(std::min(iter, c.decay_start_iter)));
  }
  return std::max(lr, c.lr_floor);
}

Tensor discriminator_loss(const DiscriminatorOutput& real, const DiscriminatorOutput& fake) {
  if (real.fine.has_value() != fake.fine.has_value()) {
    throw ShapeError("discriminator_loss: real and fake outputs differ in having a fine map");
  }
  Tensor loss = add(mse(real.coarse, 1.0), mse(fake.coarse, 0.0));
  if (real.fine) loss = add(loss, add(mse(*real.fine, 1.0), mse(*fake.fine, 0.0)));
  return loss;
}

AdversarialLosses generator_adv_losses(const DiscriminatorOutput& fake, const DiscriminatorOutput& real) {
  if (fake.hidden.size() != real.hidden.size() || fake.hidden.empty()) {
    throw ShapeError("generator_adv_losses: " + std::to_string(fake.hidden.size()) + " fake vs " +
                     std::to_string(real.hidden.size()) + " real hidden maps");
  }
  Tensor adv = mse(fake.coarse, 1.0);
  if (fake.fine) adv = add(adv, mse(*fake.fine, 1.0));
  Tensor feat;
  for (std::size_t i = 0; i < fake.hidden.size(); ++i) {
    if (fake.hidden[i].shape() != real.hidden[i].shape()) {
      throw ShapeError("generator_adv_losses: hidden map " + std::to_string(i) + " is " +
                       to_string(fake.hidden[i].shape()) + " (fake) vs " + to_string(real.hidden[i].shape()) +
                       " (real)");
    }
    Tensor term = mae(fake.hidden[i], real.hidden[i]);
    feat = feat.defined() ? add(feat, term) : term;
  }
  return {adv, scale(feat, 1.0 / static_cast<double>(fake.hidden.size()))};
}

namespace {

Tensor batch_mean(const std::vector<Tensor>& terms) {
  Tensor total = terms.at(0);
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return scale(total, 1.0 / static_cast<double>(terms.size()));
}

void require_finite(double value, const char* term, std::size_t iter) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string("non-finite ") + term + " at iteration " + std::to_string(iter));
  }
}

}  // namespace

GanTrainer::GanTrainer(Generator generator, Discriminator discriminator, TrainConfig config)
    : generator_(std::move(generator)),
      discriminator_(std::move(discriminator)),
      config_(std::move(config)),
      gen_opt_(generator_.parameters(), config_.radam, config_.lookahead),
      disc_opt_(discriminator_.parameters(), config_.radam, config_.lookahead) {
  config_.validate();
  if (generator_.config().mel_bins != discriminator_.config().mel_bins &&
      discriminator_.config().variant != Variant::kMultiScaleTimeFrequency) {
    throw ConfigError("generator and discriminator disagree on mel_bins");
  }
}

GanTrainer::GeneratorPass GanTrainer::run_generator(std::span<const SynthSample* const> batch) const {
  GeneratorPass pass;
  std::vector<Tensor> tts, spec, dur;
  for (const SynthSample* s : batch) {
    auto out = generator_.generate(s->tokens, s->durations);
    auto loss = tts_loss(out.spectrogram.values(), s->target.values(), out.durations, s->durations, config_.lambda_dur);
    pass.fakes.push_back(out.spectrogram);
    tts.push_back(loss.total);
    spec.push_back(loss.spec);
    dur.push_back(loss.dur);
  }
  pass.tts = batch_mean(tts);
  pass.spec = batch_mean(spec);
  pass.dur = batch_mean(dur);
  return pass;
}

LossReport GanTrainer::train_step(std::span<const SynthSample* const> batch) {
  if (batch.empty()) throw std::invalid_argument("train_step needs a non-empty batch");
  LossReport r;
  r.iter = iteration_ + 1;
  r.lr = lr_at(r.iter, config_);
  const std::size_t n = batch.size();

  // Discriminator step; fakes carry no graph back into the generator.
  {
    std::vector<Spectrogram> inputs;
    for (const SynthSample* s : batch) inputs.push_back(s->target);
    {
      NoGradGuard no_grad;
      for (const SynthSample* s : batch) inputs.push_back(generator_.generate(s->tokens, s->durations).spectrogram);
    }
    const auto weights = discriminator_.effective_weights();
    const auto outs = discriminator_.discriminate_batch(inputs, weights);
    std::vector<Tensor> terms;
    for (std::size_t i = 0; i < n; ++i) terms.push_back(discriminator_loss(outs[i], outs[n + i]));
    Tensor loss_d = batch_mean(terms);
    r.L_d = loss_d.item();
    require_finite(r.L_d, "L_d", r.iter);
    if (config_.train_discriminator) {
      disc_opt_.zero_grad();
      loss_d.backward();
      disc_opt_.step(r.lr);
    }
    disc_opt_.zero_grad();
  }

  // Generator step through the updated discriminator, whose parameters are
  // frozen so no gradient reaches them.
  discriminator_.set_trainable(false);
  try {
    const auto weights = discriminator_.effective_weights();
    std::vector<Spectrogram> reals;
    for (const SynthSample* s : batch) reals.push_back(s->target);
    std::vector<DiscriminatorOutput> real_outs;
    {
      NoGradGuard no_grad;
      real_outs = discriminator_.discriminate_batch(reals, weights);
    }
    GeneratorPass pass = run_generator(batch);
    const auto fake_outs = discriminator_.discriminate_batch(pass.fakes, weights);
    std::vector<Tensor> adv, feat;
    for (std::size_t i = 0; i < n; ++i) {
      auto l = generator_adv_losses(fake_outs[i], real_outs[i]);
      adv.push_back(l.adversarial);
      feat.push_back(l.feature);
    }
    Tensor loss_a = batch_mean(adv);
    Tensor loss_f = batch_mean(feat);
    Tensor loss_g = add(add(pass.tts, scale(loss_a, config_.lambda_a)), scale(loss_f, config_.lambda_f));
    r.L_a = loss_a.item();
    r.L_f = loss_f.item();
    r.L_tts = pass.tts.item();
    r.L_spec = pass.spec.item();
    r.L_dur = pass.dur.item();
    r.L_g = loss_g.item();
    require_finite(r.L_tts, "L_tts", r.iter);
    require_finite(r.L_a, "L_a", r.iter);
    require_finite(r.L_f, "L_f", r.iter);
    require_finite(r.L_g, "L_g", r.iter);
    gen_opt_.zero_grad();
    loss_g.backward();
    gen_opt_.step(r.lr);
    gen_opt_.zero_grad();
  } catch (...) {
    discriminator_.set_trainable(true);
    throw;
  }
  discriminator_.set_trainable(true);
  iteration_ = r.iter;
  return r;
}

LossReport GanTrainer::supervised_step(std::span<const SynthSample* const> batch) {
  if (batch.empty()) throw std::invalid_argument("supervised_step needs a non-empty batch");
  LossReport r;
  r.iter = iteration_ + 1;
  r.lr = lr_at(r.iter, config_);
  GeneratorPass pass = run_generator(batch);
  r.L_tts = r.L_g = pass.tts.item();
  r.L_spec = pass.spec.item();
  r.L_dur = pass.dur.item();
  require_finite(r.L_tts, "L_tts", r.iter);
  gen_opt_.zero_grad();
  pass.tts.backward();
  gen_opt_.step(r.lr);
  gen_opt_.zero_grad();
  iteration_ = r.iter;
  return r;
}

void write_loss_header(std::ostream& out) { out << "iter,L_d,L_a,L_f,L_tts,L_g,lr\n"; }

void write_loss_row(std::ostream& out, const LossReport& r) {
  char line[256];
  std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.iter, r.L_d, r.L_a, r.L_f, r.L_tts, r.L_g,
                r.lr);
  out << line;
}

void write_tts_header(std::ostream& out) { out << "iter,L_spec,L_dur\n"; }

void write_tts_row(std::ostream& out, const LossReport& r) {
  char line[128];
  std::snprintf(line, sizeof line, "%zu,%.9g,%.9g\n", r.iter, r.L_spec, r.L_dur);
  out << line;
}

}  // namespace specgan
