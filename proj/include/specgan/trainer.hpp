#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "specgan/discriminator.hpp"
#include "specgan/generator.hpp"
#include "specgan/optim.hpp"
#include "specgan/synth.hpp"

namespace specgan {

enum class LrSchedule {
  kDecayAfterStart,    // constant until decay_start_iter, then decays to lr_floor at total_iters
  kDecayUntilStart,    // decays from iteration 0 to reach lr_floor at decay_start_iter, then flat
};

struct TrainConfig {
  double lambda_a = 0.2;
  double lambda_f = 2.0;
  double lambda_dur = 0.02;
  std::size_t batch_size = 4;
  std::size_t total_iters = 2000;
  double lr_start = 1e-3;
  double lr_floor = 1e-5;
  std::size_t decay_start_iter = 20000;
  LrSchedule schedule = LrSchedule::kDecayAfterStart;
  RAdamOptions radam;
  LookaheadOptions lookahead;
  std::uint64_t seed = 1;
  /// false: the discriminator is never updated (L_d is still reported).
  bool train_discriminator = true;

  /// Throws ConfigError.
  void validate() const;
};

/// lambda_a, lambda_f defaults: 0.2 / 2 with a decoder (M-T, M-TF), else 1 / 10.
double default_lambda_a(Variant v);
double default_lambda_f(Variant v);

/// Learning rate used at iteration `iter` (iterations count from 1; 0 is the
/// initial value). Exponential between lr_start and lr_floor, clamped below.
double lr_at(std::size_t iter, const TrainConfig& config);

/// Batch-mean losses of one iteration.
struct LossReport {
  std::size_t iter = 0;
  double L_d = 0, L_a = 0, L_f = 0, L_tts = 0, L_g = 0;
  double lr = 0;
  double L_spec = 0, L_dur = 0;  // parts of L_tts
};

/// MSE(1,C_r) + MSE(1,F_r) + MSE(0,C_f) + MSE(0,F_f); F terms only when both
/// outputs have a fine map. Throws ShapeError if only one has.
Tensor discriminator_loss(const DiscriminatorOutput& real, const DiscriminatorOutput& fake);

struct AdversarialLosses {
  Tensor adversarial;  // L_a = MSE(1,C_f) + MSE(1,F_f)
  Tensor feature;      // L_f = mean_i MAE(H_f[i], H_r[i])
};

/// The real side is treated as constant. Throws ShapeError when the hidden
/// lists differ in length or shape.
AdversarialLosses generator_adv_losses(const DiscriminatorOutput& fake, const DiscriminatorOutput& real);

/// Alternating discriminator / generator updates with one RAdam+Lookahead
/// optimizer per network.
class GanTrainer {
 public:
  GanTrainer(Generator generator, Discriminator discriminator, TrainConfig config);

  /// One iteration: discriminator step on detached fakes, then a generator
  /// step through the updated, frozen discriminator. Throws NumericError
  /// naming the first non-finite loss term. The network whose loss it was is
  /// not updated; a discriminator step taken earlier in the iteration stays.
  LossReport train_step(std::span<const SynthSample* const> batch);
  /// Generator-only step on L_tts (no discriminator involved).
  LossReport supervised_step(std::span<const SynthSample* const> batch);

  std::size_t iteration() const { return iteration_; }
  void set_iteration(std::size_t iter) { iteration_ = iter; }
  const Generator& generator() const { return generator_; }
  const Discriminator& discriminator() const { return discriminator_; }
  RAdamLookahead& generator_optimizer() { return gen_opt_; }
  RAdamLookahead& discriminator_optimizer() { return disc_opt_; }
  const TrainConfig& config() const { return config_; }

 private:
  struct GeneratorPass {
    std::vector<Spectrogram> fakes;
    Tensor tts, spec, dur;  // batch means
  };
  GeneratorPass run_generator(std::span<const SynthSample* const> batch) const;

  Generator generator_;
  Discriminator discriminator_;
  TrainConfig config_;
  RAdamLookahead gen_opt_, disc_opt_;
  std::size_t iteration_ = 0;
};

/// "iter,L_d,L_a,L_f,L_tts,L_g,lr"
void write_loss_header(std::ostream& out);
/// Values with 9 significant digits.
void write_loss_row(std::ostream& out, const LossReport& r);
/// "iter,L_spec,L_dur"
void write_tts_header(std::ostream& out);
void write_tts_row(std::ostream& out, const LossReport& r);

}  // namespace specgan
