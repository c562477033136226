#include "specgan/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>

#include "specgan/checkpoint.hpp"
#include "specgan/export.hpp"
#include "specgan/run_config.hpp"
#include "specgan/synth.hpp"

namespace specgan {

namespace {

struct CommonFlags {
  std::string config;
  std::string variant;
  std::optional<std::uint64_t> seed;
  std::string out;
};

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig config = flags.config.empty() ? RunConfig{} : load_run_config(flags.config);
  if (!flags.variant.empty()) config.set_variant(parse_variant(flags.variant));
  if (flags.seed) config.set_seed(*flags.seed);
  if (!flags.out.empty()) config.out_dir = flags.out;
  config.validate();
  return config;
}

int cmd_train(const CommonFlags& flags, std::ostream& out) {
  RunConfig config = resolve_config(flags);
  out << "training " << to_string(config.discriminator.variant) << " for " << config.train.total_iters
      << " iterations into " << config.out_dir.string() << '\n';
  TrainSummary s = run_training(config, out);
  const LossReport& last = s.reports.back();
  char line[200];
  std::snprintf(line, sizeof line, "done in %.1f s: L_d %.6g  L_g %.6g  L_spec %.6g\n", s.seconds, last.L_d,
                last.L_g, last.L_spec);
  out << line << "final checkpoint " << s.final_checkpoint.string() << '\n';
  return kExitOk;
}

int cmd_heatmap(const std::string& checkpoint, std::size_t sample, const std::string& generator_checkpoint,
                const std::string& prefix, std::ostream& out) {
  LoadedCheckpoint ckpt = load_checkpoint(checkpoint);
  SynthSample s = render_sample(ckpt.config.corpus, sample);
  Spectrogram input = s.target;
  if (!generator_checkpoint.empty()) {
    LoadedCheckpoint gen = load_checkpoint(generator_checkpoint);
    if (gen.config.corpus.mel_bins != ckpt.config.corpus.mel_bins ||
        gen.config.corpus.vocab_size != ckpt.config.corpus.vocab_size) {
      throw ConfigError("generator checkpoint " + generator_checkpoint + " does not match the corpus of " +
                        checkpoint);
    }
    NoGradGuard no_grad;
    input = gen.generator.generate(s.tokens, s.durations).spectrogram;
    out << "fake sample from the generator at iteration " << gen.iteration << '\n';
  }
  HeatmapResult r = render_heatmaps(ckpt.discriminator, input, prefix);
  out << "wrote " << r.input_path.string() << '\n';
  if (r.fine_path) {
    char line[160];
    std::snprintf(line, sizeof line, " (mean pixel %.3f)\n", mean_pixel(*r.fine));
    out << "wrote " << r.fine_path->string() << line;
  } else {
    out << r.notice << '\n';
  }
  out << "wrote " << r.coarse_path.string() << '\n';
  return kExitOk;
}

int cmd_dump_corpus(const CommonFlags& flags, std::ostream& out) {
  RunConfig config = resolve_config(flags);
  Corpus corpus(config.corpus);
  dump_corpus(corpus, config.out_dir);
  out << "wrote " << corpus.size() << " samples (" << corpus.total_frames() << " frames) to "
      << config.out_dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int cmd_gradcheck(std::uint64_t seed, const GradCheckOptions& options, const std::vector<GradCheckCase>& extra,
                  std::ostream& out, std::ostream&) {
  auto cases = standard_gradcheck_suite(seed);
  cases.insert(cases.end(), extra.begin(), extra.end());
  GradCheckReport report = run_gradcheck(cases, options);
  print_gradcheck_report(out, report, options);
  return report.passed() ? kExitOk : kExitFailure;
}

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-scale spectrogram discriminator GAN on a synthetic corpus", "specgan"};
  app.require_subcommand(1);

  CommonFlags train_flags;
  auto* train = app.add_subcommand("train", "train generator and discriminator, write losses and checkpoints");
  auto add_common = [](CLI::App* sub, CommonFlags& f) {
    sub->add_option("--config", f.config, "key = value config file (defaults when omitted)");
    sub->add_option("--variant", f.variant, "discriminator variant: s-t, m-t or m-tf");
    sub->add_option("--seed", f.seed, "training seed");
    sub->add_option("--out", f.out, "output directory");
  };
  add_common(train, train_flags);

  std::string checkpoint, generator_checkpoint, prefix = "heatmap_";
  std::size_t sample = 0;
  auto* heatmap = app.add_subcommand("heatmap", "render input, fine and coarse discriminator maps as PGM");
  heatmap->add_option("--checkpoint", checkpoint, "checkpoint directory holding the discriminator")->required();
  heatmap->add_option("--sample", sample, "corpus sample index");
  heatmap->add_option("--out", prefix, "output prefix; files are <prefix>input.pgm, fine.pgm, coarse.pgm");
  heatmap->add_option("--generator", generator_checkpoint,
                      "checkpoint whose generator renders a fake version of the sample");

  CommonFlags gc_flags;
  GradCheckOptions gc_options;
  bool inject_fault = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every op, layer and loss");
  gradcheck->add_option("--config", gc_flags.config, "config file; only its seed is used");
  gradcheck->add_option("--seed", gc_flags.seed, "seed for fixture values");
  gradcheck->add_option("--coords", gc_options.max_coords, "coordinates probed per input");
  gradcheck->add_flag("--inject-fault", inject_fault, "add an op with a broken backward rule (negative control)");

  CommonFlags dump_flags;
  auto* dump = app.add_subcommand("dump-corpus", "write the synthetic corpus as text files");
  add_common(dump, dump_flags);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(train_flags, out);
    if (heatmap->parsed()) return cmd_heatmap(checkpoint, sample, generator_checkpoint, prefix, out);
    if (dump->parsed()) return cmd_dump_corpus(dump_flags, out);
    RunConfig config = resolve_config(gc_flags);
    std::vector<GradCheckCase> extra;
    if (inject_fault) extra.push_back(corrupted_gradcheck_case());
    return cmd_gradcheck(config.train.seed, gc_options, extra, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric abort: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace specgan
