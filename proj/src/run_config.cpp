#include "specgan/run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "specgan/random.hpp"

namespace specgan {

void RunConfig::set_variant(Variant v) {
  discriminator.variant = v;
  if (!lambda_a_explicit) train.lambda_a = default_lambda_a(v);
  if (!lambda_f_explicit) train.lambda_f = default_lambda_f(v);
}

void RunConfig::validate() const {
  train.validate();
  discriminator.validate();
  generator.validate();
  corpus.validate();
  if (generator.vocab_size != corpus.vocab_size || generator.mel_bins != corpus.mel_bins ||
      discriminator.mel_bins != corpus.mel_bins) {
    throw ConfigError("vocab_size / mel_bins disagree between corpus, generator and discriminator");
  }
  if (train.batch_size > corpus.samples) {
    throw ConfigError("batch_size " + std::to_string(train.batch_size) + " exceeds corpus size " +
                      std::to_string(corpus.samples));
  }
}

std::uint64_t generator_seed(const RunConfig& c) { return hash_key(c.train.seed, 0x6E, 1); }
std::uint64_t discriminator_seed(const RunConfig& c) { return hash_key(c.train.seed, 0xD1, 2); }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_uint(const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("expected a finite number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

std::vector<std::size_t> parse_list(const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_uint(trim(item)));
  if (out.empty()) throw ConfigError("expected a comma-separated list, got '" + v + "'");
  return out;
}

std::string format_list(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

LrSchedule parse_schedule(const std::string& v) {
  if (v == "after_start") return LrSchedule::kDecayAfterStart;
  if (v == "until_start") return LrSchedule::kDecayUntilStart;
  throw ConfigError("lr_schedule must be after_start or until_start, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"variant", [](RunConfig& c, const std::string& v) { c.set_variant(parse_variant(v)); }},
      {"seed", [](RunConfig& c, const std::string& v) { c.train.seed = parse_uint(v); }},
      {"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
      {"checkpoint_every", [](RunConfig& c, const std::string& v) { c.checkpoint_every = parse_uint(v); }},
      {"lambda_a",
       [](RunConfig& c, const std::string& v) {
         c.train.lambda_a = parse_double(v);
         c.lambda_a_explicit = true;
       }},
      {"lambda_f",
       [](RunConfig& c, const std::string& v) {
         c.train.lambda_f = parse_double(v);
         c.lambda_f_explicit = true;
       }},
      {"lambda_dur", [](RunConfig& c, const std::string& v) { c.train.lambda_dur = parse_double(v); }},
      {"batch_size", [](RunConfig& c, const std::string& v) { c.train.batch_size = parse_uint(v); }},
      {"total_iters", [](RunConfig& c, const std::string& v) { c.train.total_iters = parse_uint(v); }},
      {"lr_start", [](RunConfig& c, const std::string& v) { c.train.lr_start = parse_double(v); }},
      {"lr_floor", [](RunConfig& c, const std::string& v) { c.train.lr_floor = parse_double(v); }},
      {"decay_start_iter", [](RunConfig& c, const std::string& v) { c.train.decay_start_iter = parse_uint(v); }},
      {"lr_schedule", [](RunConfig& c, const std::string& v) { c.train.schedule = parse_schedule(v); }},
      {"beta1", [](RunConfig& c, const std::string& v) { c.train.radam.beta1 = parse_double(v); }},
      {"beta2", [](RunConfig& c, const std::string& v) { c.train.radam.beta2 = parse_double(v); }},
      {"eps", [](RunConfig& c, const std::string& v) { c.train.radam.eps = parse_double(v); }},
      {"lookahead_k", [](RunConfig& c, const std::string& v) { c.train.lookahead.k = parse_uint(v); }},
      {"lookahead_alpha", [](RunConfig& c, const std::string& v) { c.train.lookahead.alpha = parse_double(v); }},
      {"train_discriminator",
       [](RunConfig& c, const std::string& v) { c.train.train_discriminator = parse_bool(v); }},
      {"disc_channels", [](RunConfig& c, const std::string& v) { c.discriminator.channels = parse_list(v); }},
      {"disc_strides", [](RunConfig& c, const std::string& v) { c.discriminator.strides = parse_list(v); }},
      {"disc_kernel", [](RunConfig& c, const std::string& v) { c.discriminator.kernel = parse_uint(v); }},
      {"disc_padding", [](RunConfig& c, const std::string& v) { c.discriminator.padding = parse_uint(v); }},
      {"disc_input_kernel", [](RunConfig& c, const std::string& v) { c.discriminator.input_kernel = parse_uint(v); }},
      {"disc_head_kernel", [](RunConfig& c, const std::string& v) { c.discriminator.head_kernel = parse_uint(v); }},
      {"leaky_alpha", [](RunConfig& c, const std::string& v) { c.discriminator.leaky_alpha = parse_double(v); }},
      {"gen_embed_dim", [](RunConfig& c, const std::string& v) { c.generator.embed_dim = parse_uint(v); }},
      {"gen_channels", [](RunConfig& c, const std::string& v) { c.generator.channels = parse_uint(v); }},
      {"gen_kernel", [](RunConfig& c, const std::string& v) { c.generator.kernel = parse_uint(v); }},
      {"vocab_size",
       [](RunConfig& c, const std::string& v) { c.corpus.vocab_size = c.generator.vocab_size = parse_uint(v); }},
      {"mel_bins",
       [](RunConfig& c, const std::string& v) {
         c.corpus.mel_bins = c.generator.mel_bins = c.discriminator.mel_bins = parse_uint(v);
       }},
      {"samples", [](RunConfig& c, const std::string& v) { c.corpus.samples = parse_uint(v); }},
      {"min_tokens", [](RunConfig& c, const std::string& v) { c.corpus.min_tokens = parse_uint(v); }},
      {"max_tokens", [](RunConfig& c, const std::string& v) { c.corpus.max_tokens = parse_uint(v); }},
      {"min_duration", [](RunConfig& c, const std::string& v) { c.corpus.min_duration = parse_uint(v); }},
      {"max_duration", [](RunConfig& c, const std::string& v) { c.corpus.max_duration = parse_uint(v); }},
      {"noise_std", [](RunConfig& c, const std::string& v) { c.corpus.noise_std = parse_double(v); }},
      {"corpus_seed", [](RunConfig& c, const std::string& v) { c.corpus.seed = parse_uint(v); }},
  };
  return table;
}

}  // namespace

RunConfig parse_run_config(std::istream& in) {
  RunConfig config;
  config.set_variant(config.discriminator.variant);
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("line " + std::to_string(number) + ": unknown key '" + key + "'");
    if (auto [pos, fresh] = seen.emplace(key, number); !fresh) {
      throw ConfigError("line " + std::to_string(number) + ": duplicate key '" + key + "' (first on line " +
                        std::to_string(pos->second) + ")");
    }
    try {
      it->second(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(number) + " (" + key + "): " + e.what());
    }
  }
  // The variant may come after explicit lambdas or before defaults; settle both.
  config.set_variant(config.discriminator.variant);
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_run_config(in);
}

void write_run_config(std::ostream& out, const RunConfig& c) {
  out << "variant = " << to_string(c.discriminator.variant) << "\n";
  out << "seed = " << c.train.seed << "\n";
  out << "out_dir = " << c.out_dir.string() << "\n";
  out << "checkpoint_every = " << c.checkpoint_every << "\n";
  if (c.lambda_a_explicit) out << "lambda_a = " << format_double(c.train.lambda_a) << "\n";
  if (c.lambda_f_explicit) out << "lambda_f = " << format_double(c.train.lambda_f) << "\n";
  out << "lambda_dur = " << format_double(c.train.lambda_dur) << "\n";
  out << "batch_size = " << c.train.batch_size << "\n";
  out << "total_iters = " << c.train.total_iters << "\n";
  out << "lr_start = " << format_double(c.train.lr_start) << "\n";
  out << "lr_floor = " << format_double(c.train.lr_floor) << "\n";
  out << "decay_start_iter = " << c.train.decay_start_iter << "\n";
  out << "lr_schedule = " << (c.train.schedule == LrSchedule::kDecayAfterStart ? "after_start" : "until_start") << "\n";
  out << "beta1 = " << format_double(c.train.radam.beta1) << "\n";
  out << "beta2 = " << format_double(c.train.radam.beta2) << "\n";
  out << "eps = " << format_double(c.train.radam.eps) << "\n";
  out << "lookahead_k = " << c.train.lookahead.k << "\n";
  out << "lookahead_alpha = " << format_double(c.train.lookahead.alpha) << "\n";
  out << "train_discriminator = " << (c.train.train_discriminator ? "true" : "false") << "\n";
  out << "disc_channels = " << format_list(c.discriminator.channels) << "\n";
  out << "disc_strides = " << format_list(c.discriminator.strides) << "\n";
  out << "disc_kernel = " << c.discriminator.kernel << "\n";
  out << "disc_padding = " << c.discriminator.padding << "\n";
  out << "disc_input_kernel = " << c.discriminator.input_kernel << "\n";
  out << "disc_head_kernel = " << c.discriminator.head_kernel << "\n";
  out << "leaky_alpha = " << format_double(c.discriminator.leaky_alpha) << "\n";
  out << "gen_embed_dim = " << c.generator.embed_dim << "\n";
  out << "gen_channels = " << c.generator.channels << "\n";
  out << "gen_kernel = " << c.generator.kernel << "\n";
  out << "vocab_size = " << c.corpus.vocab_size << "\n";
  out << "mel_bins = " << c.corpus.mel_bins << "\n";
  out << "samples = " << c.corpus.samples << "\n";
  out << "min_tokens = " << c.corpus.min_tokens << "\n";
  out << "max_tokens = " << c.corpus.max_tokens << "\n";
  out << "min_duration = " << c.corpus.min_duration << "\n";
  out << "max_duration = " << c.corpus.max_duration << "\n";
  out << "noise_std = " << format_double(c.corpus.noise_std) << "\n";
  out << "corpus_seed = " << c.corpus.seed << "\n";
}

}  // namespace specgan
