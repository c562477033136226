#include "specgan/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace specgan {

namespace {

constexpr const char* kFormat = "specgan-checkpoint 1";

struct Entry {
  Shape shape;
  std::size_t offset = 0, count = 0;
};

class TensorWriter {
 public:
  TensorWriter(std::ofstream& bin, std::ofstream& manifest) : bin_(bin), manifest_(manifest) {}

  void write(const std::string& name, const Shape& shape, std::span<const double> values) {
    manifest_ << "tensor." << name << " = ";
    if (shape.empty()) manifest_ << "scalar";
    for (std::size_t i = 0; i < shape.size(); ++i) manifest_ << (i ? "x" : "") << shape[i];
    manifest_ << ' ' << offset_ << ' ' << values.size() << '\n';
    for (double v : values) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
      bin_.write(bytes, 8);
    }
    offset_ += values.size();
  }

 private:
  std::ofstream& bin_;
  std::ofstream& manifest_;
  std::size_t offset_ = 0;
};

void write_optimizer(TensorWriter& w, std::ofstream& manifest, const std::string& prefix, const ParamList& params,
                     const OptimizerState& s) {
  manifest << prefix << ".t = " << s.t << '\n';
  manifest << prefix << ".lookahead_counter = " << s.lookahead_counter << '\n';
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Shape& shape = params[i].tensor.shape();
    w.write(prefix + ".m." + params[i].name, shape, s.m[i]);
    w.write(prefix + ".v." + params[i].name, shape, s.v[i]);
    w.write(prefix + ".slow." + params[i].name, shape, s.slow[i]);
  }
}

Shape parse_shape(const std::string& text) {
  Shape shape;
  if (text == "scalar") return shape;
  std::stringstream ss(text);
  std::string dim;
  while (std::getline(ss, dim, 'x')) shape.push_back(std::stoull(dim));
  return shape;
}

struct Manifest {
  std::map<std::string, std::string> values;
  std::map<std::string, Entry> tensors;
};

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint manifest " + path.string());
  Manifest m;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
    if (key.rfind("tensor.", 0) == 0) {
      std::stringstream ss(value);
      std::string shape;
      Entry e;
      ss >> shape >> e.offset >> e.count;
      if (!ss) throw std::runtime_error("malformed manifest line: " + line);
      e.shape = parse_shape(shape);
      m.tensors[key.substr(7)] = e;
    } else {
      m.values[key] = value;
    }
  }
  if (m.values["format"] != kFormat) throw std::runtime_error("not a checkpoint manifest: " + path.string());
  return m;
}

std::vector<double> read_values(const std::vector<char>& blob, const Entry& e) {
  if ((e.offset + e.count) * 8 > blob.size()) throw std::runtime_error("checkpoint tensor data is truncated");
  std::vector<double> out(e.count);
  for (std::size_t i = 0; i < e.count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(blob[(e.offset + i) * 8 + b])) << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

const Entry& find_entry(const Manifest& m, const std::string& name, const Shape& expected) {
  auto it = m.tensors.find(name);
  if (it == m.tensors.end()) throw ShapeError("checkpoint lacks tensor " + name);
  if (it->second.shape != expected) {
    throw ShapeError("checkpoint tensor " + name + " is " + to_string(it->second.shape) + ", expected " +
                     to_string(expected));
  }
  return it->second;
}

void load_params(const Manifest& m, const std::vector<char>& blob, const ParamList& params) {
  for (const auto& p : params) {
    auto values = read_values(blob, find_entry(m, p.name, p.tensor.shape()));
    Tensor t = p.tensor;
    std::copy(values.begin(), values.end(), t.mutable_data().begin());
  }
}

OptimizerState load_optimizer(const Manifest& m, const std::vector<char>& blob, const std::string& prefix,
                              const ParamList& params) {
  OptimizerState s;
  s.t = std::stoll(m.values.at(prefix + ".t"));
  s.lookahead_counter = std::stoull(m.values.at(prefix + ".lookahead_counter"));
  for (const auto& p : params) {
    s.m.push_back(read_values(blob, find_entry(m, prefix + ".m." + p.name, p.tensor.shape())));
    s.v.push_back(read_values(blob, find_entry(m, prefix + ".v." + p.name, p.tensor.shape())));
    s.slow.push_back(read_values(blob, find_entry(m, prefix + ".slow." + p.name, p.tensor.shape())));
  }
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const RunConfig& config, GanTrainer& trainer) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream cfg(dir / "config.txt");
    write_run_config(cfg, config);
    if (!cfg) throw std::runtime_error("cannot write " + (dir / "config.txt").string());
  }
  std::ofstream bin(dir / "tensors.bin", std::ios::binary);
  std::ofstream manifest(dir / "manifest.txt");
  if (!bin || !manifest) throw std::runtime_error("cannot write checkpoint in " + dir.string());
  manifest << "format = " << kFormat << '\n';
  manifest << "iteration = " << trainer.iteration() << '\n';
  manifest << "variant = " << to_string(config.discriminator.variant) << '\n';
  TensorWriter w(bin, manifest);
  const ParamList gen = trainer.generator().parameters();
  const ParamList disc = trainer.discriminator().parameters();
  for (const auto& p : gen) w.write(p.name, p.tensor.shape(), p.tensor.data());
  for (const auto& p : disc) w.write(p.name, p.tensor.shape(), p.tensor.data());
  write_optimizer(w, manifest, "opt.gen", gen, trainer.generator_optimizer().state());
  write_optimizer(w, manifest, "opt.disc", disc, trainer.discriminator_optimizer().state());
  if (!bin || !manifest) throw std::runtime_error("failed writing checkpoint in " + dir.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("checkpoint not found: " + dir.string());
  const Manifest m = read_manifest(dir / "manifest.txt");
  RunConfig config = load_run_config(dir / "config.txt");
  config.validate();
  std::ifstream in(dir / "tensors.bin", std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + (dir / "tensors.bin").string());
  std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  LoadedCheckpoint out{config, std::stoull(m.values.at("iteration")),
                       Generator::build(config.generator, generator_seed(config)),
                       Discriminator::build(config.discriminator, discriminator_seed(config)), {}, {}};
  load_params(m, blob, out.generator.parameters());
  load_params(m, blob, out.discriminator.parameters());
  out.generator_optimizer = load_optimizer(m, blob, "opt.gen", out.generator.parameters());
  out.discriminator_optimizer = load_optimizer(m, blob, "opt.disc", out.discriminator.parameters());
  return out;
}

GanTrainer restore_trainer(const LoadedCheckpoint& c) {
  GanTrainer trainer(c.generator, c.discriminator, c.config.train);
  trainer.generator_optimizer().load_state(c.generator_optimizer);
  trainer.discriminator_optimizer().load_state(c.discriminator_optimizer);
  trainer.set_iteration(c.iteration);
  return trainer;
}

}  // namespace specgan
