#include "specgan/optim.hpp"

#include <cmath>

namespace specgan {

double radam_rho(std::int64_t t, double beta2) {
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double b2t = std::pow(beta2, static_cast<double>(t));
  return rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
}

double radam_rectifier(double rho_t, double beta2) {
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  return std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
}

namespace {

void check_grad(std::span<const double> param, std::span<const double> grad) {
  if (param.size() != grad.size()) {
    throw ShapeError("optimizer: gradient has " + std::to_string(grad.size()) + " values for a parameter of " +
                     std::to_string(param.size()));
  }
  for (double g : grad) {
    if (!std::isfinite(g)) throw NumericError("optimizer: non-finite gradient");
  }
}

}  // namespace

void radam_step(std::span<double> param, std::span<const double> grad, RAdamState& state, double lr,
                const RAdamOptions& o) {
  check_grad(param, grad);
  if (state.m.empty()) {
    state.m.assign(param.size(), 0.0);
    state.v.assign(param.size(), 0.0);
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(o.beta1, t);
  const double bc2 = 1.0 - std::pow(o.beta2, t);
  const double rho = radam_rho(state.t, o.beta2);
  const bool adaptive = o.force_adaptive || rho > kRAdamRhoThreshold;
  const double r = adaptive && o.rectify ? radam_rectifier(rho, o.beta2) : 1.0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    state.m[i] = o.beta1 * state.m[i] + (1.0 - o.beta1) * grad[i];
    state.v[i] = o.beta2 * state.v[i] + (1.0 - o.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    if (adaptive) {
      const double v_hat = state.v[i] / bc2;
      param[i] -= lr * r * m_hat / (std::sqrt(v_hat) + o.eps);
    } else {
      param[i] -= lr * m_hat;
    }
  }
}

bool lookahead_sync(std::span<double> param, LookaheadState& state, const LookaheadOptions& o) {
  if (state.slow.empty()) throw std::logic_error("lookahead: slow weights not initialized");
  if (++state.counter < o.k) return false;
  state.counter = 0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    state.slow[i] += o.alpha * (param[i] - state.slow[i]);
    param[i] = state.slow[i];
  }
  return true;
}

RAdamLookahead::RAdamLookahead(ParamList params, RAdamOptions radam, LookaheadOptions lookahead)
    : params_(std::move(params)), radam_(radam), lookahead_(lookahead) {
  if (lookahead_.k == 0) throw ConfigError("lookahead k must be positive");
  for (const auto& p : params_) {
    inner_.push_back(RAdamState{std::vector<double>(p.tensor.size(), 0.0), std::vector<double>(p.tensor.size(), 0.0), 0});
    auto d = p.tensor.data();
    outer_.push_back(LookaheadState{std::vector<double>(d.begin(), d.end()), 0});
  }
}

void RAdamLookahead::step(double lr) {
  // Validate every gradient before touching any parameter.
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("optimizer: non-finite gradient in " + p.name);
    }
  }
  std::vector<double> zeros;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor t = params_[i].tensor;
    std::span<const double> grad;
    if (t.has_grad()) {
      grad = t.grad();
    } else {
      zeros.assign(t.size(), 0.0);
      grad = zeros;
    }
    radam_step(t.mutable_data(), grad, inner_[i], lr, radam_);
    lookahead_sync(t.mutable_data(), outer_[i], lookahead_);
  }
  ++t_;
}

void RAdamLookahead::zero_grad() {
  for (const auto& p : params_) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

OptimizerState RAdamLookahead::state() const {
  OptimizerState s;
  s.t = t_;
  s.lookahead_counter = outer_.empty() ? 0 : outer_[0].counter;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    s.m.push_back(inner_[i].m);
    s.v.push_back(inner_[i].v);
    s.slow.push_back(outer_[i].slow);
  }
  return s;
}

void RAdamLookahead::load_state(const OptimizerState& s) {
  const std::size_t n = params_.size();
  if (s.m.size() != n || s.v.size() != n || s.slow.size() != n) {
    throw ShapeError("optimizer state has " + std::to_string(s.m.size()) + " entries for " + std::to_string(n) +
                     " parameters");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t size = params_[i].tensor.size();
    if (s.m[i].size() != size || s.v[i].size() != size || s.slow[i].size() != size) {
      throw ShapeError("optimizer state size mismatch for " + params_[i].name);
    }
  }
  t_ = s.t;
  for (std::size_t i = 0; i < n; ++i) {
    inner_[i] = RAdamState{s.m[i], s.v[i], s.t};
    outer_[i] = LookaheadState{s.slow[i], s.lookahead_counter};
  }
}

}  // namespace specgan
