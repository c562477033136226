#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "specgan/layers.hpp"

namespace specgan {

struct RAdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// false: r_t = 1 in the adaptive branch.
  bool rectify = true;
  /// true: always take the adaptive branch, whatever rho_t is.
  bool force_adaptive = false;
};

struct RAdamState {
  std::vector<double> m, v;
  std::int64_t t = 0;
};

/// Length of the approximated simple moving average at step t.
double radam_rho(std::int64_t t, double beta2);
/// Variance rectification term r_t; needs rho_t > 4.
double radam_rectifier(double rho_t, double beta2);
/// Adaptive update is used iff rho_t exceeds this.
inline constexpr double kRAdamRhoThreshold = 4.0;

/// One RAdam step on a single buffer. Throws NumericError on a non-finite
/// gradient and ShapeError on a size mismatch; `param` is untouched then.
void radam_step(std::span<double> param, std::span<const double> grad, RAdamState& state, double lr,
                const RAdamOptions& options = {});

struct LookaheadOptions {
  std::size_t k = 5;
  double alpha = 0.5;
};

struct LookaheadState {
  std::vector<double> slow;  // phi
  std::size_t counter = 0;   // inner steps since the last sync
};

/// Call after every inner step. On every k-th call: phi += alpha (theta - phi),
/// theta = phi. Returns true when it synced.
bool lookahead_sync(std::span<double> param, LookaheadState& state, const LookaheadOptions& options = {});

/// Serializable state of RAdamLookahead, one entry per parameter.
struct OptimizerState {
  std::int64_t t = 0;
  std::size_t lookahead_counter = 0;
  std::vector<std::vector<double>> m, v, slow;
};

/// RAdam wrapped in Lookahead over a parameter list. A parameter that has
/// no gradient after backward is stepped with a zero gradient.
class RAdamLookahead {
 public:
  explicit RAdamLookahead(ParamList params, RAdamOptions radam = {}, LookaheadOptions lookahead = {});

  void step(double lr);
  void zero_grad();

  std::int64_t steps() const { return t_; }
  const ParamList& params() const { return params_; }
  OptimizerState state() const;
  /// Throws ShapeError if the sizes do not match the parameters.
  void load_state(const OptimizerState& state);

 private:
  ParamList params_;
  RAdamOptions radam_;
  LookaheadOptions lookahead_;
  std::vector<RAdamState> inner_;
  std::vector<LookaheadState> outer_;
  std::int64_t t_ = 0;
};

}  // namespace specgan
