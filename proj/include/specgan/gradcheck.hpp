#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "specgan/tensor.hpp"

namespace specgan {

/// One finite-difference check: `loss` rebuilds a scalar from the current
/// values of `inputs`; every input must require grad.
struct GradCheckCase {
  std::string op;
  std::vector<Tensor> inputs;
  std::function<Tensor()> loss;
};

struct GradCheckOptions {
  double eps = 1e-5;
  double tolerance = 1e-4;
  /// Coordinates probed per input; inputs this small or smaller are probed fully.
  std::size_t max_coords = 12;
  std::uint64_t seed = 7;
};

/// |a - n| / max(|a|, |n|, 1e-6).
double gradcheck_relative_error(double analytic, double numeric);

struct OpCheck {
  std::string op;
  double worst = 0.0;
  std::size_t coords = 0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<OpCheck> ops;  // one entry per op name, in first-seen order
  bool passed() const;
  std::vector<std::string> failed_ops() const;
};

/// Central differences against backward() for every case.
GradCheckReport run_gradcheck(const std::vector<GradCheckCase>& cases, const GradCheckOptions& options = {});

/// Every differentiable op, layer, loss and discriminator variant, plus the
/// end-to-end generator loss through a frozen discriminator.
std::vector<GradCheckCase> standard_gradcheck_suite(std::uint64_t seed = 11);

/// An op whose backward rule is deliberately wrong (doubles the gradient);
/// the negative control for run_gradcheck.
GradCheckCase corrupted_gradcheck_case();

void print_gradcheck_report(std::ostream& out, const GradCheckReport& report, const GradCheckOptions& options);

}  // namespace specgan
