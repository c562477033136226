#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace specgan {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t numel(const Shape& shape);

/// Raised when operand shapes are incompatible. The message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for invalid configuration values or combinations.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a NaN or infinity shows up where a finite value is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One recorded operation. Nodes are created in a strictly increasing `seq`
// order, so sorting reachable nodes by descending seq gives a valid replay
// order for the backward rules.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty means "no gradient yet"
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::string op;
  std::vector<NodePtr> parents;
  // Reads `self.grad` and accumulates into the parents that require grad.
  std::function<void(Node& self)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Dense row-major tensor of 64-bit floats with reverse-mode autodiff.
///
/// A Tensor is a shared handle: copies alias the same storage and gradient.
/// Parameters are leaf tensors with requires_grad set; every op applied to a
/// tensor that requires grad records a backward rule on its result.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  /// Drops the gradient buffer entirely (has_grad() becomes false).
  void zero_grad();

  /// Leaf copy of the values that never receives gradient.
  Tensor detach() const;
  /// Deep copy with the same requires_grad flag, no history.
  Tensor clone() const;

  /// Accumulates d(this)/d(leaf) into every reachable leaf that requires
  /// grad. Only valid on scalar tensors.
  void backward() const;

  const std::string& op() const;
  const detail::NodePtr& node() const { return node_; }
  static Tensor from_node(detail::NodePtr node);

 private:
  detail::NodePtr node_;
};

/// True unless a NoGradGuard is active on this thread.
bool grad_enabled();

/// RAII scope in which ops do not record backward rules.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Backward rule for a custom op. `out_grad` is d(loss)/d(output); the rule
/// must add into `inputs[i].mutable_grad()` for inputs that require grad.
using BackwardRule = std::function<void(std::span<const double> out_grad,
                                        std::span<Tensor> inputs)>;

/// Builds an op result. When grad is enabled and any input requires grad,
/// the result records `rule` on the tape; otherwise it is a plain leaf.
Tensor make_op_result(std::string op_name, Shape shape,
                      std::vector<double> values, std::vector<Tensor> inputs,
                      BackwardRule rule);

}  // namespace specgan
