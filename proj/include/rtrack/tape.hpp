#pragma once

// Reverse-mode differentiation over dense tensors.
//
// A Tape records every operation of one forward pass. Values are cheap
// handles (tape pointer + node id); node ids increase in creation order, so
// creation order is a topological order and backward walks ids downward.
// A Tape and its Values belong to one thread.

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtrack/tensor.hpp"

namespace rtrack {

class Tape;

class Value {
 public:
  Value() = default;
  Value(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& tensor() const;
  const Shape& shape() const { return tensor().shape(); }
  double item() const { return tensor().item(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradients produced by Tape::backward, indexed by node id.
class GradientStore {
 public:
  bool contains(const Value& v) const { return v.id() < grads_.size() && grads_[v.id()].has_value(); }
  const Tensor& at(const Value& v) const;
  /// Gradient of `v`, or zeros of its shape when the store has none.
  Tensor get_or_zero(const Value& v) const;
  std::size_t size() const;
  bool empty() const { return size() == 0; }

  friend bool operator==(const GradientStore&, const GradientStore&) = default;

 private:
  friend class Tape;
  std::vector<std::optional<Tensor>> grads_;
};

/// Per-node backward rule: receives the node's output gradient and one slot per
/// parent (nullptr where the parent does not need a gradient).
using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> parent_grads)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value leaf(Tensor t, bool requires_grad = true);
  Value constant(Tensor t) { return leaf(std::move(t), false); }
  Value constant(double v) { return leaf(Tensor::scalar(v), false); }

  /// Records an op output. The backward rule is dropped when no parent needs a gradient.
  Value record(const char* op, Tensor out, std::vector<Value> parents, BackwardFn backward);

  const Tensor& tensor(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  GradientStore backward(const Value& loss) const;

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
};

enum class UnaryOp { Neg, Exp, Log, Sqrt, Sigmoid, Relu, Square };
enum class BinaryOp { Add, Sub, Mul, Div, Min, Max };
enum class ReduceOp { Sum, Mean, Max, Min };

/// Clamp applied to log/sqrt arguments and division denominators.
inline constexpr double kStabilityEps = 1e-12;

Value unary(UnaryOp op, const Value& x);
/// Elementwise with right-aligned broadcasting of size-1 axes. Min/max route
/// the gradient to the selected operand; ties go to `a`.
Value binary(BinaryOp op, const Value& a, const Value& b);
Value matmul(const Value& a, const Value& b);
/// Reduces over one axis, or over everything when `axis` is empty. Max/min
/// route the gradient to the first extremal element.
Value reduce(ReduceOp op, const Value& x, std::optional<std::size_t> axis = std::nullopt);
/// Same tensor, cut from the graph: nothing flows back through it.
Value detach(const Value& x);

Value pow(const Value& x, double exponent);
/// Pass-through gradient inside [lo, hi], zero outside.
Value clamp(const Value& x, double lo, double hi);
Value reshape(const Value& x, Shape shape);
/// Elements [begin, end) along `axis`.
Value slice(const Value& x, std::size_t axis, std::size_t begin, std::size_t end);
Value concat(std::span<const Value> parts, std::size_t axis);
/// Rows of `x` (axis 0) at `rows`, in order; repeated rows accumulate gradient.
Value gather(const Value& x, std::span<const std::size_t> rows);
/// Bilinear lookup of features[H,W,C] at points[P,2] in grid units -> [P,C].
Value bilinear_sample(const Value& features, const Value& points);

inline Value neg(const Value& x) { return unary(UnaryOp::Neg, x); }
inline Value exp(const Value& x) { return unary(UnaryOp::Exp, x); }
inline Value log(const Value& x) { return unary(UnaryOp::Log, x); }
inline Value sqrt(const Value& x) { return unary(UnaryOp::Sqrt, x); }
inline Value sigmoid(const Value& x) { return unary(UnaryOp::Sigmoid, x); }
inline Value relu(const Value& x) { return unary(UnaryOp::Relu, x); }
inline Value square(const Value& x) { return unary(UnaryOp::Square, x); }
inline Value minimum(const Value& a, const Value& b) { return binary(BinaryOp::Min, a, b); }
inline Value maximum(const Value& a, const Value& b) { return binary(BinaryOp::Max, a, b); }
inline Value sum(const Value& x, std::optional<std::size_t> axis = std::nullopt) { return reduce(ReduceOp::Sum, x, axis); }
inline Value mean(const Value& x, std::optional<std::size_t> axis = std::nullopt) { return reduce(ReduceOp::Mean, x, axis); }

Value operator+(const Value& a, const Value& b);
Value operator-(const Value& a, const Value& b);
Value operator*(const Value& a, const Value& b);
Value operator/(const Value& a, const Value& b);
Value operator-(const Value& x);
Value operator+(const Value& a, double b);
Value operator+(double a, const Value& b);
Value operator-(const Value& a, double b);
Value operator-(double a, const Value& b);
Value operator*(const Value& a, double b);
Value operator*(double a, const Value& b);
Value operator/(const Value& a, double b);
Value operator/(double a, const Value& b);

/// Builds a scalar loss on a fresh tape from leaves holding the given parameters.
using TapeFunction = std::function<Value(Tape&, std::span<const Value>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compares backward gradients with central differences (f(x+h)-f(x-h))/2h on
/// every coordinate. Relative error uses max(|analytic|, |numeric|, 1e-8).
GradCheckResult grad_check(const TapeFunction& f, std::span<const Tensor> params, double h = 1e-5);

}  // namespace rtrack
