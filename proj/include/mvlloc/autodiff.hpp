#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mvlloc/rng.hpp"
#include "mvlloc/tensor.hpp"

namespace mvl {

class GradientTape;

/// Handle to a value recorded on a GradientTape. Cheap to copy; valid while
/// the tape lives.
class Var {
 public:
  Var() = default;
  Var(GradientTape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  GradientTape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  GradientTape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Parameter gradients produced by GradientTape::backward.
class Gradients {
 public:
  /// Throws std::out_of_range when `name` was never registered on the tape.
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return grads_.contains(name); }
  const std::map<std::string, Tensor>& all() const { return grads_; }
  std::map<std::string, Tensor>& all() { return grads_; }

 private:
  friend class GradientTape;
  std::map<std::string, Tensor> grads_;
};

/// Reverse-mode recorder. Operations append nodes in execution order;
/// backward() walks them in reverse. Single writer: one forward/backward
/// pass per tape instance at a time.
class GradientTape {
 public:
  /// Adjoint callback: receives the node's accumulated output gradient and
  /// the node's own forward value.
  using Backward = std::function<void(const Tensor& grad_out, const Tensor& value_out)>;

  GradientTape() = default;
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;

  Var constant(Tensor value);
  /// Registers a named parameter once; later calls with the same name return
  /// the existing handle.
  Var parameter(const std::string& name, const Tensor& value);
  bool has_parameter(const std::string& name) const { return params_.contains(name); }

  /// Appends an op result. `backward` is dropped when no input needs a
  /// gradient.
  Var record(Tensor value, std::span<const Var> inputs, Backward backward);

  /// Adds `g` into the gradient buffer of `v` (no-op for constants).
  void accumulate(const Var& v, const Tensor& g);
  /// Zero-initialized gradient buffer of `v`, for in-place accumulation.
  Tensor& grad_buffer(const Var& v);

  /// Gradients of a single-element `loss` for every registered parameter.
  /// Parameters the loss does not depend on receive exact zeros.
  Gradients backward(const Var& loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> params_;
};

/// Differentiable operations. Each records one node.
namespace ad {

Var matmul(const Var& a, const Var& b);
/// a * b^T.
Var matmul_nt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
/// Adds a length-d vector to every row of an [n x d] matrix.
Var add_row(const Var& x, const Var& row);
Var scale(const Var& x, double factor);
Var add_scalar(const Var& x, double c);
Var neg(const Var& x);
Var abs(const Var& x);
Var exp(const Var& x);
/// Sum of all elements, shape [1].
Var sum(const Var& x);
/// Product of a single-element tensor with any tensor.
Var scalar_mul(const Var& s, const Var& x);

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps);
Var softmax_rows(const Var& x);
Var gelu(const Var& x);
/// Identity when `training` is false or `rate` is zero (no node recorded).
Var dropout(const Var& x, double rate, Rng& rng, bool training);

Var slice_rows(const Var& x, std::size_t begin, std::size_t end);
Var slice_cols(const Var& x, std::size_t begin, std::size_t end);
Var concat_rows(const Var& top, const Var& bottom);
Var concat_cols(std::span<const Var> parts);
/// Mean of rows [begin, end) as a [1 x d] row.
Var mean_rows(const Var& x, std::size_t begin, std::size_t end);
/// Rows of `table` selected by `ids`; gradient scatter-adds back.
Var gather_rows(const Var& table, std::span<const int> ids);
/// -log softmax(z)[target] via log-sum-exp; z is a vector or single row.
Var nll_from_logits(const Var& z, std::size_t target);

}  // namespace ad
}  // namespace mvl
