#pragma once

// Reverse-mode automatic differentiation over dense row-major 2-D tensors of
// doubles. Each op output that depends on a grad-requiring input carries a
// node holding its inputs and backward rule; backward() orders the reachable
// nodes topologically (the tape) and runs the rules in reverse.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace crossdistil::numgrad {

class Tensor;

struct BackwardContext {
  std::span<const double> out_values;
  std::span<const double> out_grad;
  std::span<const Tensor> inputs;
  // One slot per input; null when that input does not require grad.
  std::span<std::vector<double>* const> input_grads;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

struct TapeNode {
  std::string op;
  std::vector<Tensor> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<double> grad;  // sized rows*cols iff requires_grad
  bool requires_grad = false;
  std::shared_ptr<TapeNode> node;  // null for leaves and untracked results
};

class Tensor {
 public:
  Tensor();
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values,
         bool requires_grad = false);

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor filled(std::size_t rows, std::size_t cols, double value);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor column(std::vector<double> values);

  std::size_t rows() const { return impl_->rows; }
  std::size_t cols() const { return impl_->cols; }
  std::size_t size() const { return impl_->values.size(); }

  std::span<const double> values() const { return impl_->values; }
  // Direct mutation is for optimizers and initializers acting on leaves.
  std::span<double> mutable_values() { return impl_->values; }
  double at(std::size_t r, std::size_t c) const { return impl_->values[r * impl_->cols + c]; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  bool is_leaf() const { return impl_->node == nullptr; }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad() { return impl_->grad; }
  void zero_grad();

  // Name of the op that produced this tensor, or "leaf".
  std::string op() const;

  // Deep copy of values and grad, with no tape edge.
  Tensor clone() const;

  std::string shape_str() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  bool same_as(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_result(std::string op, std::size_t rows, std::size_t cols,
                            std::vector<double> values, std::vector<Tensor> inputs,
                            BackwardFn backward);

  std::shared_ptr<TensorImpl> impl_;
};

// Disables recording for its lifetime on the current thread.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Builds an op output, validating finiteness and recording a node when any
// input requires grad. Exposed so new ops can be defined outside this file.
Tensor make_result(std::string op, std::size_t rows, std::size_t cols,
                   std::vector<double> values, std::vector<Tensor> inputs,
                   BackwardFn backward);

// ---- forward ops ----

Tensor matmul(const Tensor& a, const Tensor& b);
// b must have a's shape, or be a 1 x a.cols() row that is broadcast down rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor neg(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor log_sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);
Tensor row_gather(const Tensor& table, std::span<const std::size_t> indices);
Tensor reduce_mean(const Tensor& a);
Tensor reduce_sum(const Tensor& a);
Tensor row_softmax(const Tensor& a);
Tensor scalar_scale(const Tensor& a, double c);

// Same values, requires_grad = false, no edge back to t.
Tensor detach(const Tensor& t);

// Accumulates d(loss)/d(t) into t.grad for every grad-requiring tensor
// reachable from loss. loss must be 1x1.
void backward(const Tensor& loss);

// Numerically stable logistic function on a plain double.
double stable_sigmoid(double x);
double stable_softplus(double x);

}  // namespace crossdistil::numgrad
