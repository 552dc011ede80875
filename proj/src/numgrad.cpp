#include "crossdistil/numgrad.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "crossdistil/errors.hpp"

namespace crossdistil::numgrad {

namespace {

thread_local bool g_grad_enabled = true;

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
  throw ConfigError(op + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str());
}

// Elementwise unary op. `derivative(x, y)` returns dy/dx given input x and output y.
template <typename Fwd, typename Deriv>
Tensor unary(const std::string& op, const Tensor& a, Fwd fwd, Deriv derivative) {
  std::vector<double> out(a.size());
  const auto in = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return make_result(op, a.rows(), a.cols(), std::move(out), {a},
                     [derivative](const BackwardContext& ctx) {
                       auto* ga = ctx.input_grads[0];
                       if (ga == nullptr) return;
                       const auto x = ctx.inputs[0].values();
                       for (std::size_t i = 0; i < x.size(); ++i) {
                         (*ga)[i] += ctx.out_grad[i] * derivative(x[i], ctx.out_values[i]);
                       }
                     });
}

}  // namespace

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// ---- Tensor ----

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  if (values.size() != rows * cols) {
    throw ConfigError("tensor: " + std::to_string(values.size()) + " values for shape (" +
                      std::to_string(rows) + "x" + std::to_string(cols) + ")");
  }
  impl_->rows = rows;
  impl_->cols = cols;
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
  if (requires_grad) impl_->grad.assign(rows * cols, 0.0);
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return Tensor(rows, cols, std::vector<double>(rows * cols, 0.0), requires_grad);
}

Tensor Tensor::filled(std::size_t rows, std::size_t cols, double value) {
  return Tensor(rows, cols, std::vector<double>(rows * cols, value));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(1, 1, {value}, requires_grad);
}

Tensor Tensor::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(n, 1, std::move(values));
}

double Tensor::item() const {
  if (size() != 1) throw UsageError("item() on tensor of shape " + shape_str());
  return impl_->values[0];
}

void Tensor::zero_grad() { std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0); }

std::string Tensor::op() const { return impl_->node ? impl_->node->op : "leaf"; }

Tensor Tensor::clone() const {
  Tensor t(rows(), cols(), impl_->values, impl_->requires_grad);
  t.impl_->grad = impl_->grad;
  return t;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(" << rows() << "x" << cols() << ")";
  return os.str();
}

// ---- grad mode ----

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor make_result(std::string op, std::size_t rows, std::size_t cols, std::vector<double> values,
                   std::vector<Tensor> inputs, BackwardFn backward) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("non-finite value produced by op '" + op + "'");
  }
  const bool track =
      g_grad_enabled && std::any_of(inputs.begin(), inputs.end(),
                                    [](const Tensor& t) { return t.requires_grad(); });
  Tensor out(rows, cols, std::move(values), track);
  if (track) {
    out.impl_->node = std::make_shared<TapeNode>(
        TapeNode{std::move(op), std::move(inputs), std::move(backward)});
  }
  return out;
}

// ---- ops ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  std::vector<double> out(n * m, 0.0);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = av[i * k + p];
      if (s == 0.0) continue;
      const double* brow = bv.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += s * brow[j];
    }
  }
  return make_result("matmul", n, m, std::move(out), {a, b}, [n, k, m](const BackwardContext& ctx) {
    const auto av = ctx.inputs[0].values();
    const auto bv = ctx.inputs[1].values();
    const auto g = ctx.out_grad;
    if (auto* ga = ctx.input_grads[0]) {
      // dA = G * B^T
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = g.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = bv.data() + p * m;
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
          (*ga)[i * k + p] += acc;
        }
      }
    }
    if (auto* gb = ctx.input_grads[1]) {
      // dB = A^T * G
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = g.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double s = av[i * k + p];
          if (s == 0.0) continue;
          double* dst = gb->data() + p * m;
          for (std::size_t j = 0; j < m; ++j) dst[j] += s * grow[j];
        }
      }
    }
  });
}

namespace {

// Shared implementation of add/sub with optional row broadcast of b.
Tensor add_signed(const std::string& op, const Tensor& a, const Tensor& b, double sign) {
  const bool same = a.rows() == b.rows() && a.cols() == b.cols();
  const bool row_bcast = !same && b.rows() == 1 && b.cols() == a.cols();
  if (!same && !row_bcast) shape_error(op, a, b);
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out[i * cols + j] += sign * bv[row_bcast ? j : i * cols + j];
    }
  }
  return make_result(op, rows, cols, std::move(out), {a, b},
                     [rows, cols, row_bcast, sign](const BackwardContext& ctx) {
                       const auto g = ctx.out_grad;
                       if (auto* ga = ctx.input_grads[0]) {
                         for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
                       }
                       if (auto* gb = ctx.input_grads[1]) {
                         for (std::size_t i = 0; i < rows; ++i) {
                           for (std::size_t j = 0; j < cols; ++j) {
                             (*gb)[row_bcast ? j : i * cols + j] += sign * g[i * cols + j];
                           }
                         }
                       }
                     });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_signed("add", a, b, 1.0); }

Tensor sub(const Tensor& a, const Tensor& b) { return add_signed("sub", a, b, -1.0); }

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("mul", a, b);
  std::vector<double> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result("mul", a.rows(), a.cols(), std::move(out), {a, b},
                     [](const BackwardContext& ctx) {
                       const auto av = ctx.inputs[0].values();
                       const auto bv = ctx.inputs[1].values();
                       const auto g = ctx.out_grad;
                       if (auto* ga = ctx.input_grads[0]) {
                         for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
                       }
                       if (auto* gb = ctx.input_grads[1]) {
                         for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
                       }
                     });
}

Tensor sigmoid(const Tensor& a) {
  return unary("sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& a) {
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor exp(const Tensor& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor neg(const Tensor& a) {
  return unary(
      "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor softplus(const Tensor& a) {
  return unary("softplus", a, stable_softplus,
               [](double x, double) { return stable_sigmoid(x); });
}

Tensor log_sigmoid(const Tensor& a) {
  return unary(
      "log_sigmoid", a, [](double x) { return -stable_softplus(-x); },
      [](double x, double) { return stable_sigmoid(-x); });
}

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat_cols(parts);
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ConfigError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::vector<std::size_t> offsets;
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts[0], p);
    offsets.push_back(cols);
    cols += p.cols();
  }
  std::vector<double> out(rows * cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto v = parts[k].values();
    const std::size_t pc = parts[k].cols();
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy_n(v.data() + i * pc, pc, out.data() + i * cols + offsets[k]);
    }
  }
  return make_result("concat_cols", rows, cols, std::move(out),
                     std::vector<Tensor>(parts.begin(), parts.end()),
                     [rows, cols, offsets](const BackwardContext& ctx) {
                       for (std::size_t k = 0; k < ctx.inputs.size(); ++k) {
                         auto* gk = ctx.input_grads[k];
                         if (gk == nullptr) continue;
                         const std::size_t pc = ctx.inputs[k].cols();
                         for (std::size_t i = 0; i < rows; ++i) {
                           for (std::size_t j = 0; j < pc; ++j) {
                             (*gk)[i * pc + j] += ctx.out_grad[i * cols + offsets[k] + j];
                           }
                         }
                       }
                     });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  if (start + count > a.cols()) {
    throw ConfigError("slice_cols: columns [" + std::to_string(start) + ", " +
                      std::to_string(start + count) + ") out of range for " + a.shape_str());
  }
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(rows * count);
  const auto v = a.values();
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy_n(v.data() + i * cols + start, count, out.data() + i * count);
  }
  return make_result("slice_cols", rows, count, std::move(out), {a},
                     [rows, cols, start, count](const BackwardContext& ctx) {
                       auto* ga = ctx.input_grads[0];
                       if (ga == nullptr) return;
                       for (std::size_t i = 0; i < rows; ++i) {
                         for (std::size_t j = 0; j < count; ++j) {
                           (*ga)[i * cols + start + j] += ctx.out_grad[i * count + j];
                         }
                       }
                     });
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
  if (start + count > a.rows()) {
    throw ConfigError("slice_rows: rows [" + std::to_string(start) + ", " +
                      std::to_string(start + count) + ") out of range for " + a.shape_str());
  }
  const std::size_t cols = a.cols();
  const auto v = a.values();
  std::vector<double> out(v.begin() + start * cols, v.begin() + (start + count) * cols);
  return make_result("slice_rows", count, cols, std::move(out), {a},
                     [start, cols](const BackwardContext& ctx) {
                       auto* ga = ctx.input_grads[0];
                       if (ga == nullptr) return;
                       for (std::size_t i = 0; i < ctx.out_grad.size(); ++i) {
                         (*ga)[start * cols + i] += ctx.out_grad[i];
                       }
                     });
}

Tensor row_gather(const Tensor& table, std::span<const std::size_t> indices) {
  const std::size_t cols = table.cols();
  std::vector<double> out(indices.size() * cols);
  const auto v = table.values();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= table.rows()) {
      throw ConfigError("row_gather: index " + std::to_string(indices[i]) +
                        " out of range for table " + table.shape_str());
    }
    std::copy_n(v.data() + indices[i] * cols, cols, out.data() + i * cols);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_result("row_gather", indices.size(), cols, std::move(out), {table},
                     [idx = std::move(idx), cols](const BackwardContext& ctx) {
                       auto* gt = ctx.input_grads[0];
                       if (gt == nullptr) return;
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         double* dst = gt->data() + idx[i] * cols;
                         const double* src = ctx.out_grad.data() + i * cols;
                         for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
                       }
                     });
}

Tensor reduce_sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.values()) s += x;
  return make_result("reduce_sum", 1, 1, {s}, {a}, [](const BackwardContext& ctx) {
    auto* ga = ctx.input_grads[0];
    if (ga == nullptr) return;
    for (double& g : *ga) g += ctx.out_grad[0];
  });
}

Tensor reduce_mean(const Tensor& a) {
  if (a.size() == 0) throw ConfigError("reduce_mean: empty tensor");
  double s = 0.0;
  for (double x : a.values()) s += x;
  const double n = static_cast<double>(a.size());
  return make_result("reduce_mean", 1, 1, {s / n}, {a}, [n](const BackwardContext& ctx) {
    auto* ga = ctx.input_grads[0];
    if (ga == nullptr) return;
    const double g = ctx.out_grad[0] / n;
    for (double& x : *ga) x += g;
  });
}

Tensor row_softmax(const Tensor& a) {
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(a.size());
  const auto v = a.values();
  for (std::size_t i = 0; i < rows; ++i) {
    const double* in = v.data() + i * cols;
    double* o = out.data() + i * cols;
    const double mx = *std::max_element(in, in + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < cols; ++j) o[j] /= z;
  }
  return make_result("row_softmax", rows, cols, std::move(out), {a},
                     [rows, cols](const BackwardContext& ctx) {
                       auto* ga = ctx.input_grads[0];
                       if (ga == nullptr) return;
                       for (std::size_t i = 0; i < rows; ++i) {
                         const double* y = ctx.out_values.data() + i * cols;
                         const double* g = ctx.out_grad.data() + i * cols;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < cols; ++j) dot += g[j] * y[j];
                         for (std::size_t j = 0; j < cols; ++j) {
                           (*ga)[i * cols + j] += y[j] * (g[j] - dot);
                         }
                       }
                     });
}

Tensor scalar_scale(const Tensor& a, double c) {
  return unary(
      "scalar_scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor detach(const Tensor& t) {
  return Tensor(t.rows(), t.cols(), std::vector<double>(t.values().begin(), t.values().end()));
}

// ---- backward ----

void backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw UsageError("backward: loss must be 1x1, got " + loss.shape_str());
  }
  if (!loss.requires_grad()) {
    throw UsageError("backward: loss does not depend on any grad-requiring tensor");
  }

  // Post-order DFS yields the tape: every node after all of its inputs.
  std::vector<TensorImpl*> tape;
  std::unordered_set<const TensorImpl*> visited;
  struct Frame {
    TensorImpl* impl;
    std::size_t next_input;
  };
  std::vector<Frame> stack{{loss.impl().get(), 0}};
  visited.insert(loss.impl().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    const auto& node = f.impl->node;
    if (node && f.next_input < node->inputs.size()) {
      TensorImpl* child = node->inputs[f.next_input++].impl().get();
      if (child->requires_grad && visited.insert(child).second) stack.push_back({child, 0});
    } else {
      tape.push_back(f.impl);
      stack.pop_back();
    }
  }

  std::unordered_map<const TensorImpl*, std::vector<double>> grads;
  grads[loss.impl().get()] = {1.0};
  for (auto it = tape.rbegin(); it != tape.rend(); ++it) {
    TensorImpl* impl = *it;
    if (!impl->node) continue;
    auto found = grads.find(impl);
    if (found == grads.end()) continue;
    const std::vector<double>& out_grad = found->second;
    const auto& inputs = impl->node->inputs;
    std::vector<std::vector<double>*> slots(inputs.size(), nullptr);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      TensorImpl* in = inputs[k].impl().get();
      if (!in->requires_grad) continue;
      auto& buf = grads[in];
      if (buf.empty()) buf.assign(in->values.size(), 0.0);
      slots[k] = &buf;
    }
    impl->node->backward(BackwardContext{impl->values, out_grad, inputs, slots});
  }

  for (TensorImpl* impl : tape) {
    auto found = grads.find(impl);
    if (found == grads.end() || found->second.empty()) continue;
    for (std::size_t i = 0; i < impl->grad.size(); ++i) impl->grad[i] += found->second[i];
  }
}

}  // namespace crossdistil::numgrad
