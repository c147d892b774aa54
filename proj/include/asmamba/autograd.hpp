#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "asmamba/tensor.hpp"

namespace asmamba {

struct Node;

/// Handle to a value in the computation graph.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const;
  const Tensor& grad() const;
  bool requires_grad() const;
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

  // Convenience forwarding for shape queries.
  const std::vector<int>& shape() const { return value().shape(); }
  int channels() const { return value().channels(); }
  int height() const { return value().height(); }
  int width() const { return value().width(); }

 private:
  std::shared_ptr<Node> node_;
};

using BackwardFn = std::function<void(const Tensor& grad_out)>;

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  Tensor& grad_buffer() {
    if (grad.empty() && !value.empty()) grad = Tensor(value.shape());
    return grad;
  }
};

/// Graph leaf that never receives gradients.
Var constant(Tensor value);
/// Graph leaf that accumulates gradients.
Var variable(Tensor value);

/// Builds an interior node. `fn` receives the node's output gradient and is
/// responsible for accumulating into the inputs' grad buffers; it is only
/// stored when some input requires a gradient.
Var make_node(Tensor value, std::vector<Var> inputs, BackwardFn fn);

/// Accumulates `g` into `v`'s grad buffer if `v` requires a gradient.
void accumulate(const Var& v, const Tensor& g);
/// Writable grad buffer for `v`, or nullptr when `v` needs no gradient.
Tensor* grad_of(const Var& v);

/// Reverse-mode sweep from a scalar root, seeding d(root)/d(root) = 1.
void backward(const Var& root);

/// A trainable array owned by a ParamStore.
struct Parameter {
  std::string name;
  Tensor value;
  std::size_t index = 0;
};

/// Ordered parameter registry. Addresses are stable for the store's lifetime.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  Parameter& add(const std::string& name, Tensor init);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Gradient buffers aligned with a ParamStore's ordering.
using Gradients = std::vector<Tensor>;

Gradients zero_gradients(const ParamStore& store);

/// Per-forward-pass graph context. Each parameter maps to one leaf so that
/// multiple uses share a single gradient accumulator.
class Context {
 public:
  Var param(const Parameter& p);
  /// Adds the leaves' gradients into `out` (must match the owning store).
  void collect(Gradients& out) const;

 private:
  std::unordered_map<const Parameter*, Var> leaves_;
  std::vector<const Parameter*> order_;
};

}  // namespace asmamba
