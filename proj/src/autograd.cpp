#include "asmamba/autograd.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace asmamba {

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  a.check_same(b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

const Tensor& Var::value() const { return node_->value; }
const Tensor& Var::grad() const { return node_->grad; }
bool Var::requires_grad() const { return node_ && node_->requires_grad; }

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var variable(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var make_node(Tensor value, std::vector<Var> inputs, BackwardFn fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const Var& in : inputs) {
    if (in.requires_grad()) n->inputs.push_back(in.ptr());
  }
  if (!n->inputs.empty()) {
    n->requires_grad = true;
    n->backward = std::move(fn);
  }
  return Var(std::move(n));
}

void accumulate(const Var& v, const Tensor& g) {
  if (!v.requires_grad()) return;
  v.node()->grad_buffer() += g;
}

Tensor* grad_of(const Var& v) {
  if (!v.requires_grad()) return nullptr;
  return &v.node()->grad_buffer();
}

void backward(const Var& root) {
  if (!root.requires_grad()) return;
  if (root.value().size() != 1) throw std::invalid_argument("backward: root must be scalar");

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer().fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(n->grad);
  }
}

Parameter& ParamStore::add(const std::string& name, Tensor init) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  index_[name] = params_.size();
  params_.push_back(Parameter{name, std::move(init), params_.size()});
  return params_.back();
}

Parameter* ParamStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

const Parameter* ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Gradients zero_gradients(const ParamStore& store) {
  Gradients g;
  g.reserve(store.size());
  for (const auto& p : store) g.emplace_back(p.value.shape());
  return g;
}

Var Context::param(const Parameter& p) {
  auto it = leaves_.find(&p);
  if (it != leaves_.end()) return it->second;
  Var leaf = variable(p.value);
  leaves_.emplace(&p, leaf);
  order_.push_back(&p);
  return leaf;
}

void Context::collect(Gradients& out) const {
  for (const Parameter* p : order_) {
    const Var& leaf = leaves_.at(p);
    if (!leaf.grad().empty()) out.at(p->index) += leaf.grad();
  }
}

}  // namespace asmamba
