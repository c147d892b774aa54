#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "asmamba/autograd.hpp"
#include "asmamba/random.hpp"

namespace asmamba::gradcheck {

struct GradReport {
  std::string name;
  double rel_error = 0.0;
  double analytic_norm = 0.0;
};

/// Relative error ||g_a - g_n|| / max(||g_a||, ||g_n||, floor) over a sample
/// of entries, with central differences of step h.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& n, double floor = 1e-8) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), floor});
}

/// Checks d(loss)/d(tensor) where `tensor` is perturbed in place.
inline GradReport check_tensor(const std::string& name, Tensor& tensor, const Tensor& analytic,
                               const std::function<double()>& loss, int max_entries = 12,
                               double h = 1e-4, std::uint64_t seed = 7) {
  Rng rng(seed);
  std::vector<std::size_t> idx;
  if (static_cast<int>(tensor.size()) <= max_entries) {
    for (std::size_t i = 0; i < tensor.size(); ++i) idx.push_back(i);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, tensor.size() - 1);
    for (int k = 0; k < max_entries; ++k) idx.push_back(pick(rng));
  }
  std::vector<double> a, n;
  for (std::size_t i : idx) {
    const double orig = tensor[i];
    tensor[i] = orig + h;
    const double up = loss();
    tensor[i] = orig - h;
    const double down = loss();
    tensor[i] = orig;
    n.push_back((up - down) / (2.0 * h));
    a.push_back(analytic[i]);
  }
  GradReport r;
  r.name = name;
  r.rel_error = relative_error(a, n);
  for (double v : a) r.analytic_norm += v * v;
  r.analytic_norm = std::sqrt(r.analytic_norm);
  return r;
}

/// Gradient check of a scalar graph w.r.t. every parameter of `store`.
/// `build` must construct the loss from the context only.
inline std::vector<GradReport> check_params(ParamStore& store, const std::function<Var(Context&)>& build,
                                            int max_entries = 12) {
  Gradients grads = zero_gradients(store);
  {
    Context ctx;
    Var loss = build(ctx);
    backward(loss);
    ctx.collect(grads);
  }
  auto eval = [&] {
    Context ctx;
    return build(ctx).value()[0];
  };
  std::vector<GradReport> out;
  for (std::size_t p = 0; p < store.size(); ++p) {
    out.push_back(check_tensor(store[p].name, store[p].value, grads[p], eval, max_entries));
  }
  return out;
}

/// Gradient check of a scalar function of one input tensor.
inline GradReport check_input(Tensor x, const std::function<Var(const Var&)>& f, int max_entries = 24) {
  Var v = variable(x);
  Var out = f(v);
  backward(out);
  const Tensor analytic = v.grad().empty() ? Tensor(x.shape()) : v.grad();
  auto eval = [&] { return f(constant(x)).value()[0]; };
  return check_tensor("input", x, analytic, eval, max_entries);
}

}  // namespace asmamba::gradcheck
