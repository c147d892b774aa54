#pragma once

#include <span>
#include <string>
#include <vector>

#include "asmamba/autograd.hpp"
#include "asmamba/random.hpp"

namespace asmamba::ssm {

/// Zero-order-hold discretization of a scalar mode.
struct Discretized {
  double a_bar;
  double b_bar;
};

/// a_bar = exp(delta*a), b_bar = ((exp(delta*a) - 1) / a) * b, with the
/// continuous limit delta*b for |a| <= 1e-8. Throws for delta <= 0.
Discretized discretize(double a, double delta, double b);

/// d b_bar / d delta and d b_bar / d a for b = 1.
struct ZohDerivatives {
  double a_bar;
  double gain;     // (exp(delta*a) - 1) / a
  double d_delta;  // d gain / d delta
  double d_a;      // d gain / d a
};
ZohDerivatives zoh_derivatives(double a, double delta);

enum class ScanDirection { RowForward, RowReverse, ColForward, ColReverse };

/// Token visiting order for an H x W grid stored row-major.
std::vector<int> scan_order(int height, int width, ScanDirection dir);

enum class ScanStrategy {
  Sequential,  // one pass over the recurrence
  Chunked,     // blocked three-phase scan; chunks are independent
};

/// Raw selective-scan inputs. Grids are (C, H, W) or (N, H, W); tokens are
/// visited in `order`.
///   h_t[c,n] = exp(delta_t[c] a[c,n]) h_{t-1}[c,n] + gain_t[c,n] b_t[n] x_t[c]
///   y_t[c]   = sum_n c_t[n] h_t[c,n] + d[c] x_t[c]
struct ScanTensors {
  const Tensor& x;      // (C, H, W)
  const Tensor& delta;  // (C, H, W), positive
  const Tensor& b;      // (N, H, W)
  const Tensor& c;      // (N, H, W)
  const Tensor& a;      // (C, N), negative
  const Tensor& d;      // (C)
};

Tensor scan_forward(const ScanTensors& in, std::span<const int> order,
                    ScanStrategy strategy = ScanStrategy::Sequential, int chunk = 64);

/// Differentiable scan over Vars with the shapes of ScanTensors.
Var scan(const Var& x, const Var& delta, const Var& b, const Var& c, const Var& a, const Var& d,
         std::vector<int> order, ScanStrategy strategy = ScanStrategy::Sequential);

/// Learnable maps of one selective SSM over `channels` features.
struct SSMParams {
  int channels = 0;
  int state_dim = 0;
  Parameter* a_log = nullptr;    // (C, N); a = -exp(a_log)
  Parameter* d = nullptr;        // (C)
  Parameter* delta_w = nullptr;  // (C, C, 1, 1)
  Parameter* delta_b = nullptr;  // (C)
  Parameter* b_w = nullptr;      // (N, C, 1, 1)
  Parameter* b_b = nullptr;      // (N)
  Parameter* c_w = nullptr;      // (N, C, 1, 1)
  Parameter* c_b = nullptr;      // (N)
};

/// a_n = -(n+1); delta bias so that softplus(bias) is log-uniform in
/// [0.01, 0.1]; d = 1.
SSMParams make_ssm_params(ParamStore& store, const std::string& prefix, int channels,
                          int state_dim, Rng& rng);

/// Per-token delta (softplus), B and C projections for a (C, H, W) input.
struct Projections {
  Var delta, b, c, a, d;
};
Projections project(Context& ctx, const SSMParams& p, const Var& x);

/// Selective scan of `x` (C, H, W) along `order`.
Var selective_scan(Context& ctx, const SSMParams& p, const Var& x, std::vector<int> order,
                   ScanStrategy strategy = ScanStrategy::Sequential);

struct MambaBlockOptions {
  int state_dim = 8;
  bool four_directions = false;  // add column-major forward/reverse scans
  double residual_init = 0.1;    // initial alpha and beta
};

/// F_m = x + alpha * SSM(LN(x)); out = F_m + beta * FFN(LN(F_m)).
struct MambaBlock {
  int channels = 0;
  bool four_directions = false;
  Parameter* ln1_g = nullptr;
  Parameter* ln1_b = nullptr;
  SSMParams ssm;
  Parameter* alpha = nullptr;
  Parameter* ln2_g = nullptr;
  Parameter* ln2_b = nullptr;
  Parameter* ffn_w1 = nullptr;  // (2C, C, 1, 1)
  Parameter* ffn_b1 = nullptr;
  Parameter* ffn_w2 = nullptr;  // (C, 2C, 1, 1)
  Parameter* ffn_b2 = nullptr;
  Parameter* beta = nullptr;

  static MambaBlock create(ParamStore& store, const std::string& prefix, int channels,
                           const MambaBlockOptions& opts, Rng& rng);

  std::vector<ScanDirection> directions() const;
  /// Direction-averaged SSM branch without residual or normalization.
  Var ssm_branch(Context& ctx, const Var& z) const;
  Var forward(Context& ctx, const Var& x) const;
};

}  // namespace asmamba::ssm
