#pragma once

#include <vector>

#include "asmamba/autograd.hpp"

// Differentiable tensor operations. Unless stated otherwise, feature maps are
// rank-3 (C, H, W) and binary elementwise ops require identical shapes.
namespace asmamba::ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& x, double s);
/// a*x + b for constant a, b.
Var affine(const Var& x, double a, double b);
/// x multiplied by the single-element Var `s`.
Var scale_by(const Var& x, const Var& s);
/// cx*x + cy*y with single-element coefficient Vars.
Var axpby(const Var& cx, const Var& x, const Var& cy, const Var& y);
/// x multiplied elementwise by a constant tensor of the same shape.
Var mul_const(const Var& x, const Tensor& m);

Var sum(const Var& x);
Var mean(const Var& x);
Var abs(const Var& x);
Var relu(const Var& x);
Var gelu(const Var& x);
Var softplus(const Var& x);
Var sigmoid(const Var& x);
Var exp(const Var& x);

/// Mean of |a - b| over all entries.
Var mean_abs_diff(const Var& a, const Var& b);
/// sum(mask * |a - b|) / sum(mask); mask has a's shape.
Var masked_mean_abs_diff(const Var& a, const Var& b, const Tensor& mask);

/// 2D convolution, stride 1, zero "same" padding. w: (Cout, Cin, k, k) with
/// odd k; bias: (Cout) or an empty Var.
Var conv2d(const Var& x, const Var& w, const Var& bias);

/// Layer normalization over the channel axis at every pixel.
Var layer_norm_channels(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

Var concat_channels(const std::vector<Var>& parts);
Var slice_channels(const Var& x, int start, int count);

/// Bilinear 2x upsampling with half-pixel centers (align_corners = false).
Var upsample2x(const Var& x);
/// 2x2 average pooling; H and W must be even.
Var avg_pool2(const Var& x);
Var crop(const Var& x, int top, int left, int height, int width);

}  // namespace asmamba::ops
