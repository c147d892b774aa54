#pragma once

#include <string>

#include "asmamba/autograd.hpp"
#include "asmamba/random.hpp"

namespace asmamba {

/// Square-kernel convolution with "same" zero padding.
struct Conv {
  Parameter* w = nullptr;  // (out, in, k, k)
  Parameter* b = nullptr;  // (out) or null
  int in = 0, out = 0, k = 1;

  /// Normal init with stddev gain / sqrt(in * k * k).
  static Conv create(ParamStore& store, const std::string& name, int in, int out, int k, Rng& rng,
                     double gain = 1.0, bool bias = true);
  /// Sets the kernel to a centre-tap channel selection out[i] = in[offset + i].
  void set_identity(int offset = 0);
  void zero();
  Var forward(Context& ctx, const Var& x) const;
};

/// Residual pair x + conv2(gelu(conv1(x))); conv2 starts small so the block
/// is near the identity.
struct ConvBlock {
  Conv c1, c2;
  static ConvBlock create(ParamStore& store, const std::string& name, int channels, Rng& rng);
  Var forward(Context& ctx, const Var& x) const;
};

}  // namespace asmamba
