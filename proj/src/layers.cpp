#include "asmamba/layers.hpp"

#include <cmath>

#include "asmamba/ops.hpp"

namespace asmamba {

Conv Conv::create(ParamStore& store, const std::string& name, int in, int out, int k, Rng& rng,
                  double gain, bool bias) {
  Conv c;
  c.in = in;
  c.out = out;
  c.k = k;
  const double stddev = gain / std::sqrt(static_cast<double>(in * k * k));
  c.w = &store.add(name + ".w", randn({out, in, k, k}, stddev, rng));
  if (bias) c.b = &store.add(name + ".b", Tensor({out}));
  return c;
}

void Conv::set_identity(int offset) {
  w->value.fill(0.0);
  if (b) b->value.fill(0.0);
  for (int o = 0; o < out; ++o) {
    const int i = o + offset;
    if (i < 0 || i >= in) continue;
    w->value[((static_cast<std::size_t>(o) * in + i) * k + k / 2) * k + k / 2] = 1.0;
  }
}

void Conv::zero() {
  w->value.fill(0.0);
  if (b) b->value.fill(0.0);
}

Var Conv::forward(Context& ctx, const Var& x) const {
  return ops::conv2d(x, ctx.param(*w), b ? ctx.param(*b) : Var());
}

ConvBlock ConvBlock::create(ParamStore& store, const std::string& name, int channels, Rng& rng) {
  ConvBlock blk;
  blk.c1 = Conv::create(store, name + ".c1", channels, channels, 3, rng);
  blk.c2 = Conv::create(store, name + ".c2", channels, channels, 3, rng, 0.1);
  return blk;
}

Var ConvBlock::forward(Context& ctx, const Var& x) const {
  return ops::add(x, c2.forward(ctx, ops::gelu(c1.forward(ctx, x))));
}

}  // namespace asmamba
