#include "asmamba/unroll.hpp"

#include <cmath>
#include <stdexcept>

#include "asmamba/ops.hpp"
#include "asmamba/wavelet.hpp"

namespace asmamba::unroll {

namespace {

Var scalar_const(double v) { return constant(Tensor::scalar(v)); }

// softplus^-1(1)
const double kUnitSoftplusRaw = std::log(std::exp(1.0) - 1.0);

}  // namespace

LearnableSteps LearnableSteps::create(ParamStore& store, const std::string& prefix) {
  LearnableSteps s;
  s.tau1 = &store.add(prefix + ".tau1", Tensor::scalar(0.0));
  s.tau2 = &store.add(prefix + ".tau2", Tensor::scalar(0.0));
  s.tau3 = &store.add(prefix + ".tau3", Tensor::scalar(0.0));
  s.gamma = &store.add(prefix + ".gamma", Tensor::scalar(kUnitSoftplusRaw));
  s.delta = &store.add(prefix + ".delta", Tensor::scalar(kUnitSoftplusRaw));
  return s;
}

StepVars resolve(Context& ctx, const LearnableSteps& s) {
  return {ops::sigmoid(ctx.param(*s.tau1)), ops::sigmoid(ctx.param(*s.tau2)), ops::sigmoid(ctx.param(*s.tau3)),
          ops::softplus(ctx.param(*s.gamma)), ops::softplus(ctx.param(*s.delta))};
}

StepVars resolve(const FixedSteps& s) {
  return {scalar_const(s.tau1), scalar_const(s.tau2), scalar_const(s.tau3), scalar_const(s.gamma),
          scalar_const(s.delta)};
}

Prox Prox::create(ParamStore& store, const std::string& prefix, int channels, int blocks, int features,
                  const ssm::MambaBlockOptions& opts, Rng& rng) {
  Prox p;
  p.lifted_ = channels < 2;
  const int width = p.lifted_ ? features : channels;
  if (p.lifted_) {
    p.lift_in_ = Conv::create(store, prefix + ".lift_in", channels, features, 3, rng);
    p.lift_out_ = Conv::create(store, prefix + ".lift_out", features, channels, 3, rng, 0.1);
  }
  for (int b = 0; b < blocks; ++b) {
    p.blocks_.push_back(ssm::MambaBlock::create(store, prefix + ".mb" + std::to_string(b), width, opts, rng));
  }
  return p;
}

Var Prox::forward(Context& ctx, const Var& x) const {
  Var f = lifted_ ? lift_in_.forward(ctx, x) : x;
  for (const auto& b : blocks_) f = b.forward(ctx, f);
  return lifted_ ? ops::add(x, lift_out_.forward(ctx, f)) : f;
}

void Prox::make_identity() {
  for (auto& b : blocks_) {
    b.alpha->value.fill(0.0);
    b.beta->value.fill(0.0);
  }
  if (lifted_) lift_out_.zero();
}

Var init_reconstruction(const Var& x_ll_hat, const Var& x_hf_hat) {
  if (x_hf_hat.channels() != 3 * x_ll_hat.channels() || x_hf_hat.height() != x_ll_hat.height() ||
      x_hf_hat.width() != x_ll_hat.width()) {
    throw std::invalid_argument("init_reconstruction: band shapes " + x_ll_hat.value().shape_string() + " and " +
                                x_hf_hat.value().shape_string() + " are inconsistent");
  }
  return wavelet::idwt2(ops::concat_channels({x_ll_hat, x_hf_hat}));
}

Var masked_observation(const Var& y, const Tensor& mask_i, const Var& u_prev) {
  Tensor outside(mask_i.shape());
  for (std::size_t i = 0; i < outside.size(); ++i) outside[i] = 1.0 - mask_i[i];
  return ops::add(ops::mul_const(y, mask_i), ops::mul_const(u_prev, outside));
}

Var transform(Domain d, const Var& x) { return d == Domain::Wavelet ? wavelet::dwt2(x) : x; }

Var inverse(Domain d, const Var& x) { return d == Domain::Wavelet ? wavelet::idwt2(x) : x; }

Var artifact_step(Domain d, const Var& a_prev, const Var& y, const Var& x_prev, const Var& tau1) {
  return ops::axpby(ops::affine(tau1, -2.0, 1.0), a_prev, ops::scale(tau1, 2.0), transform(d, ops::sub(y, x_prev)));
}

Var image_step(Domain d, const Var& x_prev, const Var& y, const Var& a_k, const Var& u_prev, const StepVars& s) {
  const Var weight = ops::add(s.gamma, s.delta);
  if (weight.value()[0] < 1e-8) throw std::domain_error("image_step: gamma + delta must exceed 1e-8");
  const Var phi = ops::axpby(s.gamma, transform(d, ops::sub(y, inverse(d, a_k))), s.delta, transform(d, u_prev));
  return ops::axpby(ops::affine(s.tau2, -2.0, 1.0), x_prev, ops::div(ops::scale(s.tau2, 2.0), weight), phi);
}

Var u_update(Domain d, const Var& u_prev, const Var& x_k, const Var& tau3) {
  return ops::axpby(ops::affine(tau3, -2.0, 1.0), u_prev, ops::scale(tau3, 2.0), inverse(d, x_k));
}

Var artifact_update(Context& ctx, Domain d, const StageState& state, const Var& y, const Var& x_prev,
                    const Var& tau1, const Prox& wm_a) {
  return wm_a.forward(ctx, artifact_step(d, state.a_w, y, x_prev, tau1));
}

Var image_update(Context& ctx, Domain d, const StageState& state, const Var& y, const Var& a_k,
                 const StepVars& s, const Prox& wm_x) {
  return wm_x.forward(ctx, image_step(d, state.x_w, y, a_k, state.u, s));
}

Manet Manet::create(ParamStore& store, const std::string& prefix, int image_channels, const ManetOptions& opts,
                    Rng& rng) {
  if (opts.stages < 1) throw std::invalid_argument("Manet: at least one stage is required");
  Manet m;
  m.domain_ = opts.domain;
  const int channels = opts.domain == Domain::Wavelet ? 4 * image_channels : image_channels;
  for (int k = 0; k < opts.stages; ++k) {
    const std::string name = prefix + ".stage" + std::to_string(k);
    m.steps_.push_back(LearnableSteps::create(store, name));
    m.wm_a_.push_back(
        Prox::create(store, name + ".wm_a", channels, opts.prox_blocks, opts.lift_features, opts.mamba, rng));
    m.wm_x_.push_back(
        Prox::create(store, name + ".wm_x", channels, opts.prox_blocks, opts.lift_features, opts.mamba, rng));
  }
  return m;
}

ManetResult Manet::run(Context& ctx, const Var& y, const Tensor& mask_i, const Var& u0) const {
  y.value().check_same(u0.value(), "Manet::run");
  y.value().check_same(mask_i, "Manet::run mask");
  ManetResult out;
  out.u0 = u0;
  StageState state;
  state.x_w = transform(domain_, u0);
  state.a_w = constant(Tensor(state.x_w.shape()));
  state.u = u0;
  out.states.push_back(state);
  for (int k = 0; k < stages(); ++k) {
    const auto i = static_cast<std::size_t>(k);
    const StepVars s = fixed_ ? resolve(*fixed_) : resolve(ctx, steps_[i]);
    const Var y_m = masked_observation(y, mask_i, state.u);
    const Var x_prev = inverse(domain_, state.x_w);
    StageState next;
    next.k = k + 1;
    next.a_w = artifact_update(ctx, domain_, state, y_m, x_prev, s.tau1, wm_a_[i]);
    next.x_w = image_update(ctx, domain_, state, y_m, next.a_w, s, wm_x_[i]);
    next.u = u_update(domain_, state.u, next.x_w, s.tau3);
    state = next;
    out.states.push_back(state);
  }
  out.u_final = state.u;
  return out;
}

}  // namespace asmamba::unroll
