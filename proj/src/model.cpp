#include "asmamba/model.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "asmamba/ops.hpp"
#include "asmamba/wavelet.hpp"

namespace asmamba::model {

namespace {

Tensor as_chw(const Tensor& x) {
  if (x.rank() == 2) return x.reshaped({1, x.height(), x.width()});
  if (x.rank() == 3 && x.channels() == 1) return x;
  throw std::invalid_argument("Model: expected a single-channel image, got " + x.shape_string());
}

}  // namespace

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::Full,   Variant::FdrNet,   Variant::SdiNet,
                                      Variant::UwpNet, Variant::VariantA, Variant::VariantB};
  return v;
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "FULL";
    case Variant::FdrNet: return "FDR_NET";
    case Variant::SdiNet: return "SDI_NET";
    case Variant::UwpNet: return "UWP_NET";
    case Variant::VariantA: return "VARIANT_A";
    case Variant::VariantB: return "VARIANT_B";
  }
  throw std::invalid_argument("unknown variant");
}

Variant parse_variant(const std::string& name) {
  std::string key = name;
  for (char& c : key) c = c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (Variant v : all_variants()) {
    if (to_string(v) == key) return v;
  }
  throw std::invalid_argument("unknown variant '" + name + "'");
}

std::unique_ptr<Model> Model::create(Variant v, const ModelConfig& cfg, std::uint64_t seed) {
  cfg.topology.validate();
  if (cfg.stages < 1 || cfg.den_features < 1 || cfg.prox_blocks < 0 || cfg.state_dim < 1) {
    throw std::invalid_argument("Model: invalid configuration");
  }
  std::unique_ptr<Model> m(new Model());
  m->variant_ = v;
  m->cfg_ = cfg;
  Rng rng(seed);
  ParamStore& s = m->store_;

  freq::UNetOptions mamba_net;
  mamba_net.mamba.state_dim = cfg.state_dim;
  mamba_net.mamba.four_directions = cfg.four_directions;
  freq::UNetOptions conv_net;
  conv_net.block = freq::BlockKind::Conv;
  conv_net.down = freq::DownKind::AvgPool;

  switch (v) {
    case Variant::Full:
    case Variant::FdrNet:
      m->den_ = std::make_unique<freq::Den>(freq::Den::create(s, "den", 2, 1, cfg.den_features, rng));
      m->hf_net_ = std::make_unique<freq::UNet>(freq::UNet::create(s, "hfrn", 6, 3, cfg.topology, mamba_net, rng));
      break;
    case Variant::VariantA:
      m->conv_branch_ =
          std::make_unique<freq::ConvBranch>(freq::ConvBranch::create(s, "lf_conv", 2, 1, cfg.den_features, rng));
      m->hf_net_ = std::make_unique<freq::UNet>(freq::UNet::create(s, "hfrn", 6, 3, cfg.topology, mamba_net, rng));
      break;
    case Variant::VariantB:
      m->den_ = std::make_unique<freq::Den>(freq::Den::create(s, "den", 2, 1, cfg.den_features, rng));
      m->hf_net_ = std::make_unique<freq::UNet>(freq::UNet::create(s, "hf_conv", 6, 3, cfg.topology, conv_net, rng));
      break;
    case Variant::SdiNet:
      m->net_ = std::make_unique<freq::UNet>(freq::UNet::create(s, "sdi", 2, 1, cfg.topology, conv_net, rng));
      break;
    case Variant::UwpNet:
      m->net_ = std::make_unique<freq::UNet>(freq::UNet::create(s, "uwp", 8, 4, cfg.topology, mamba_net, rng));
      break;
  }
  // Residual branches start at zero so that U0 = x_m before training.
  if (m->den_) m->den_->zero_output();
  if (m->conv_branch_) m->conv_branch_->zero_output();
  if (m->hf_net_) m->hf_net_->zero_output();
  if (m->net_) m->net_->zero_output();
  if (v != Variant::FdrNet) {
    unroll::ManetOptions mo;
    mo.stages = cfg.stages;
    mo.prox_blocks = cfg.prox_blocks;
    mo.lift_features = cfg.lift_features;
    mo.domain = v == Variant::SdiNet ? unroll::Domain::Spatial : unroll::Domain::Wavelet;
    mo.mamba.state_dim = cfg.state_dim;
    mo.mamba.four_directions = cfg.four_directions;
    mo.mamba.residual_init = cfg.prox_residual_init;
    m->manet_ = std::make_unique<unroll::Manet>(unroll::Manet::create(s, "manet", 1, mo, rng));
  }
  return m;
}

int Model::pad_multiple() const { return 1 << (cfg_.topology.depth() + 1); }

Var Model::coarse(Context& ctx, const Var& x_m, const Var& x_l) const {
  const Var x_i = ops::concat_channels({x_m, x_l});
  if (variant_ == Variant::SdiNet) return ops::add(x_m, net_->forward(ctx, x_i));

  // Packed bands of the 2-channel input: [LL_m, LL_l, LH_m, LH_l, HL_m, HL_l, HH_m, HH_l].
  const Var bands = wavelet::dwt2(x_i);
  const Var own = wavelet::dwt2(x_m);
  if (variant_ == Variant::UwpNet) return wavelet::idwt2(ops::add(own, net_->forward(ctx, bands)));

  const Var ll = ops::slice_channels(bands, 0, 2);
  const Var hf = ops::slice_channels(bands, 2, 6);
  const Var ll_delta = den_ ? den_->forward(ctx, ll) : conv_branch_->forward(ctx, ll);
  const Var ll_hat = ops::add(ops::slice_channels(own, 0, 1), ll_delta);
  const Var hf_hat = ops::add(ops::slice_channels(own, 1, 3), hf_net_->forward(ctx, hf));
  return unroll::init_reconstruction(ll_hat, hf_hat);
}

ModelOutput Model::forward(Context& ctx, const Tensor& x_m, const Tensor& x_l, const Tensor& mask_i) const {
  const Tensor xm = as_chw(x_m), xl = as_chw(x_l), mask = as_chw(mask_i);
  xm.check_same(xl, "Model::forward x_l");
  xm.check_same(mask, "Model::forward mask_i");
  const int h = xm.height(), w = xm.width(), mult = pad_multiple();
  const bool padded = h % mult != 0 || w % mult != 0;
  const Var ym = constant(padded ? wavelet::pad_to_multiple(xm, mult) : xm);
  const Var yl = constant(padded ? wavelet::pad_to_multiple(xl, mult) : xl);
  const Tensor mp = padded ? wavelet::pad_to_multiple(mask, mult) : mask;

  const Var u0 = coarse(ctx, ym, yl);
  Var u_final = u0;
  if (manet_) u_final = manet_->run(ctx, ym, mp, u0).u_final;

  ModelOutput out;
  out.u0 = padded ? ops::crop(u0, 0, 0, h, w) : u0;
  out.u_final = padded ? ops::crop(u_final, 0, 0, h, w) : u_final;
  // Without iterative stages the coarse output is the anchor itself, so the
  // corrupted input serves as the negative.
  out.negative = manet_ ? out.u0 : constant(xm);
  return out;
}

}  // namespace asmamba::model
