#include "asmamba/freq_nets.hpp"

#include <cmath>
#include <stdexcept>

#include "asmamba/ops.hpp"
#include "asmamba/spectral.hpp"
#include "asmamba/wavelet.hpp"

namespace asmamba::freq {

void UNetTopology::validate() const {
  if (blocks_per_layer.size() % 2 == 0) {
    throw std::invalid_argument("UNetTopology: blocks_per_layer needs 2*depth+1 entries");
  }
  for (int b : blocks_per_layer) {
    if (b < 1) throw std::invalid_argument("UNetTopology: block counts must be positive");
  }
  if (base_channels < 1) throw std::invalid_argument("UNetTopology: base_channels must be positive");
}

Block Block::create(ParamStore& store, const std::string& name, int channels,
                    const UNetOptions& opts, Rng& rng) {
  Block b;
  b.kind = opts.block;
  if (b.kind == BlockKind::Mamba) {
    b.mamba = ssm::MambaBlock::create(store, name, channels, opts.mamba, rng);
  } else {
    b.conv = ConvBlock::create(store, name, channels, rng);
  }
  return b;
}

Var Block::forward(Context& ctx, const Var& x) const {
  return kind == BlockKind::Mamba ? mamba.forward(ctx, x) : conv.forward(ctx, x);
}

void Block::make_identity() {
  if (kind == BlockKind::Mamba) {
    mamba.alpha->value.fill(0.0);
    mamba.beta->value.fill(0.0);
  } else {
    conv.c2.zero();
  }
}

UNet UNet::create(ParamStore& store, const std::string& prefix, int in_channels, int out_channels,
                  const UNetTopology& topo, const UNetOptions& opts, Rng& rng) {
  topo.validate();
  UNet u;
  u.depth_ = topo.depth();
  u.in_ = in_channels;
  u.out_ = out_channels;
  u.down_kind_ = opts.down;
  const int n = u.depth_;
  auto width = [&](int level) { return topo.base_channels << level; };
  const auto& counts = topo.blocks_per_layer;

  u.conv_in_ = Conv::create(store, prefix + ".conv_in", in_channels, width(0), 3, rng);
  for (int i = 0; i < n; ++i) {
    std::vector<Block> blocks;
    for (int b = 0; b < counts[static_cast<std::size_t>(i)]; ++b) {
      blocks.push_back(Block::create(store, prefix + ".enc" + std::to_string(i) + "." + std::to_string(b),
                                     width(i), opts, rng));
    }
    u.encoder_.push_back(std::move(blocks));
    const int mix_in = opts.down == DownKind::Haar ? 4 * width(i) : width(i);
    u.down_.push_back({Conv::create(store, prefix + ".down" + std::to_string(i), mix_in, width(i + 1), 1, rng)});
  }
  for (int b = 0; b < counts[static_cast<std::size_t>(n)]; ++b) {
    u.bottleneck_.push_back(
        Block::create(store, prefix + ".mid." + std::to_string(b), width(n), opts, rng));
  }
  u.decoder_.resize(static_cast<std::size_t>(n));
  for (int i = n - 1; i >= 0; --i) {
    DecoderLevel lvl;
    const std::string name = prefix + ".dec" + std::to_string(i);
    lvl.fuse = Conv::create(store, name + ".fuse", width(i + 1) + width(i), width(i), 1, rng);
    const int count = counts[static_cast<std::size_t>(n + 1 + (n - 1 - i))];
    for (int b = 0; b < count; ++b) {
      lvl.blocks.push_back(Block::create(store, name + "." + std::to_string(b), width(i), opts, rng));
    }
    u.decoder_[static_cast<std::size_t>(i)] = std::move(lvl);
  }
  u.conv_out_ = Conv::create(store, prefix + ".conv_out", width(0), out_channels, 3, rng, 0.1);
  return u;
}

Var UNet::forward(Context& ctx, const Var& x) const {
  const int factor = 1 << depth_;
  if (x.height() % factor != 0 || x.width() % factor != 0) {
    throw std::invalid_argument("UNet: spatial size must be divisible by " + std::to_string(factor));
  }
  if (x.channels() != in_) throw std::invalid_argument("UNet: input channel mismatch");

  std::vector<Var> skips;
  Var f = conv_in_.forward(ctx, x);
  for (int i = 0; i < depth_; ++i) {
    skips.push_back(f);
    for (const Block& b : encoder_[static_cast<std::size_t>(i)]) f = b.forward(ctx, f);
    const Conv& mix = down_[static_cast<std::size_t>(i)].mix;
    if (down_kind_ == DownKind::Haar) {
      f = wavelet::hwd(f, ctx.param(*mix.w), ctx.param(*mix.b));
    } else {
      f = mix.forward(ctx, ops::avg_pool2(f));
    }
  }
  for (const Block& b : bottleneck_) f = b.forward(ctx, f);
  for (int i = depth_ - 1; i >= 0; --i) {
    const DecoderLevel& lvl = decoder_[static_cast<std::size_t>(i)];
    f = lvl.fuse.forward(ctx, ops::concat_channels({ops::upsample2x(f), skips[static_cast<std::size_t>(i)]}));
    for (const Block& b : lvl.blocks) f = b.forward(ctx, f);
  }
  return conv_out_.forward(ctx, f);
}

void UNet::make_blocks_identity() {
  for (auto& level : encoder_) {
    for (auto& b : level) b.make_identity();
  }
  for (auto& b : bottleneck_) b.make_identity();
  for (auto& lvl : decoder_) {
    for (auto& b : lvl.blocks) b.make_identity();
  }
}

Enhancement Enhancement::create(ParamStore& store, const std::string& name, int channels, Rng& rng) {
  Enhancement e;
  e.c1 = Conv::create(store, name + ".c1", channels, channels, 3, rng);
  e.c2 = Conv::create(store, name + ".c2", channels, channels, 3, rng);
  e.c2.zero();
  return e;
}

Var Enhancement::forward(Context& ctx, const Var& amp, double scale) const {
  const Var h = ops::relu(c1.forward(ctx, ops::scale(amp, 1.0 / scale)));
  return ops::scale(c2.forward(ctx, h), scale);
}

Var den_stage(Context& ctx, const Enhancement& g, const Var& x) {
  const Var z = spectral::rfft2(x);
  const Var amp = spectral::magnitude(z);
  const Var unit = spectral::phasor(z);
  const double scale = std::sqrt(static_cast<double>(x.height()) * x.width());
  const Var amp_hat = ops::relu(ops::add(amp, g.forward(ctx, amp, scale)));
  return spectral::irfft2(spectral::polar_mul(amp_hat, unit), x.width());
}

Den Den::create(ParamStore& store, const std::string& prefix, int in_channels, int out_channels,
                int features, Rng& rng) {
  Den d;
  d.features_ = features;
  d.conv_in_ = Conv::create(store, prefix + ".conv_in", in_channels, features, 3, rng);
  for (int s = 0; s < 3; ++s) {
    const std::string name = prefix + ".stage" + std::to_string(s);
    d.stages_.push_back(Enhancement::create(store, name + ".g", features, rng));
    d.groups_.push_back(ConvBlock::create(store, name + ".group", features, rng));
  }
  d.fuse_ = Conv::create(store, prefix + ".fuse", 3 * features, features, 1, rng);
  d.fuse_.set_identity(2 * features);
  d.conv_out_ = Conv::create(store, prefix + ".conv_out", features, out_channels, 3, rng, 0.1);
  return d;
}

Var Den::forward(Context& ctx, const Var& x) const {
  Var f = conv_in_.forward(ctx, x);
  std::vector<Var> outputs;
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    f = groups_[s].forward(ctx, den_stage(ctx, stages_[s], f));
    outputs.push_back(f);
  }
  return conv_out_.forward(ctx, fuse_.forward(ctx, ops::concat_channels(outputs)));
}

void Den::make_identity() {
  conv_in_.set_identity();
  conv_out_.set_identity();
  for (auto& s : stages_) s.c2.zero();
  for (auto& g : groups_) g.c2.zero();
  fuse_.set_identity(2 * features_);
}

ConvBranch ConvBranch::create(ParamStore& store, const std::string& prefix, int in_channels,
                              int out_channels, int features, Rng& rng) {
  ConvBranch c;
  c.conv_in_ = Conv::create(store, prefix + ".conv_in", in_channels, features, 3, rng);
  for (int i = 0; i < 3; ++i) {
    c.blocks_.push_back(ConvBlock::create(store, prefix + ".block" + std::to_string(i), features, rng));
  }
  c.conv_out_ = Conv::create(store, prefix + ".conv_out", features, out_channels, 3, rng, 0.1);
  return c;
}

Var ConvBranch::forward(Context& ctx, const Var& x) const {
  Var f = conv_in_.forward(ctx, x);
  for (const auto& b : blocks_) f = b.forward(ctx, f);
  return conv_out_.forward(ctx, f);
}

}  // namespace asmamba::freq
