#pragma once

#include <string>
#include <vector>

#include "asmamba/layers.hpp"
#include "asmamba/ssm.hpp"

namespace asmamba::freq {

/// Blocks per U-Net level: encoder stages, bottleneck, decoder stages.
struct UNetTopology {
  std::vector<int> blocks_per_layer{1, 1, 2, 2, 4, 4, 2, 2, 1};
  int base_channels = 16;

  int depth() const { return static_cast<int>(blocks_per_layer.size()) / 2; }
  /// Throws std::invalid_argument for an even-length list, non-positive
  /// counts or a non-positive width.
  void validate() const;
};

enum class BlockKind { Mamba, Conv };
enum class DownKind { Haar, AvgPool };

struct UNetOptions {
  BlockKind block = BlockKind::Mamba;
  DownKind down = DownKind::Haar;
  ssm::MambaBlockOptions mamba{};
};

/// Either a MambaBlock or a plain residual convolution block.
struct Block {
  BlockKind kind = BlockKind::Mamba;
  ssm::MambaBlock mamba;
  ConvBlock conv;

  static Block create(ParamStore& store, const std::string& name, int channels,
                      const UNetOptions& opts, Rng& rng);
  Var forward(Context& ctx, const Var& x) const;
  /// Sets residual gains to zero (Mamba) or zeroes the second conv (Conv).
  void make_identity();
};

/// Encoder-decoder over blocks with wavelet (or pooled) downsampling,
/// bilinear upsampling and concatenating skip connections. Channel widths
/// double per encoder stage from base_channels.
class UNet {
 public:
  static UNet create(ParamStore& store, const std::string& prefix, int in_channels,
                     int out_channels, const UNetTopology& topo, const UNetOptions& opts, Rng& rng);

  /// Throws std::invalid_argument unless H and W are divisible by 2^depth.
  Var forward(Context& ctx, const Var& x) const;

  int depth() const { return depth_; }
  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  /// All blocks become identities; convolutions are left untouched.
  void make_blocks_identity();
  /// Zeroes the output convolution, so the network starts as the zero map.
  void zero_output() { conv_out_.zero(); }

 private:
  struct Down {
    Conv mix;  // 1x1: 4c -> 2c (Haar) or c -> 2c (AvgPool)
  };
  struct DecoderLevel {
    Conv fuse;  // 1x1: c_{i+1} + c_i -> c_i
    std::vector<Block> blocks;
  };

  int depth_ = 0, in_ = 0, out_ = 0;
  DownKind down_kind_ = DownKind::Haar;
  Conv conv_in_, conv_out_;
  std::vector<std::vector<Block>> encoder_;
  std::vector<Down> down_;
  std::vector<Block> bottleneck_;
  std::vector<DecoderLevel> decoder_;  // index i = level i
};

/// High-frequency restoration network: a Mamba U-Net over the stacked detail
/// bands.
using Hfrn = UNet;

/// Learnable amplitude residual g(A) = s * conv2(relu(conv1(A / s))) with
/// s = sqrt(H * W) of the spatial grid.
struct Enhancement {
  Conv c1, c2;
  static Enhancement create(ParamStore& store, const std::string& name, int channels, Rng& rng);
  Var forward(Context& ctx, const Var& amp, double scale) const;
};

/// One amplitude-correction stage: A_hat = relu(A + g(A)) recombined with the
/// input's phase and inverted.
Var den_stage(Context& ctx, const Enhancement& g, const Var& x);

/// Low-frequency branch: conv_in, three (den_stage -> ConvBlock) units, a
/// 1x1 fusion over the concatenated unit outputs and conv_out.
class Den {
 public:
  static Den create(ParamStore& store, const std::string& prefix, int in_channels,
                    int out_channels, int features, Rng& rng);
  Var forward(Context& ctx, const Var& x) const;

  /// g == 0 in every stage, identity groups, fusion selecting the last unit.
  /// conv_in/conv_out become channel selections.
  void make_identity();
  void zero_output() { conv_out_.zero(); }
  const Enhancement& stage(int i) const { return stages_.at(static_cast<std::size_t>(i)); }
  Enhancement& stage(int i) { return stages_.at(static_cast<std::size_t>(i)); }

 private:
  int features_ = 0;
  Conv conv_in_, fuse_, conv_out_;
  std::vector<Enhancement> stages_;
  std::vector<ConvBlock> groups_;
};

/// Plain convolutional substitute for the DEN.
class ConvBranch {
 public:
  static ConvBranch create(ParamStore& store, const std::string& prefix, int in_channels,
                           int out_channels, int features, Rng& rng);
  Var forward(Context& ctx, const Var& x) const;
  void zero_output() { conv_out_.zero(); }

 private:
  Conv conv_in_, conv_out_;
  std::vector<ConvBlock> blocks_;
};

}  // namespace asmamba::freq
