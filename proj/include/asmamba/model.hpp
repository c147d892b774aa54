#pragma once

#include <memory>
#include <string>
#include <vector>

#include "asmamba/freq_nets.hpp"
#include "asmamba/unroll.hpp"

namespace asmamba::model {

enum class Variant { Full, FdrNet, SdiNet, UwpNet, VariantA, VariantB };

/// All variants in report order.
const std::vector<Variant>& all_variants();
std::string to_string(Variant v);
/// Accepts the names produced by to_string (case-insensitive, '-' or '_').
Variant parse_variant(const std::string& name);

struct ModelConfig {
  freq::UNetTopology topology{};
  int den_features = 8;
  int stages = 2;
  int prox_blocks = 2;
  int lift_features = 4;
  int state_dim = 8;
  bool four_directions = false;
  double prox_residual_init = 0.01;  // initial alpha/beta of the proximal MambaBlocks
};

struct ModelOutput {
  Var u_final;   // (1, H, W)
  Var u0;        // coarse reconstruction before the iterative stages
  Var negative;  // hard negative for the contrastive term
};

/// One restoration network. The input is X_i = concat(x_m, x_l); branch
/// outputs are residuals on the bands of x_m. Inputs whose sides are not
/// multiples of 2^(depth + 1) are reflection-padded and the outputs cropped.
class Model {
 public:
  static std::unique_ptr<Model> create(Variant v, const ModelConfig& cfg, std::uint64_t seed);

  /// x_m, x_l, mask_i: (H, W) or (1, H, W) with equal shapes.
  ModelOutput forward(Context& ctx, const Tensor& x_m, const Tensor& x_l, const Tensor& mask_i) const;

  Variant variant() const { return variant_; }
  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  std::size_t parameter_count() const { return store_.scalar_count(); }
  /// Number of per-stage step sets in the iterative part (0 for FDR_NET).
  int stage_count() const { return manet_ ? manet_->stages() : 0; }
  int pad_multiple() const;

 private:
  Model() = default;
  Var coarse(Context& ctx, const Var& x_m, const Var& x_l) const;

  Variant variant_ = Variant::Full;
  ModelConfig cfg_;
  ParamStore store_;
  std::unique_ptr<freq::Den> den_;
  std::unique_ptr<freq::ConvBranch> conv_branch_;
  std::unique_ptr<freq::UNet> hf_net_;   // HFRN or its conv substitute
  std::unique_ptr<freq::UNet> net_;      // SDI_NET spatial net or UWP_NET joint net
  std::unique_ptr<unroll::Manet> manet_;
};

}  // namespace asmamba::model
