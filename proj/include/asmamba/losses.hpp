#pragma once

#include <cstdint>
#include <vector>

#include "asmamba/autograd.hpp"

namespace asmamba::loss {

/// Frozen feature pyramid phi_i with per-layer weights w_i.
class FeatureExtractor {
 public:
  /// phi = raw pixels, one layer, w = 1.
  static FeatureExtractor identity();
  /// Three fixed-seed random conv+relu layers with 2x average pooling between
  /// them, weights {1/4, 1/2, 1}. Needs H and W divisible by 4.
  static FeatureExtractor random_conv(std::uint64_t seed, int in_channels = 1);

  std::vector<Var> features(const Var& x) const;
  const std::vector<double>& weights() const { return weights_; }
  int layers() const { return static_cast<int>(weights_.size()); }

 private:
  struct Layer {
    Tensor w, b;
  };
  bool identity_ = true;
  std::vector<Layer> layers_;
  std::vector<double> weights_{1.0};
};

/// mu(epoch) = mu_start + (mu_end - mu_start) * epoch / total_epochs, clamped.
struct CurriculumSchedule {
  double mu_start = 0.0;
  double mu_end = 0.5;
  int total_epochs = 200;

  double mu(double epoch) const;
};

enum class ContrastMode { None, CR, SGCR, CRSGCR };

struct ContrastTerms {
  Var value;
  std::vector<double> d;  // per-layer anchor/positive distance
  std::vector<double> r;  // per-layer ratio
};

/// sum_i w_i [(1 - mu) R_i + (1 + mu) D_i] with D_i = L1(phi(anchor), phi(positive))
/// and R_i = D_i / (L1(phi(anchor), phi(negative)) + eps). Positive and negative
/// are treated as constants.
ContrastTerms sgcr_loss(const Var& anchor, const Tensor& positive, const Tensor& negative,
                        const FeatureExtractor& phi, double mu, double eps = 1e-7);
/// Same with a differentiable negative.
ContrastTerms sgcr_loss(const Var& anchor, const Tensor& positive, const Var& negative,
                        const FeatureExtractor& phi, double mu, double eps = 1e-7);
/// Ratio-only contrastive term sum_i w_i R_i on the same triplet.
ContrastTerms cr_loss(const Var& anchor, const Tensor& positive, const Tensor& negative,
                      const FeatureExtractor& phi, double eps = 1e-7);
ContrastTerms cr_loss(const Var& anchor, const Tensor& positive, const Var& negative,
                      const FeatureExtractor& phi, double eps = 1e-7);

struct JointLossOptions {
  double lambda_g = 0.1;
  double mu = 0.0;
  double eps = 1e-7;
  ContrastMode mode = ContrastMode::SGCR;
  bool detach_negative = false;  // stop gradients through U0 in the contrastive term
};

struct JointLoss {
  Var total;
  double l_r = 0.0;
  double l_s = 0.0;
};

/// L_r + lambda_g * L_S with L_r the masked mean L1 error and U0 as the
/// contrastive negative.
JointLoss joint_loss(const Var& u_final, const Var& u0, const Tensor& x_gt, const Tensor& mask_i,
                     const JointLossOptions& opts, const FeatureExtractor& phi);

}  // namespace asmamba::loss
