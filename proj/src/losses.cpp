#include "asmamba/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "asmamba/ops.hpp"
#include "asmamba/random.hpp"

namespace asmamba::loss {

FeatureExtractor FeatureExtractor::identity() { return FeatureExtractor{}; }

FeatureExtractor FeatureExtractor::random_conv(std::uint64_t seed, int in_channels) {
  FeatureExtractor f;
  f.identity_ = false;
  f.weights_ = {0.25, 0.5, 1.0};
  Rng rng(derive_seed(seed, 0x5eed));
  const int widths[] = {in_channels, 8, 16, 16};
  for (int l = 0; l < 3; ++l) {
    const int cin = widths[l], cout = widths[l + 1];
    const double std = std::sqrt(2.0 / (cin * 9));
    f.layers_.push_back({randn({cout, cin, 3, 3}, std, rng), Tensor({cout})});
  }
  return f;
}

std::vector<Var> FeatureExtractor::features(const Var& x) const {
  if (identity_) return {x};
  if (x.height() % 4 != 0 || x.width() % 4 != 0) {
    throw std::invalid_argument("FeatureExtractor: spatial size must be divisible by 4");
  }
  std::vector<Var> out;
  Var f = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (l > 0) f = ops::avg_pool2(f);
    f = ops::relu(ops::conv2d(f, constant(layers_[l].w), constant(layers_[l].b)));
    out.push_back(f);
  }
  return out;
}

double CurriculumSchedule::mu(double epoch) const {
  if (total_epochs <= 0) return mu_end;
  const double m = mu_start + (mu_end - mu_start) * epoch / total_epochs;
  return std::clamp(m, std::min(mu_start, mu_end), std::max(mu_start, mu_end));
}

namespace {

struct LayerTerms {
  Var d;
  Var r;
  double d_value = 0.0, r_value = 0.0;
};

std::vector<LayerTerms> layer_terms(const Var& anchor, const Tensor& positive, const Var& negative,
                                    const FeatureExtractor& phi, double eps) {
  anchor.value().check_same(positive, "contrastive loss positive");
  anchor.value().check_same(negative.value(), "contrastive loss negative");
  if (eps < 0.0) throw std::invalid_argument("contrastive loss: eps must be non-negative");
  const auto fa = phi.features(anchor);
  const auto fp = phi.features(constant(positive));
  const auto fn = phi.features(negative);
  std::vector<LayerTerms> out;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    LayerTerms t;
    t.d = ops::mean_abs_diff(fa[i], fp[i]);
    const Var dn = ops::mean_abs_diff(fa[i], fn[i]);
    t.d_value = t.d.value()[0];
    if (t.d_value == 0.0) {
      t.r = ops::scale(t.d, 0.0);
    } else if (dn.value()[0] + eps > 0.0) {
      t.r = ops::div(t.d, ops::affine(dn, 1.0, eps));
    } else {
      throw std::domain_error("contrastive loss: anchor equals negative with eps = 0");
    }
    t.r_value = t.r.value()[0];
    out.push_back(t);
  }
  return out;
}

}  // namespace

ContrastTerms sgcr_loss(const Var& anchor, const Tensor& positive, const Tensor& negative,
                        const FeatureExtractor& phi, double mu, double eps) {
  return sgcr_loss(anchor, positive, constant(negative), phi, mu, eps);
}

ContrastTerms sgcr_loss(const Var& anchor, const Tensor& positive, const Var& negative,
                        const FeatureExtractor& phi, double mu, double eps) {
  if (mu < 0.0 || mu > 1.0) throw std::invalid_argument("sgcr_loss: mu must lie in [0, 1]");
  const auto terms = layer_terms(anchor, positive, negative, phi, eps);
  ContrastTerms out;
  Var total;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double w = phi.weights()[i];
    const Var li = ops::add(ops::scale(terms[i].r, w * (1.0 - mu)), ops::scale(terms[i].d, w * (1.0 + mu)));
    total = total ? ops::add(total, li) : li;
    out.d.push_back(terms[i].d_value);
    out.r.push_back(terms[i].r_value);
  }
  out.value = total;
  return out;
}

ContrastTerms cr_loss(const Var& anchor, const Tensor& positive, const Tensor& negative,
                      const FeatureExtractor& phi, double eps) {
  return cr_loss(anchor, positive, constant(negative), phi, eps);
}

ContrastTerms cr_loss(const Var& anchor, const Tensor& positive, const Var& negative,
                      const FeatureExtractor& phi, double eps) {
  const auto terms = layer_terms(anchor, positive, negative, phi, eps);
  ContrastTerms out;
  Var total;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const Var li = ops::scale(terms[i].r, phi.weights()[i]);
    total = total ? ops::add(total, li) : li;
    out.d.push_back(terms[i].d_value);
    out.r.push_back(terms[i].r_value);
  }
  out.value = total;
  return out;
}

JointLoss joint_loss(const Var& u_final, const Var& u0, const Tensor& x_gt, const Tensor& mask_i,
                     const JointLossOptions& opts, const FeatureExtractor& phi) {
  if (opts.lambda_g < 0.0) throw std::invalid_argument("joint_loss: lambda_g must be non-negative");
  JointLoss out;
  const Var l_r = ops::masked_mean_abs_diff(u_final, constant(x_gt), mask_i);
  out.l_r = l_r.value()[0];
  out.total = l_r;
  if (opts.mode == ContrastMode::None || opts.lambda_g == 0.0) return out;

  Var l_s;
  const Var negative = opts.detach_negative ? constant(u0.value()) : u0;
  if (opts.mode == ContrastMode::SGCR || opts.mode == ContrastMode::CRSGCR) {
    l_s = sgcr_loss(u_final, x_gt, negative, phi, opts.mu, opts.eps).value;
  }
  if (opts.mode == ContrastMode::CR || opts.mode == ContrastMode::CRSGCR) {
    const Var cr = cr_loss(u_final, x_gt, negative, phi, opts.eps).value;
    l_s = l_s ? ops::add(l_s, cr) : cr;
  }
  out.l_s = l_s.value()[0];
  out.total = ops::add(l_r, ops::scale(l_s, opts.lambda_g));
  return out;
}

}  // namespace asmamba::loss
