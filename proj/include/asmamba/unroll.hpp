#pragma once

#include <optional>
#include <string>
#include <vector>

#include "asmamba/layers.hpp"
#include "asmamba/ssm.hpp"

// Unrolled proximal-gradient refinement. Wavelet states are kept in the
// packed (4C, H/2, W/2) layout; in spatial mode the transform W is the
// identity and states are (C, H, W) images.
namespace asmamba::unroll {

enum class Domain { Wavelet, Spatial };

/// Raw parameters of one stage: tau_i = sigmoid(raw), gamma/delta = softplus(raw).
struct LearnableSteps {
  Parameter* tau1 = nullptr;
  Parameter* tau2 = nullptr;
  Parameter* tau3 = nullptr;
  Parameter* gamma = nullptr;
  Parameter* delta = nullptr;

  /// taus start at 0.5, gamma and delta at 1.
  static LearnableSteps create(ParamStore& store, const std::string& prefix);
};

/// Fixed step values, used to pin a stage to closed-form special cases.
struct FixedSteps {
  double tau1 = 0.5, tau2 = 0.5, tau3 = 0.5, gamma = 1.0, delta = 0.0;
};

/// Step values as graph nodes.
struct StepVars {
  Var tau1, tau2, tau3, gamma, delta;
};
StepVars resolve(Context& ctx, const LearnableSteps& s);
StepVars resolve(const FixedSteps& s);

/// Weights of the variational objective. The unrolled network never
/// evaluates them; they are absorbed into the learned proximal modules.
struct VariationalWeights {
  double mu = 0.0;
  double lambda1 = 0.0, lambda2 = 0.0, lambda3 = 0.0;
};

/// Learned proximal map. Multi-channel inputs go straight through a stack of
/// MambaBlocks; single-channel inputs are lifted to `features` channels and
/// added back as a residual through a small-gain output conv.
class Prox {
 public:
  static Prox create(ParamStore& store, const std::string& prefix, int channels, int blocks, int features,
                     const ssm::MambaBlockOptions& opts, Rng& rng);
  Var forward(Context& ctx, const Var& x) const;
  /// Makes the map exactly the identity.
  void make_identity();

 private:
  bool lifted_ = false;
  Conv lift_in_, lift_out_;
  std::vector<ssm::MambaBlock> blocks_;
};

struct StageState {
  Var a_w;  // artifact coefficients
  Var x_w;  // image coefficients
  Var u;    // spatial reconstruction
  int k = 0;
};

/// U0 = idwt2(LL_hat, HF_hat) with HF_hat ordered (LH, HL, HH).
Var init_reconstruction(const Var& x_ll_hat, const Var& x_hf_hat);

/// y restricted to the non-metal region, filled with u_prev elsewhere.
Var masked_observation(const Var& y, const Tensor& mask_i, const Var& u_prev);

Var transform(Domain d, const Var& x);
Var inverse(Domain d, const Var& x);

/// A_tilde = (1 - 2 tau1) A_prev + 2 tau1 W(y - x_prev).
Var artifact_step(Domain d, const Var& a_prev, const Var& y, const Var& x_prev, const Var& tau1);
/// Phi = gamma W(y - A) + delta W(u_prev) with A = W^-1(a_k);
/// X_tilde = (1 - 2 tau2) X_prev + (2 tau2 / (gamma + delta)) Phi.
Var image_step(Domain d, const Var& x_prev, const Var& y, const Var& a_k, const Var& u_prev, const StepVars& s);
/// U = (1 - 2 tau3) u_prev + 2 tau3 W^-1(x_k).
Var u_update(Domain d, const Var& u_prev, const Var& x_k, const Var& tau3);

/// One artifact update followed by the proximal map.
Var artifact_update(Context& ctx, Domain d, const StageState& state, const Var& y, const Var& x_prev,
                    const Var& tau1, const Prox& wm_a);
Var image_update(Context& ctx, Domain d, const StageState& state, const Var& y, const Var& a_k,
                 const StepVars& s, const Prox& wm_x);

struct ManetOptions {
  int stages = 2;
  int prox_blocks = 2;
  int lift_features = 4;
  Domain domain = Domain::Wavelet;
  ssm::MambaBlockOptions mamba{};
};

struct ManetResult {
  Var u_final;
  Var u0;
  std::vector<StageState> states;  // states[0] is the initialization
};

/// T stages of (artifact_update, image_update, u_update) with per-stage
/// steps and proximal maps. A_w starts at zero and X_w at W(u0).
class Manet {
 public:
  static Manet create(ParamStore& store, const std::string& prefix, int image_channels, const ManetOptions& opts,
                      Rng& rng);

  /// y: observed image (C, H, W); mask_i: non-metal mask of y's shape.
  ManetResult run(Context& ctx, const Var& y, const Tensor& mask_i, const Var& u0) const;

  int stages() const { return static_cast<int>(steps_.size()); }
  Domain domain() const { return domain_; }
  const LearnableSteps& steps(int k) const { return steps_.at(static_cast<std::size_t>(k)); }
  Prox& wm_a(int k) { return wm_a_.at(static_cast<std::size_t>(k)); }
  Prox& wm_x(int k) { return wm_x_.at(static_cast<std::size_t>(k)); }
  /// Pins every stage's steps to fixed values (nullopt restores learning).
  void fix_steps(std::optional<FixedSteps> s) { fixed_ = s; }

 private:
  Domain domain_ = Domain::Wavelet;
  std::vector<LearnableSteps> steps_;
  std::vector<Prox> wm_a_, wm_x_;
  std::optional<FixedSteps> fixed_;
};

}  // namespace asmamba::unroll
