#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "asmamba/checkpoint.hpp"
#include "asmamba/config.hpp"
#include "asmamba/dataset.hpp"
#include "asmamba/model.hpp"

namespace asmamba::train {

/// Adam with bias correction.
class Adam {
 public:
  Adam() = default;
  Adam(const ParamStore& store, double lr, double beta1, double beta2, double eps);
  /// lr_scale multiplies the base learning rate for this step.
  void step(ParamStore& store, const Gradients& grads, double lr_scale = 1.0);

  std::int64_t t = 0;
  std::vector<Tensor> m, v;

 private:
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
};

struct StepStats {
  std::int64_t step = 0;
  int epoch = 0;
  double loss = 0.0, l_r = 0.0, l_s = 0.0;
  std::vector<int> batch;  // sample indices
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0, l_r = 0.0, l_s = 0.0;  // means over the epoch's steps
  double holdout_psnr = 0.0;               // NaN without a holdout split
};

/// Rotation by k * 90 degrees followed by an optional transpose, applied
/// identically to every image of the pair.
ct::ArtifactPair augment(const ct::ArtifactPair& p, int quarter_turns, bool transpose);

/// Model output for one sample as an (H, W) image.
Tensor predict(const model::Model& m, const ct::ArtifactPair& p);

/// Mean masked PSNR of the model over a dataset.
double mean_psnr(const model::Model& m, const data::Dataset& d);

class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);
  /// Restores model weights, optimizer state and progress.
  static std::unique_ptr<Trainer> from_checkpoint(const Checkpoint& c);

  /// One optimizer step on the batch scheduled for step_ of `train`.
  /// Throws std::runtime_error naming the batch on a non-finite loss or any
  /// failure inside a sample's forward/backward pass.
  StepStats step(const data::Dataset& train);

  /// Runs until `max_steps` total steps (0: the configured schedule). The
  /// callbacks fire after every step and after each completed epoch.
  std::vector<EpochLog> run(const data::Dataset& train, const data::Dataset& holdout, std::int64_t max_steps = 0,
                            const std::function<void(const StepStats&)>& on_step = {},
                            const std::function<void(const EpochLog&)>& on_epoch = {});

  Checkpoint checkpoint() const;
  std::int64_t steps_done() const { return step_; }
  int steps_per_epoch(std::size_t n_train) const;
  std::int64_t scheduled_steps(std::size_t n_train) const;
  /// Learning-rate multiplier at `step` of a run of `total` steps.
  double lr_scale(std::int64_t step, std::int64_t total) const;
  const TrainConfig& config() const { return cfg_; }
  model::Model& model() { return *model_; }
  const model::Model& model() const { return *model_; }

 private:
  TrainConfig cfg_;
  std::unique_ptr<model::Model> model_;
  loss::FeatureExtractor phi_;
  Adam adam_;
  std::int64_t step_ = 0;
  std::int64_t total_steps_ = 0;  // run length used by the schedule
  int epoch_ = 0;
  std::vector<StepStats> epoch_steps_;
};

}  // namespace asmamba::train
