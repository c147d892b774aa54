#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asmamba/losses.hpp"
#include "asmamba/model.hpp"

namespace asmamba {

/// Training and model configuration. Defaults are the full-scale setting;
/// desk_config() gives the small CPU setting used by the tools and tests.
struct TrainConfig {
  int epochs = 200;
  int batch_size = 16;
  double learning_rate = 5e-5;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int max_steps = 0;  // 0: epochs * ceil(train samples / batch_size)
  std::string lr_schedule = "constant";  // constant | cosine (decays to 0 over the run)

  std::vector<int> blocks_per_layer{1, 1, 2, 2, 4, 4, 2, 2, 1};
  int base_channels = 16;
  int stages_T = 2;
  int den_features = 8;
  int prox_blocks = 2;
  int lift_features = 4;
  int state_dim = 8;
  bool four_directions = false;
  double prox_residual_init = 0.01;
  std::string variant = "FULL";

  double lambda_g = 0.1;
  double mu_start = 0.0;
  double mu_end = 0.5;
  double sgcr_eps = 1e-7;
  std::string contrast = "sgcr";      // none | cr | sgcr | cr+sgcr
  bool detach_negative = false;       // stop gradients through U0 in the contrastive term
  std::string extractor = "random";   // random | identity
  std::uint64_t extractor_seed = 1;

  int image_size = 416;
  int n_angles = 180;
  int train_samples = 1000;
  int holdout_samples = 0;
  std::uint64_t seed = 0;
  bool augment_rotate = true;
  bool augment_transpose = true;

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
  model::Variant model_variant() const { return model::parse_variant(variant); }
  model::ModelConfig model_config() const;
  loss::ContrastMode contrast_mode() const;
  loss::FeatureExtractor feature_extractor() const;
  loss::CurriculumSchedule curriculum() const;
};

TrainConfig desk_config();

/// Applies `key = value` lines ('#' starts a comment). Unknown keys and
/// malformed values throw std::invalid_argument with the line number.
void apply_config_text(TrainConfig& cfg, const std::string& text);
TrainConfig load_config(const std::string& path, TrainConfig base = desk_config());
/// Sets one key; the same parser as the file format.
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
/// Canonical key = value text; apply_config_text(to_text(c)) reproduces c.
std::string to_text(const TrainConfig& cfg);
std::string to_json(const TrainConfig& cfg);
TrainConfig from_json(const std::string& json);

loss::ContrastMode parse_contrast(const std::string& name);
std::string to_string(loss::ContrastMode m);

}  // namespace asmamba
