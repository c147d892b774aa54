#include "asmamba/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "asmamba/metrics.hpp"
#include "asmamba/parallel.hpp"

namespace asmamba::train {

namespace {

Tensor chw(const Tensor& x) { return x.rank() == 2 ? x.reshaped({1, x.height(), x.width()}) : x; }

Tensor rotate_transpose(const Tensor& x, int quarter_turns, bool transpose) {
  if (x.empty()) return x;
  const Tensor in = x.rank() == 3 ? x.reshaped({x.height(), x.width()}) : x;
  if (in.height() != in.width()) throw std::invalid_argument("augment: images must be square");
  const int n = in.height();
  Tensor out({n, n});
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      int sr = r, sc = c;
      if (transpose) std::swap(sr, sc);
      // Rotate the sampling position back by the requested turns (counter-clockwise output).
      for (int k = 0; k < ((quarter_turns % 4) + 4) % 4; ++k) {
        const int tr = sc, tc = n - 1 - sr;
        sr = tr;
        sc = tc;
      }
      out.at(r, c) = in.at(sr, sc);
    }
  }
  return x.rank() == 3 ? out.reshaped(x.shape()) : out;
}

bool finite(const Tensor& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](double v) { return std::isfinite(v); });
}

std::string batch_label(const StepStats& st, std::size_t k) {
  std::string ids;
  for (int id : st.batch) ids += (ids.empty() ? "" : ",") + std::to_string(id);
  return "step " + std::to_string(st.step) + ", batch [" + ids + "], sample " + std::to_string(st.batch[k]);
}

constexpr std::uint64_t kShuffleStream = 0x5A0000;
constexpr std::uint64_t kAugmentStream = 0xA60000;

}  // namespace

Adam::Adam(const ParamStore& store, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : store) {
    m.emplace_back(p.value.shape());
    v.emplace_back(p.value.shape());
  }
}

void Adam::step(ParamStore& store, const Gradients& grads, double lr_scale) {
  if (grads.size() != store.size() || m.size() != store.size()) {
    throw std::invalid_argument("Adam::step: gradient count does not match the store");
  }
  ++t;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t));
  for (std::size_t i = 0; i < store.size(); ++i) {
    Tensor& w = store[i].value;
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[i][k] = beta1_ * m[i][k] + (1.0 - beta1_) * g[k];
      v[i][k] = beta2_ * v[i][k] + (1.0 - beta2_) * g[k] * g[k];
      w[k] -= lr_scale * lr_ * (m[i][k] / c1) / (std::sqrt(v[i][k] / c2) + eps_);
    }
  }
}

ct::ArtifactPair augment(const ct::ArtifactPair& p, int quarter_turns, bool transpose) {
  return {rotate_transpose(p.x_m, quarter_turns, transpose), rotate_transpose(p.x_gt, quarter_turns, transpose),
          rotate_transpose(p.x_l, quarter_turns, transpose), rotate_transpose(p.mask_i, quarter_turns, transpose)};
}

Tensor predict(const model::Model& m, const ct::ArtifactPair& p) {
  Context ctx;
  const Tensor out = m.forward(ctx, p.x_m, p.x_l, p.mask_i).u_final.value();
  return out.reshaped({out.height(), out.width()});
}

double mean_psnr(const model::Model& m, const data::Dataset& d) {
  if (d.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> v(d.size());
  parallel_for(d.size(), [&](std::size_t i) {
    const auto& p = d.samples[i].pair;
    v[i] = metrics::psnr(metrics::apply_mask(predict(m, p), p.mask_i), metrics::apply_mask(p.x_gt, p.mask_i));
  });
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Trainer::Trainer(const TrainConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  model_ = model::Model::create(cfg_.model_variant(), cfg_.model_config(), derive_seed(cfg_.seed, 0x30DE1));
  phi_ = cfg_.feature_extractor();
  adam_ = Adam(model_->params(), cfg_.learning_rate, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps);
}

std::unique_ptr<Trainer> Trainer::from_checkpoint(const Checkpoint& c) {
  auto t = std::make_unique<Trainer>(from_json(c.config_json));
  ParamStore& store = t->model_->params();
  if (c.weights.size() != store.size()) throw std::runtime_error("checkpoint does not match the model architecture");
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& [name, w] = c.weights[i];
    if (name != store[i].name || w.shape() != store[i].value.shape()) {
      throw std::runtime_error("checkpoint array '" + name + "' does not match parameter '" + store[i].name + "'");
    }
    store[i].value = w;
  }
  if (!c.adam_m.empty()) {
    t->adam_.m = c.adam_m;
    t->adam_.v = c.adam_v;
  }
  t->adam_.t = c.adam_t;
  t->step_ = c.step;
  t->epoch_ = static_cast<int>(c.epoch);
  return t;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config_json = to_json(cfg_);
  c.epoch = epoch_;
  c.step = step_;
  c.adam_t = adam_.t;
  c.adam_m = adam_.m;
  c.adam_v = adam_.v;
  for (const auto& p : model_->params()) c.weights.emplace_back(p.name, p.value);
  return c;
}

int Trainer::steps_per_epoch(std::size_t n_train) const {
  return static_cast<int>((n_train + static_cast<std::size_t>(cfg_.batch_size) - 1) /
                          static_cast<std::size_t>(cfg_.batch_size));
}

std::int64_t Trainer::scheduled_steps(std::size_t n_train) const {
  return cfg_.max_steps > 0 ? cfg_.max_steps : static_cast<std::int64_t>(cfg_.epochs) * steps_per_epoch(n_train);
}

StepStats Trainer::step(const data::Dataset& train) {
  if (train.size() == 0) throw std::invalid_argument("train: empty dataset");
  const int spe = steps_per_epoch(train.size());
  StepStats st;
  st.step = step_;
  st.epoch = static_cast<int>(step_ / spe);
  const auto pos = static_cast<std::size_t>(step_ % spe);

  std::vector<int> perm(train.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng shuffle(derive_seed(cfg_.seed, kShuffleStream + static_cast<std::uint64_t>(st.epoch)));
  std::shuffle(perm.begin(), perm.end(), shuffle);
  const auto b = static_cast<std::size_t>(cfg_.batch_size);
  for (std::size_t i = pos * b; i < std::min(train.size(), (pos + 1) * b); ++i) st.batch.push_back(perm[i]);

  loss::JointLossOptions lo;
  lo.lambda_g = cfg_.lambda_g;
  lo.mu = cfg_.curriculum().mu(st.epoch);
  lo.eps = cfg_.sgcr_eps;
  lo.mode = cfg_.contrast_mode();
  lo.detach_negative = cfg_.detach_negative;

  const std::size_t n = st.batch.size();
  std::vector<Gradients> grads(n);
  std::vector<loss::JointLoss> losses(n);
  parallel_for(n, [&](std::size_t k) {
    Rng aug(derive_seed(cfg_.seed, kAugmentStream + static_cast<std::uint64_t>(step_) * 4096 + k));
    const int turns = cfg_.augment_rotate ? std::uniform_int_distribution<int>(0, 3)(aug) : 0;
    const bool transpose = cfg_.augment_transpose && std::bernoulli_distribution(0.5)(aug);
    const auto p = augment(train.samples[static_cast<std::size_t>(st.batch[k])].pair, turns, transpose);
    if (p.x_gt.empty()) throw std::invalid_argument("train: sample without ground truth");
    try {
      Context ctx;
      const model::ModelOutput out = model_->forward(ctx, p.x_m, p.x_l, p.mask_i);
      losses[k] = loss::joint_loss(out.u_final, out.negative, chw(p.x_gt), chw(p.mask_i), lo, phi_);
      if (std::isfinite(losses[k].total.value()[0])) {
        backward(losses[k].total);
        grads[k] = zero_gradients(model_->params());
        ctx.collect(grads[k]);
      }
    } catch (const std::exception& e) {
      throw std::runtime_error(batch_label(st, k) + ": " + e.what());
    }
  });

  Gradients total = zero_gradients(model_->params());
  for (std::size_t k = 0; k < n; ++k) {
    const double v = losses[k].total.value()[0];
    bool ok = std::isfinite(v);
    for (std::size_t i = 0; ok && i < total.size(); ++i) ok = finite(grads[k][i]);
    if (!ok) throw std::runtime_error(batch_label(st, k) + ": non-finite loss or gradient");
    st.loss += v / static_cast<double>(n);
    st.l_r += losses[k].l_r / static_cast<double>(n);
    st.l_s += losses[k].l_s / static_cast<double>(n);
    for (std::size_t i = 0; i < total.size(); ++i) {
      for (std::size_t j = 0; j < total[i].size(); ++j) total[i][j] += grads[k][i][j] / static_cast<double>(n);
    }
  }
  const std::int64_t run_length = total_steps_ > 0 ? total_steps_ : scheduled_steps(train.size());
  adam_.step(model_->params(), total, lr_scale(step_, run_length));
  ++step_;
  epoch_ = st.epoch;
  return st;
}

double Trainer::lr_scale(std::int64_t step, std::int64_t total) const {
  if (cfg_.lr_schedule != "cosine" || total <= 0) return 1.0;
  const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
  return 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

std::vector<EpochLog> Trainer::run(const data::Dataset& train, const data::Dataset& holdout, std::int64_t max_steps,
                                   const std::function<void(const StepStats&)>& on_step,
                                   const std::function<void(const EpochLog&)>& on_epoch) {
  const std::int64_t total = max_steps > 0 ? max_steps : scheduled_steps(train.size());
  total_steps_ = total;
  const int spe = steps_per_epoch(train.size());
  std::vector<EpochLog> logs;
  while (step_ < total) {
    const StepStats st = step(train);
    if (on_step) on_step(st);
    epoch_steps_.push_back(st);
    if (step_ % spe == 0 || step_ == total) {
      EpochLog log;
      log.epoch = st.epoch;
      for (const auto& s : epoch_steps_) {
        log.loss += s.loss / static_cast<double>(epoch_steps_.size());
        log.l_r += s.l_r / static_cast<double>(epoch_steps_.size());
        log.l_s += s.l_s / static_cast<double>(epoch_steps_.size());
      }
      log.holdout_psnr = mean_psnr(*model_, holdout);
      epoch_steps_.clear();
      logs.push_back(log);
      if (on_epoch) on_epoch(log);
    }
  }
  return logs;
}

}  // namespace asmamba::train
