#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "asmamba/checkpoint.hpp"
#include "asmamba/config.hpp"
#include "asmamba/dataset.hpp"
#include "asmamba/plot.hpp"
#include "asmamba/report.hpp"
#include "asmamba/train.hpp"

using namespace asmamba;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key = value config file (desk defaults otherwise)");
  cmd->add_option("--set", c.overrides, "override one config key, as key=value (repeatable)");
}

TrainConfig resolve_config(const Common& c) {
  TrainConfig cfg = c.config_path.empty() ? desk_config() : load_config(c.config_path);
  for (const std::string& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

std::pair<data::Dataset, data::Dataset> split(const data::Dataset& d, int holdout) {
  data::Dataset train = d, test = d;
  train.samples.clear();
  test.samples.clear();
  const std::size_t n_test = d.size() > static_cast<std::size_t>(holdout) ? static_cast<std::size_t>(holdout) : 0;
  for (std::size_t i = 0; i < d.size(); ++i) (i + n_test < d.size() ? train : test).samples.push_back(d.samples[i]);
  return {train, test};
}

metrics::Pixel parse_pixel(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw std::invalid_argument("pixel must be 'row,col', got '" + s + "'");
  return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metal artifact reduction: simulation, training and evaluation"};
  app.require_subcommand(1);

  Common sim_c, train_c, eval_c, abl_c, prof_c;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic paired dataset");
  add_common(sim, sim_c);
  std::string sim_out;
  int sim_count = 0, sim_size = 0;
  std::optional<std::uint64_t> sim_seed;
  std::vector<double> sim_etas{0.5, 1.0, 2.0};
  sim->add_option("--out", sim_out, "output directory")->required();
  sim->add_option("--n", sim_count, "number of pairs (default train_samples + holdout_samples)");
  sim->add_option("--size", sim_size, "image side in pixels (default image_size)");
  sim->add_option("--eta-set", sim_etas, "artifact strengths cycled over samples")->delimiter(',');
  sim->add_option("--seed", sim_seed, "dataset seed (default seed)");

  auto* tr = app.add_subcommand("train", "train a model on a dataset");
  add_common(tr, train_c);
  std::string tr_data, tr_out, tr_resume, tr_log;
  std::int64_t tr_steps = 0;
  tr->add_option("--data", tr_data, "dataset directory")->required();
  tr->add_option("--out", tr_out, "checkpoint to write")->required();
  tr->add_option("--resume", tr_resume, "checkpoint to resume from (its config wins)");
  tr->add_option("--steps", tr_steps, "total optimizer steps (default from the config)");
  tr->add_option("--log", tr_log, "per-epoch CSV log (epoch,loss,l_r,l_s,holdout_psnr)");

  auto* ev = app.add_subcommand("eval", "evaluate input, LI and an optional checkpoint");
  add_common(ev, eval_c);
  std::string ev_data, ev_ckpt, ev_out;
  bool ev_no_gt = false;
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--checkpoint", ev_ckpt, "trained checkpoint");
  ev->add_option("--out", ev_out, "metrics CSV (method,sample_id,metric,value)");
  ev->add_flag("--no-gt", ev_no_gt, "reference-free STD/CNR mode");

  auto* ab = app.add_subcommand("ablate", "train all variants under all loss configurations");
  add_common(ab, abl_c);
  std::string ab_data, ab_out;
  ab->add_option("--data", ab_data, "dataset directory")->required();
  ab->add_option("--out", ab_out, "report CSV (variant,loss,psnr,ssim,final_loss,finite)");

  auto* pp = app.add_subcommand("profile-plot", "intensity profiles along a line");
  add_common(pp, prof_c);
  std::string pp_data, pp_ckpt, pp_out, pp_p0, pp_p1;
  int pp_index = 0, pp_samples = 128;
  pp->add_option("--data", pp_data, "dataset directory")->required();
  pp->add_option("--index", pp_index, "sample index");
  pp->add_option("--checkpoint", pp_ckpt, "trained checkpoint to include");
  pp->add_option("--p0", pp_p0, "start pixel row,col")->required();
  pp->add_option("--p1", pp_p1, "end pixel row,col")->required();
  pp->add_option("--samples", pp_samples, "points along the line");
  pp->add_option("--out", pp_out, "PNG path; the CSV goes next to it")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      const TrainConfig cfg = resolve_config(sim_c);
      data::GenerateOptions g;
      g.count = sim_count > 0 ? sim_count : cfg.train_samples + cfg.holdout_samples;
      g.image_size = sim_size > 0 ? sim_size : cfg.image_size;
      g.n_angles = cfg.n_angles;
      g.seed = sim_seed.value_or(cfg.seed);
      g.etas = sim_etas;
      data::save(data::generate(g), sim_out);
      std::printf("wrote %d pairs of %dx%d to %s\n", g.count, g.image_size, g.image_size, sim_out.c_str());
    } else if (*tr) {
      const data::Dataset all = data::load(tr_data);
      std::unique_ptr<train::Trainer> t;
      if (!tr_resume.empty()) {
        t = train::Trainer::from_checkpoint(load_checkpoint(tr_resume));
      } else {
        t = std::make_unique<train::Trainer>(resolve_config(train_c));
      }
      const auto [train_set, holdout] = split(all, t->config().holdout_samples);
      std::ostringstream log;
      log << "epoch,loss,l_r,l_s,holdout_psnr\n";
      t->run(train_set, holdout, tr_steps, {}, [&](const train::EpochLog& e) {
        log << e.epoch << "," << e.loss << "," << e.l_r << "," << e.l_s << "," << e.holdout_psnr << "\n";
        std::printf("epoch %d  loss %.5f  l_r %.5f  l_s %.4f  holdout psnr %.2f\n", e.epoch, e.loss, e.l_r, e.l_s,
                    e.holdout_psnr);
        std::fflush(stdout);
      });
      save_checkpoint(tr_out, t->checkpoint());
      if (!tr_log.empty()) write_text(tr_log, log.str());
    } else if (*ev) {
      const data::Dataset d = data::load(ev_data);
      std::unique_ptr<train::Trainer> t;
      if (!ev_ckpt.empty()) t = train::Trainer::from_checkpoint(load_checkpoint(ev_ckpt));
      const report::EvalReport r = report::evaluate(t ? &t->model() : nullptr, d, !ev_no_gt);
      std::cout << r.table();
      if (!ev_out.empty()) write_text(ev_out, r.csv());
    } else if (*ab) {
      const TrainConfig cfg = resolve_config(abl_c);
      const auto [train_set, test] = split(data::load(ab_data), cfg.holdout_samples);
      const report::AblationReport r =
          report::ablate(train_set, test, cfg, [](const std::string& msg) { std::printf("%s\n", msg.c_str()); });
      std::cout << r.table();
      if (!ab_out.empty()) write_text(ab_out, r.csv());
    } else if (*pp) {
      const data::Dataset d = data::load(pp_data);
      if (pp_index < 0 || static_cast<std::size_t>(pp_index) >= d.size()) {
        throw std::invalid_argument("--index out of range");
      }
      const auto& p = d.samples[static_cast<std::size_t>(pp_index)].pair;
      std::vector<std::pair<std::string, Tensor>> images;
      if (!p.x_gt.empty()) images.emplace_back("GT", p.x_gt);
      images.emplace_back("input", p.x_m);
      images.emplace_back("LI", p.x_l);
      if (!pp_ckpt.empty()) {
        const auto t = train::Trainer::from_checkpoint(load_checkpoint(pp_ckpt));
        images.emplace_back(model::to_string(t->model().variant()), train::predict(t->model(), p));
      }
      plot::profile_plot(images, parse_pixel(pp_p0), parse_pixel(pp_p1), pp_samples, pp_out);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
