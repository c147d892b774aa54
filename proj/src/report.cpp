#include "asmamba/report.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "asmamba/parallel.hpp"
#include "asmamba/train.hpp"

namespace asmamba::report {

namespace {

std::string stratum_name(double eta) {
  std::ostringstream os;
  os << "eta=" << eta;
  return os.str();
}

std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

// Per-stratum means and their average, for the metrics named in `metrics`.
std::vector<Row> stratify(const std::string& method, const std::vector<std::string>& metrics,
                          const std::vector<std::vector<double>>& per_sample, const data::Dataset& d) {
  std::map<double, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < d.size(); ++i) strata[d.samples[i].eta].push_back(i);
  std::vector<Row> rows;
  Row avg{method, "average", {}, static_cast<int>(d.size())};
  for (std::size_t m = 0; m < metrics.size(); ++m) avg.values.emplace_back(metrics[m], 0.0);
  for (const auto& [eta, idx] : strata) {
    Row r{method, stratum_name(eta), {}, static_cast<int>(idx.size())};
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      double s = 0.0;
      for (std::size_t i : idx) s += per_sample[i][m];
      r.values.emplace_back(metrics[m], s / static_cast<double>(idx.size()));
      avg.values[m].second += r.values[m].second / static_cast<double>(strata.size());
    }
    rows.push_back(r);
  }
  rows.push_back(avg);
  return rows;
}

void check_outputs(const std::vector<Tensor>& outputs, const data::Dataset& d) {
  if (outputs.size() != d.size()) throw std::invalid_argument("evaluate: one output per sample is required");
  if (d.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
}

}  // namespace

double Row::get(const std::string& metric) const {
  for (const auto& [k, v] : values) {
    if (k == metric) return v;
  }
  throw std::out_of_range("row has no metric '" + metric + "'");
}

void EvalReport::append(const EvalReport& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  records.insert(records.end(), other.records.begin(), other.records.end());
}

std::string EvalReport::csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "method,sample_id,metric,value\n";
  for (const Record& r : records) os << r.method << "," << r.sample_id << "," << r.metric << "," << r.value << "\n";
  return os.str();
}

std::string EvalReport::table() const {
  std::ostringstream os;
  std::string last;
  for (const Row& r : rows) {
    if (r.method != last) os << r.method << "\n";
    last = r.method;
    os << "  " << r.stratum;
    for (std::size_t pad = r.stratum.size(); pad < 10; ++pad) os << ' ';
    for (const auto& [k, v] : r.values) os << "  " << k << " " << fmt(v, k == "ssim" ? 4 : 2);
    os << "  (n=" << r.count << ")\n";
  }
  return os.str();
}

EvalReport evaluate_images(const std::string& method, const std::vector<Tensor>& outputs, const data::Dataset& d) {
  check_outputs(outputs, d);
  std::vector<std::vector<double>> v(d.size());
  for (const auto& s : d.samples) {
    if (s.pair.x_gt.empty()) throw std::invalid_argument("evaluate: sample " + std::to_string(s.index) + " has no ground truth");
  }
  parallel_for(d.size(), [&](std::size_t i) {
    const auto& p = d.samples[i].pair;
    const Tensor gt = metrics::apply_mask(p.x_gt, p.mask_i);
    const Tensor out = metrics::apply_mask(outputs[i].reshaped(p.x_gt.shape()), p.mask_i);
    v[i] = {metrics::psnr(out, gt), metrics::ssim(out, gt)};
  });
  EvalReport r;
  for (std::size_t i = 0; i < d.size(); ++i) {
    r.records.push_back({method, d.samples[i].index, "psnr", v[i][0]});
    r.records.push_back({method, d.samples[i].index, "ssim", v[i][1]});
  }
  r.rows = stratify(method, {"psnr", "ssim"}, v, d);
  return r;
}

std::pair<Tensor, Tensor> default_rois(const Tensor& mask_i) {
  const int n = mask_i.height(), w = mask_i.width();
  Tensor fg(mask_i.shape()), bg(mask_i.shape());
  const double c = 0.5 * (n - 1), rad = n / 10.0;
  const int side = std::max(1, n / 8), r0 = 3 * n / 8 - side / 2;
  for (int r = 0; r < n; ++r) {
    for (int col = 0; col < w; ++col) {
      const auto i = static_cast<std::size_t>(r) * w + col;
      if (mask_i[i] == 0.0) continue;
      if ((r - c) * (r - c) + (col - c) * (col - c) <= rad * rad) fg[i] = 1.0;
      else if (r >= r0 && r < r0 + side && col >= r0 && col < r0 + side) bg[i] = 1.0;
    }
  }
  return {fg, bg};
}

EvalReport evaluate_roi(const std::string& method, const std::vector<Tensor>& outputs, const data::Dataset& d) {
  check_outputs(outputs, d);
  std::vector<std::vector<double>> v(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& p = d.samples[i].pair;
    const auto [fg, bg] = default_rois(p.mask_i);
    const metrics::RoiStats s = metrics::roi_std_cnr(outputs[i].reshaped(p.mask_i.shape()), fg, bg);
    v[i] = {s.std, s.cnr};
  }
  EvalReport r;
  for (std::size_t i = 0; i < d.size(); ++i) {
    r.records.push_back({method, d.samples[i].index, "std", v[i][0]});
    r.records.push_back({method, d.samples[i].index, "cnr", v[i][1]});
  }
  r.rows = stratify(method, {"std", "cnr"}, v, d);
  return r;
}

EvalReport evaluate(const model::Model* m, const data::Dataset& d, bool ground_truth) {
  std::vector<Tensor> xm, xl;
  for (const auto& s : d.samples) {
    xm.push_back(s.pair.x_m);
    xl.push_back(s.pair.x_l);
  }
  auto run = [&](const std::string& name, const std::vector<Tensor>& out) {
    return ground_truth ? evaluate_images(name, out, d) : evaluate_roi(name, out, d);
  };
  EvalReport r = run("input", xm);
  r.append(run("LI", xl));
  if (m) {
    std::vector<Tensor> out(d.size());
    parallel_for(d.size(), [&](std::size_t i) { out[i] = train::predict(*m, d.samples[i].pair); });
    r.append(run(model::to_string(m->variant()), out));
  }
  return r;
}

const std::vector<loss::ContrastMode>& loss_columns() {
  static const std::vector<loss::ContrastMode> c{loss::ContrastMode::None, loss::ContrastMode::CR,
                                                 loss::ContrastMode::SGCR, loss::ContrastMode::CRSGCR};
  return c;
}

std::string loss_label(loss::ContrastMode m) {
  switch (m) {
    case loss::ContrastMode::None: return "w/o CR";
    case loss::ContrastMode::CR: return "CR";
    case loss::ContrastMode::SGCR: return "SGCR";
    case loss::ContrastMode::CRSGCR: return "CR+SGCR";
  }
  return "?";
}

AblationReport ablate(const data::Dataset& train, const data::Dataset& test, const TrainConfig& cfg,
                      const std::function<void(const std::string&)>& progress) {
  const data::Dataset& eval_set = test.size() > 0 ? test : train;
  AblationReport rep;
  rep.variants = model::all_variants();
  rep.losses = loss_columns();
  {
    const EvalReport in = evaluate(nullptr, eval_set);
    for (const Row& r : in.rows) {
      if (r.method == "input" && r.stratum == "average") {
        rep.input_psnr = r.get("psnr");
        rep.input_ssim = r.get("ssim");
      }
    }
  }
  for (model::Variant v : rep.variants) {
    std::vector<AblationCell> row;
    for (loss::ContrastMode mode : rep.losses) {
      TrainConfig c = cfg;
      c.variant = model::to_string(v);
      c.contrast = to_string(mode);
      train::Trainer t(c);
      AblationCell cell;
      try {
        double last = 0.0;
        t.run(train, data::Dataset{}, t.scheduled_steps(train.size()), [&](const train::StepStats& s) { last = s.loss; });
        cell.final_loss = last;
        const EvalReport e = evaluate(&t.model(), eval_set);
        const Row& avg = e.rows.back();
        cell.psnr = avg.get("psnr");
        cell.ssim = avg.get("ssim");
        cell.finite = std::isfinite(cell.psnr) && std::isfinite(cell.final_loss);
      } catch (const std::runtime_error&) {
        cell.finite = false;
        cell.psnr = cell.ssim = cell.final_loss = std::nan("");
      }
      if (progress) {
        progress(model::to_string(v) + " / " + loss_label(mode) + ": psnr " + fmt(cell.psnr, 2) + " ssim " +
                 fmt(cell.ssim, 4));
      }
      row.push_back(cell);
    }
    rep.cells.push_back(row);
  }
  return rep;
}

std::string AblationReport::csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "variant,loss,psnr,ssim,final_loss,finite\n";
  for (std::size_t i = 0; i < variants.size(); ++i) {
    for (std::size_t j = 0; j < losses.size(); ++j) {
      const AblationCell& c = cells[i][j];
      os << model::to_string(variants[i]) << "," << loss_label(losses[j]) << "," << c.psnr << "," << c.ssim << ","
         << c.final_loss << "," << (c.finite ? 1 : 0) << "\n";
    }
  }
  return os.str();
}

std::string AblationReport::table() const {
  std::ostringstream os;
  os << "PSNR / SSIM (input " << fmt(input_psnr, 2) << " / " << fmt(input_ssim, 4) << ")\n";
  os << "variant    ";
  for (loss::ContrastMode m : losses) {
    std::string l = loss_label(m);
    l.resize(18, ' ');
    os << " | " << l;
  }
  os << "\n";
  for (std::size_t i = 0; i < variants.size(); ++i) {
    std::string name = model::to_string(variants[i]);
    name.resize(11, ' ');
    os << name;
    for (const AblationCell& c : cells[i]) {
      std::string cell = c.finite ? fmt(c.psnr, 2) + " / " + fmt(c.ssim, 4) : "NaN";
      cell.resize(18, ' ');
      os << " | " << cell;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace asmamba::report
