#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "asmamba/config.hpp"
#include "asmamba/dataset.hpp"
#include "asmamba/metrics.hpp"
#include "asmamba/model.hpp"

namespace asmamba::report {

/// Long-format metric value; the CSV columns are method,sample_id,metric,value.
struct Record {
  std::string method;
  int sample_id = 0;
  std::string metric;
  double value = 0.0;
};

/// One table row: a method's mean metrics over one stratum ("eta=1" ...) or
/// over all strata ("average", the mean of the per-stratum means).
struct Row {
  std::string method;
  std::string stratum;
  std::vector<std::pair<std::string, double>> values;
  int count = 0;

  double get(const std::string& metric) const;
};

struct EvalReport {
  std::vector<Row> rows;
  std::vector<Record> records;

  void append(const EvalReport& other);
  std::string csv() const;
  std::string table() const;
};

/// Synthetic mode: masked PSNR and SSIM of `outputs` (one (H, W) image per
/// sample) against x_gt, stratified by eta. Metal pixels are zeroed in both
/// images. Throws std::invalid_argument when a sample lacks ground truth.
EvalReport evaluate_images(const std::string& method, const std::vector<Tensor>& outputs, const data::Dataset& d);

/// Reference-free mode: background STD and CNR inside the default ROIs.
EvalReport evaluate_roi(const std::string& method, const std::vector<Tensor>& outputs, const data::Dataset& d);

/// Foreground: disk of radius N/10 at the centre; background: square of side
/// N/8 centred at (3N/8, 3N/8). Metal pixels are removed from both.
std::pair<Tensor, Tensor> default_rois(const Tensor& mask_i);

/// Rows for the corrupted input, the LI prior and (when given) the model.
EvalReport evaluate(const model::Model* m, const data::Dataset& d, bool ground_truth = true);

struct AblationCell {
  double psnr = 0.0;
  double ssim = 0.0;
  double final_loss = 0.0;
  bool finite = true;
};

struct AblationReport {
  std::vector<model::Variant> variants;
  std::vector<loss::ContrastMode> losses;
  std::vector<std::vector<AblationCell>> cells;  // [variant][loss]
  double input_psnr = 0.0;
  double input_ssim = 0.0;

  std::string csv() const;
  std::string table() const;
};

/// Loss-configuration columns: w/o CR, CR, SGCR, CR+SGCR.
const std::vector<loss::ContrastMode>& loss_columns();
std::string loss_label(loss::ContrastMode m);

/// Trains every variant under every loss configuration with cfg's seed and
/// schedule, then evaluates on `test` (or `train` when test is empty).
AblationReport ablate(const data::Dataset& train, const data::Dataset& test, const TrainConfig& cfg,
                      const std::function<void(const std::string&)>& progress = {});

}  // namespace asmamba::report
