#pragma once

#include <string>
#include <utility>
#include <vector>

#include "asmamba/metrics.hpp"

namespace asmamba::plot {

struct Series {
  std::string method;
  std::vector<double> values;
};

/// intensity_profile of each named image along p0 -> p1. Images must share
/// a shape.
std::vector<Series> profiles(const std::vector<std::pair<std::string, Tensor>>& images, metrics::Pixel p0,
                             metrics::Pixel p1, int n_samples);

/// Columns method,index,t,value with t in [0, 1] along the segment; one row
/// per method and sample.
std::string profile_csv(const std::vector<Series>& series);

/// Line plot of the series as an 8-bit RGB PNG. Throws std::runtime_error
/// when the file cannot be written.
void write_png_plot(const std::string& path, const std::vector<Series>& series, int width = 640, int height = 400);

/// Writes `out_png` and the CSV next to it (`out_png` with a .csv extension).
void profile_plot(const std::vector<std::pair<std::string, Tensor>>& images, metrics::Pixel p0, metrics::Pixel p1,
                  int n_samples, const std::string& out_png);

}  // namespace asmamba::plot
