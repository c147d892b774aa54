#include "asmamba/plot.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace asmamba::plot {

namespace {

using Rgb = std::array<unsigned char, 3>;

const Rgb kPalette[] = {{0, 0, 0}, {214, 39, 40}, {31, 119, 180}, {44, 160, 44}, {255, 127, 14}, {148, 103, 189}};

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w) * h * 3, 255) {}

  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    auto* p = &px_[(static_cast<std::size_t>(y) * w_ + x) * 3];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  // Bresenham line, two pixels thick.
  void line(int x0, int y0, int x1, int y1, Rgb c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(x0, y0, c);
      set(x0, y0 + 1, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void save(const std::string& path) const {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot write plot '" + path + "'");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      std::fclose(f);
      throw std::runtime_error("libpng failed writing '" + path + "'");
    }
    png_init_io(png, f);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w_), static_cast<png_uint_32>(h_), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h_; ++y) {
      png_write_row(png, const_cast<png_bytep>(&px_[static_cast<std::size_t>(y) * w_ * 3]));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
  }

 private:
  int w_, h_;
  std::vector<unsigned char> px_;
};

}  // namespace

std::vector<Series> profiles(const std::vector<std::pair<std::string, Tensor>>& images, metrics::Pixel p0,
                             metrics::Pixel p1, int n_samples) {
  std::vector<Series> out;
  for (const auto& [name, img] : images) {
    if (img.height() != images.front().second.height() || img.width() != images.front().second.width()) {
      throw std::invalid_argument("profiles: images must share a shape");
    }
    out.push_back({name, metrics::intensity_profile(img, p0, p1, n_samples)});
  }
  return out;
}

std::string profile_csv(const std::vector<Series>& series) {
  std::ostringstream os;
  os.precision(10);
  os << "method,index,t,value\n";
  for (const Series& s : series) {
    const std::size_t n = s.values.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double t = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
      os << s.method << "," << i << "," << t << "," << s.values[i] << "\n";
    }
  }
  return os.str();
}

void write_png_plot(const std::string& path, const std::vector<Series>& series, int width, int height) {
  if (width < 32 || height < 32) throw std::invalid_argument("write_png_plot: canvas too small");
  double lo = INFINITY, hi = -INFINITY;
  for (const Series& s : series) {
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  Canvas c(width, height);
  const int left = 40, right = width - 10, top = 10, bottom = height - 30;
  const Rgb axis{128, 128, 128};
  c.line(left, top, left, bottom, axis);
  c.line(left, bottom, right, bottom, axis);
  auto map = [&](std::size_t i, std::size_t n, double v) {
    const double t = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    return std::pair<int, int>{left + static_cast<int>(std::lround(t * (right - left))),
                               bottom - static_cast<int>(std::lround((v - lo) / (hi - lo) * (bottom - top)))};
  };
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Rgb col = kPalette[k % std::size(kPalette)];
    const auto& v = series[k].values;
    for (std::size_t i = 1; i < v.size(); ++i) {
      const auto [x0, y0] = map(i - 1, v.size(), v[i - 1]);
      const auto [x1, y1] = map(i, v.size(), v[i]);
      c.line(x0, y0, x1, y1, col);
    }
    // Legend swatch below the axis.
    const int lx = left + static_cast<int>(k) * 60;
    c.line(lx, height - 12, lx + 30, height - 12, col);
  }
  c.save(path);
}

void profile_plot(const std::vector<std::pair<std::string, Tensor>>& images, metrics::Pixel p0, metrics::Pixel p1,
                  int n_samples, const std::string& out_png) {
  const auto series = profiles(images, p0, p1, n_samples);
  write_png_plot(out_png, series);
  const auto csv_path = std::filesystem::path(out_png).replace_extension(".csv");
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write '" + csv_path.string() + "'");
  csv << profile_csv(series);
}

}  // namespace asmamba::plot
