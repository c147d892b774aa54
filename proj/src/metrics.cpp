#include "asmamba/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace asmamba::metrics {

namespace {

void require_plane(const Tensor& x, const char* what) {
  if (x.rank() < 2 || x.rank() > 3 || x.channels() != 1) {
    throw std::invalid_argument(std::string(what) + ": expected a single-channel image, got " + x.shape_string());
  }
}

void require_same(const Tensor& x, const Tensor& y, const char* what) {
  require_plane(x, what);
  if (x.size() != y.size() || x.height() != y.height() || x.width() != y.width()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + x.shape_string() + " vs " +
                                y.shape_string());
  }
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  const double c = 0.5 * (size - 1);
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    g[static_cast<std::size_t>(i)] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    total += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= total;
  return g;
}

// Separable "valid" filtering of an H x W plane.
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w, const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  const int oh = h - k + 1, ow = w - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += g[static_cast<std::size_t>(t)] * img[static_cast<std::size_t>(i) * w + j + t];
      tmp[static_cast<std::size_t>(i) * ow + j] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += g[static_cast<std::size_t>(t)] * tmp[static_cast<std::size_t>(i + t) * ow + j];
      out[static_cast<std::size_t>(i) * ow + j] = acc;
    }
  }
  return out;
}

}  // namespace

double psnr(const Tensor& x, const Tensor& y, double data_range) {
  require_same(x, y, "psnr");
  if (!(data_range > 0.0)) throw std::invalid_argument("psnr: data_range must be positive");
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mse += (x[i] - y[i]) * (x[i] - y[i]);
  mse /= static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(data_range * data_range / mse));
}

double ssim(const Tensor& x, const Tensor& y, double data_range) {
  require_same(x, y, "ssim");
  const int h = x.height(), w = x.width();
  int k = std::min({11, h, w});
  if (k % 2 == 0) --k;
  const auto g = gaussian_window(k, 1.5);
  const double c1 = std::pow(0.01 * data_range, 2), c2 = std::pow(0.03 * data_range, 2);
  std::vector<double> xs(x.storage()), ys(y.storage()), xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = xs[i] * xs[i];
    yy[i] = ys[i] * ys[i];
    xy[i] = xs[i] * ys[i];
  }
  const auto mx = filter_valid(xs, h, w, g), my = filter_valid(ys, h, w, g);
  const auto sxx = filter_valid(xx, h, w, g), syy = filter_valid(yy, h, w, g), sxy = filter_valid(xy, h, w, g);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cov = sxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

RoiStats roi_std_cnr(const Tensor& image, const Tensor& roi_fg, const Tensor& roi_bg) {
  require_same(image, roi_fg, "roi_std_cnr");
  require_same(image, roi_bg, "roi_std_cnr");
  double sf = 0.0, sb = 0.0, nf = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (roi_fg[i] != 0.0 && roi_bg[i] != 0.0) throw std::invalid_argument("roi_std_cnr: ROIs overlap");
    if (roi_fg[i] != 0.0) {
      sf += image[i];
      nf += 1.0;
    }
    if (roi_bg[i] != 0.0) {
      sb += image[i];
      nb += 1.0;
    }
  }
  if (nf == 0.0 || nb == 0.0) throw std::invalid_argument("roi_std_cnr: empty ROI");
  const double mf = sf / nf, mb = sb / nb;
  double var = 0.0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (roi_bg[i] != 0.0) var += (image[i] - mb) * (image[i] - mb);
  }
  RoiStats r;
  r.std = std::sqrt(var / nb);
  if (r.std == 0.0) {
    r.cnr = kCnrCap;
    r.degenerate = true;
  } else {
    r.cnr = std::min(kCnrCap, std::abs(mf - mb) / r.std);
  }
  return r;
}

std::vector<double> intensity_profile(const Tensor& image, Pixel p0, Pixel p1, int n_samples) {
  require_plane(image, "intensity_profile");
  if (n_samples < 1) throw std::invalid_argument("intensity_profile: n_samples must be positive");
  const int h = image.height(), w = image.width();
  for (const Pixel& p : {p0, p1}) {
    if (p.row < 0 || p.row > h - 1 || p.col < 0 || p.col > w - 1) {
      throw std::invalid_argument("intensity_profile: endpoint outside the image");
    }
  }
  const double* d = image.data();
  std::vector<double> out;
  for (int s = 0; s < n_samples; ++s) {
    const double t = n_samples == 1 ? 0.0 : static_cast<double>(s) / (n_samples - 1);
    const double r = p0.row + t * (p1.row - p0.row), c = p0.col + t * (p1.col - p0.col);
    const int r0 = std::min(static_cast<int>(std::floor(r)), h - 1), c0 = std::min(static_cast<int>(std::floor(c)), w - 1);
    const int r1 = std::min(r0 + 1, h - 1), c1 = std::min(c0 + 1, w - 1);
    const double fr = r - r0, fc = c - c0;
    auto at = [&](int i, int j) { return d[static_cast<std::size_t>(i) * w + j]; };
    out.push_back((1 - fr) * ((1 - fc) * at(r0, c0) + fc * at(r0, c1)) + fr * ((1 - fc) * at(r1, c0) + fc * at(r1, c1)));
  }
  return out;
}

Tensor apply_mask(const Tensor& x, const Tensor& mask) {
  if (x.size() != mask.size()) throw std::invalid_argument("apply_mask: shape mismatch");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return out;
}

}  // namespace asmamba::metrics
