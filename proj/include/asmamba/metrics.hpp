#pragma once

#include <vector>

#include "asmamba/tensor.hpp"

// Image-quality metrics on single-channel images, (H, W) or (1, H, W).
namespace asmamba::metrics {

constexpr double kPsnrCap = 100.0;

/// 10 log10(range^2 / MSE); kPsnrCap when the inputs are identical.
double psnr(const Tensor& x, const Tensor& y, double data_range = 1.0);

/// Mean SSIM over valid windows of an 11x11 Gaussian (sigma 1.5) with
/// C1 = (0.01 range)^2, C2 = (0.03 range)^2. Images smaller than 11 px use
/// the largest odd window that fits.
double ssim(const Tensor& x, const Tensor& y, double data_range = 1.0);

struct RoiStats {
  double std = 0.0;  // population standard deviation over the background ROI
  double cnr = 0.0;  // |mean_fg - mean_bg| / std, or kCnrCap when std == 0
  bool degenerate = false;
};
constexpr double kCnrCap = 1e6;

/// ROIs are binary masks of the image's shape; they must be nonempty and
/// disjoint.
RoiStats roi_std_cnr(const Tensor& image, const Tensor& roi_fg, const Tensor& roi_bg);

struct Pixel {
  double row = 0.0;
  double col = 0.0;
};

/// Bilinear samples at n uniformly spaced points from p0 to p1 inclusive.
std::vector<double> intensity_profile(const Tensor& image, Pixel p0, Pixel p1, int n_samples);

/// Copy of `x` with entries outside `mask` set to zero.
Tensor apply_mask(const Tensor& x, const Tensor& mask);

}  // namespace asmamba::metrics
