#include "asmamba/ct_sim.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace asmamba::ct {

namespace {

constexpr double kRayStep = 0.25;

void require_square(const Tensor& img, const char* what) {
  if (img.rank() != 2 || img.dim(0) != img.dim(1)) {
    throw std::invalid_argument(std::string(what) + ": expected a square (N, N) image, got " +
                                img.shape_string());
  }
}

double sample_bilinear(const Tensor& img, double row, double col) {
  const int n = img.dim(0);
  const int r0 = static_cast<int>(std::floor(row));
  const int c0 = static_cast<int>(std::floor(col));
  const double fr = row - r0, fc = col - c0;
  double acc = 0.0;
  for (int dr = 0; dr < 2; ++dr) {
    const int r = r0 + dr;
    if (r < 0 || r >= n) continue;
    const double wr = dr ? fr : 1.0 - fr;
    for (int dc = 0; dc < 2; ++dc) {
      const int c = c0 + dc;
      if (c < 0 || c >= n) continue;
      acc += wr * (dc ? fc : 1.0 - fc) * img.at(r, c);
    }
  }
  return acc;
}

}  // namespace

void PhantomImage::validate() const {
  require_square(attenuation, "PhantomImage");
  if (!attenuation.same_shape(metal_mask)) throw std::invalid_argument("PhantomImage: shape mismatch");
  for (double v : attenuation.values()) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("PhantomImage: bad attenuation");
  }
  for (double v : metal_mask.values()) {
    if (v != 0.0 && v != 1.0) throw std::invalid_argument("PhantomImage: mask must be binary");
  }
}

bool PhantomImage::has_metal() const {
  for (double v : metal_mask.values()) {
    if (v != 0.0) return true;
  }
  return false;
}

ProjectionGeometry ProjectionGeometry::for_image(int image_size, int n_angles) {
  ProjectionGeometry g;
  g.image_size = image_size;
  g.n_angles = n_angles;
  return g;
}

int ProjectionGeometry::detectors() const {
  if (n_detectors > 0) return n_detectors;
  const int n = static_cast<int>(std::ceil(image_size * std::numbers::sqrt2 / detector_spacing)) + 1;
  return n % 2 == 0 ? n + 1 : n;
}

void ProjectionGeometry::validate() const {
  if (image_size < 8) throw std::invalid_argument("geometry: image side must be >= 8");
  if (n_angles < 1) throw std::invalid_argument("geometry: n_angles must be >= 1");
  if (!(detector_spacing > 0.0)) throw std::invalid_argument("geometry: detector_spacing must be > 0");
  if (!(angle_range > 0.0)) throw std::invalid_argument("geometry: angle_range must be > 0");
  if (detectors() * detector_spacing < image_size * std::numbers::sqrt2) {
    throw std::invalid_argument("geometry: detector array does not cover the image diagonal");
  }
}

Sinogram radon(const Tensor& image, const ProjectionGeometry& geo) {
  require_square(image, "radon");
  geo.validate();
  if (image.dim(0) != geo.image_size) throw std::invalid_argument("radon: image size != geometry");
  const int n = geo.image_size;
  const double center = 0.5 * (n - 1);
  const double radius = center * std::numbers::sqrt2 + 1.0;
  const int nd = geo.detectors();
  Sinogram sino({geo.n_angles, nd});
  for (int a = 0; a < geo.n_angles; ++a) {
    const double th = geo.angle(a);
    const double ct = std::cos(th), st = std::sin(th);
    for (int k = 0; k < nd; ++k) {
      const double s = geo.offset(k);
      if (std::abs(s) >= radius) continue;
      const double half = std::sqrt(radius * radius - s * s);
      const int steps = static_cast<int>(std::ceil(2.0 * half / kRayStep));
      double acc = 0.0;
      for (int m = 0; m <= steps; ++m) {
        const double t = -half + m * kRayStep;
        const double x = s * ct - t * st;
        const double y = s * st + t * ct;
        acc += sample_bilinear(image, center - y, x + center);
      }
      sino.at(a, k) = acc * kRayStep;
    }
  }
  return sino;
}

Tensor fbp(const Sinogram& sino, const ProjectionGeometry& geo) {
  geo.validate();
  const int nd = geo.detectors();
  if (sino.rank() != 2 || sino.dim(0) != geo.n_angles || sino.dim(1) != nd) {
    throw std::invalid_argument("fbp: sinogram shape " + sino.shape_string() + " does not match geometry");
  }
  const double d = geo.detector_spacing;
  // Spatial Ram-Lak kernel; the linear convolution equals zero-padded
  // frequency-domain filtering with the band-limited ramp.
  std::vector<double> kernel(static_cast<std::size_t>(2 * nd - 1), 0.0);
  for (int m = -(nd - 1); m <= nd - 1; ++m) {
    double v = 0.0;
    if (m == 0) {
      v = 1.0 / (4.0 * d * d);
    } else if (m % 2 != 0) {
      v = -1.0 / (static_cast<double>(m) * m * std::numbers::pi * std::numbers::pi * d * d);
    }
    kernel[static_cast<std::size_t>(m + nd - 1)] = v;
  }
  Tensor filtered({geo.n_angles, nd});
  for (int a = 0; a < geo.n_angles; ++a) {
    for (int k = 0; k < nd; ++k) {
      double acc = 0.0;
      for (int m = 0; m < nd; ++m) acc += sino.at(a, m) * kernel[static_cast<std::size_t>(k - m + nd - 1)];
      filtered.at(a, k) = acc * d;
    }
  }

  const int n = geo.image_size;
  const double center = 0.5 * (n - 1);
  const double s0 = geo.offset(0);
  const double dtheta = geo.angle_range / geo.n_angles;
  Tensor img({n, n});
  for (int a = 0; a < geo.n_angles; ++a) {
    const double th = geo.angle(a);
    const double ct = std::cos(th), st = std::sin(th);
    const double* row = filtered.data() + static_cast<std::size_t>(a) * nd;
    for (int i = 0; i < n; ++i) {
      const double y = center - i;
      for (int j = 0; j < n; ++j) {
        const double x = j - center;
        const double pos = (x * ct + y * st - s0) / d;
        const int k0 = static_cast<int>(std::floor(pos));
        const double f = pos - k0;
        double v = 0.0;
        if (k0 >= 0 && k0 < nd) v += (1.0 - f) * row[k0];
        if (k0 + 1 >= 0 && k0 + 1 < nd) v += f * row[k0 + 1];
        img.at(i, j) += v;
      }
    }
  }
  img *= dtheta;
  return img;
}

double beam_hardening_error(double p, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("beam_hardening_error: eta must be positive");
  if (p < 0.0) throw std::invalid_argument("beam_hardening_error: metal trace must be non-negative");
  const double x = eta * p;
  if (x < 1e-4) return x * x / 6.0;
  if (x < 20.0) return std::log(std::sinh(x) / x);
  // sinh(x) = e^x (1 - e^{-2x}) / 2
  return x - std::log(2.0 * x) + std::log1p(-std::exp(-2.0 * x));
}

Sinogram beam_hardening_error(const Sinogram& metal_trace, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("beam_hardening_error: eta must be positive");
  Sinogram out(metal_trace.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Bilinear projections of a binary mask can dip a hair below zero.
    out[i] = beam_hardening_error(std::max(0.0, metal_trace[i]), eta);
  }
  return out;
}

Sinogram interpolate_trace(const Sinogram& sino, const Tensor& trace_mask) {
  if (!sino.same_shape(trace_mask) || sino.rank() != 2) {
    throw std::invalid_argument("interpolate_trace: trace mask shape must match the sinogram");
  }
  Sinogram out = sino;
  const int rows = sino.dim(0), nd = sino.dim(1);
  for (int a = 0; a < rows; ++a) {
    int k = 0;
    while (k < nd) {
      if (trace_mask.at(a, k) == 0.0) {
        ++k;
        continue;
      }
      const int start = k;
      while (k < nd && trace_mask.at(a, k) != 0.0) ++k;
      const int left = start - 1;
      const int right = k;  // first unmasked bin after the run, or nd
      for (int m = start; m < k; ++m) {
        double v;
        if (left >= 0 && right < nd) {
          const double t = static_cast<double>(m - left) / (right - left);
          v = (1.0 - t) * sino.at(a, left) + t * sino.at(a, right);
        } else if (left >= 0) {
          v = sino.at(a, left);
        } else if (right < nd) {
          v = sino.at(a, right);
        } else {
          v = 0.5 * (sino.at(a, 0) + sino.at(a, nd - 1));
        }
        out.at(a, m) = v;
      }
    }
  }
  return out;
}

Tensor li_prior(const Sinogram& sino, const Tensor& trace_mask, const ProjectionGeometry& geo) {
  return fbp(interpolate_trace(sino, trace_mask), geo);
}

Tensor metal_trace_mask(const Tensor& metal_mask, const ProjectionGeometry& geo) {
  Sinogram p = radon(metal_mask, geo);
  for (double& v : p.values()) v = v > 1e-6 ? 1.0 : 0.0;
  return p;
}

Tensor artifact_term(const Tensor& metal_mask, double eta, const ProjectionGeometry& geo,
                     const SimulationOptions& opts) {
  Sinogram thickness = radon(metal_mask, geo);
  thickness *= opts.pixel_size;
  Tensor f = fbp(beam_hardening_error(thickness, eta), geo);
  f *= -opts.artifact_gain / opts.pixel_size;
  return f;
}

ArtifactPair synthesize_pair(const PhantomImage& phantom, double eta, const ProjectionGeometry& geo,
                             const SimulationOptions& opts) {
  phantom.validate();
  if (!(eta > 0.0)) throw std::invalid_argument("synthesize_pair: eta must be positive");
  const int n = phantom.attenuation.dim(0);
  if (n != geo.image_size) throw std::invalid_argument("synthesize_pair: image size != geometry");

  ArtifactPair pair;
  pair.x_gt = phantom.attenuation;
  pair.mask_i = Tensor(phantom.metal_mask.shape());
  for (std::size_t i = 0; i < pair.mask_i.size(); ++i) pair.mask_i[i] = 1.0 - phantom.metal_mask[i];

  const Sinogram clean = radon(phantom.attenuation, geo);
  if (!phantom.has_metal()) {
    pair.x_m = pair.x_gt;
    pair.x_l = fbp(clean, geo);
    return pair;
  }

  const Tensor f_ma = artifact_term(phantom.metal_mask, eta, geo, opts);
  pair.x_m = Tensor(pair.x_gt.shape());
  for (std::size_t i = 0; i < pair.x_m.size(); ++i) {
    const double v = phantom.metal_mask[i] != 0.0 ? opts.metal_value : pair.x_gt[i] + f_ma[i];
    pair.x_m[i] = std::clamp(v, 0.0, 1.0);
  }

  // Measured sinogram: clean projections plus metal attenuation and the
  // hardening error, both confined to the metal trace.
  const Sinogram metal = radon(phantom.metal_mask, geo);
  Sinogram thickness = metal;
  thickness *= opts.pixel_size;
  const Sinogram err = beam_hardening_error(thickness, eta);
  Sinogram measured = clean;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    measured[i] += opts.metal_attenuation * metal[i] + err[i] / opts.pixel_size;
  }
  Tensor trace(metal.shape());
  for (std::size_t i = 0; i < trace.size(); ++i) trace[i] = metal[i] > 1e-6 ? 1.0 : 0.0;
  pair.x_l = li_prior(measured, trace, geo);
  return pair;
}

Tensor disk_image(int size, double cx, double cy, double radius) {
  Tensor img({size, size});
  const double center = 0.5 * (size - 1);
  constexpr int ss = 4;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double x = j - center - cx;
      const double y = center - i - cy;
      const double reach = std::hypot(x, y);
      if (reach > radius + 1.0) continue;
      if (reach < radius - 1.0) {
        img.at(i, j) = 1.0;
        continue;
      }
      int inside = 0;
      for (int a = 0; a < ss; ++a) {
        for (int b = 0; b < ss; ++b) {
          const double px = x + (b + 0.5) / ss - 0.5;
          const double py = y - (a + 0.5) / ss + 0.5;
          if (px * px + py * py <= radius * radius) ++inside;
        }
      }
      img.at(i, j) = static_cast<double>(inside) / (ss * ss);
    }
  }
  return img;
}

namespace {

void add_ellipse(Tensor& img, double cx, double cy, double rx, double ry, double angle, double value,
                 bool replace) {
  const int n = img.dim(0);
  const double center = 0.5 * (n - 1);
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x = j - center - cx;
      const double y = center - i - cy;
      const double u = (x * ca + y * sa) / rx;
      const double v = (-x * sa + y * ca) / ry;
      if (u * u + v * v <= 1.0) img.at(i, j) = replace ? value : img.at(i, j) + value;
    }
  }
}

void add_metal_disk(Tensor& mask, double cx, double cy, double r) {
  const int n = mask.dim(0);
  const double center = 0.5 * (n - 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x = j - center - cx;
      const double y = center - i - cy;
      if (x * x + y * y <= r * r) mask.at(i, j) = 1.0;
    }
  }
}

}  // namespace

PhantomImage random_phantom(int size, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double n = size;
  PhantomImage p{Tensor({size, size}), Tensor({size, size})};
  const double body_rx = n * (0.36 + 0.08 * u(rng));
  const double body_ry = n * (0.28 + 0.08 * u(rng));
  add_ellipse(p.attenuation, 0.0, 0.0, body_rx, body_ry, 0.3 * (u(rng) - 0.5), 0.35 + 0.1 * u(rng), true);
  const int organs = 3 + static_cast<int>(u(rng) * 4);
  for (int k = 0; k < organs; ++k) {
    const double cx = (u(rng) - 0.5) * body_rx;
    const double cy = (u(rng) - 0.5) * body_ry;
    const double rx = n * (0.03 + 0.08 * u(rng));
    const double ry = n * (0.03 + 0.08 * u(rng));
    const double delta = (u(rng) - 0.4) * 0.3;
    add_ellipse(p.attenuation, cx, cy, rx, ry, u(rng) * std::numbers::pi, delta, false);
  }
  // Bone-like rim structures.
  const int bones = 1 + static_cast<int>(u(rng) * 2);
  for (int k = 0; k < bones; ++k) {
    const double ang = u(rng) * 2.0 * std::numbers::pi;
    const double cx = 0.6 * body_rx * std::cos(ang);
    const double cy = 0.6 * body_ry * std::sin(ang);
    add_ellipse(p.attenuation, cx, cy, n * 0.04, n * 0.025, ang, 0.8, true);
  }
  for (double& v : p.attenuation.values()) v = std::clamp(v, 0.0, 1.0);

  const int metals = 1 + static_cast<int>(u(rng) * 3);
  for (int k = 0; k < metals; ++k) {
    const double cx = (u(rng) - 0.5) * body_rx;
    const double cy = (u(rng) - 0.5) * body_ry;
    const double r = n * (0.02 + 0.03 * u(rng));
    add_metal_disk(p.metal_mask, cx, cy, std::max(1.0, r));
  }
  return p;
}

PhantomImage two_disk_phantom(int size) {
  const double n = size;
  PhantomImage p{Tensor({size, size}), Tensor({size, size})};
  add_ellipse(p.attenuation, 0.0, 0.0, 0.42 * n, 0.34 * n, 0.0, 0.4, true);
  add_ellipse(p.attenuation, 0.0, 0.18 * n, 0.08 * n, 0.05 * n, 0.0, 0.55, true);
  add_metal_disk(p.metal_mask, -0.18 * n, 0.0, std::max(1.5, 0.045 * n));
  add_metal_disk(p.metal_mask, 0.18 * n, 0.0, std::max(1.5, 0.045 * n));
  return p;
}

}  // namespace asmamba::ct
