#pragma once

#include <numbers>

#include "asmamba/random.hpp"
#include "asmamba/tensor.hpp"

// Parallel-beam CT simulation of beam-hardening metal artifacts.
//
// Images are square (N, N) grids with pixel (i, j) centred at
//   x = j - (N-1)/2,  y = (N-1)/2 - i
// in pixel units. A ray at angle theta and offset s is the line
// x cos(theta) + y sin(theta) = s.
namespace asmamba::ct {

/// Sinogram: (n_angles, n_detectors) line integrals in pixel-length units.
using Sinogram = Tensor;

struct PhantomImage {
  Tensor attenuation;  // (N, N), finite, >= 0
  Tensor metal_mask;   // (N, N), {0, 1}

  void validate() const;
  bool has_metal() const;
};

struct ProjectionGeometry {
  int image_size = 64;
  int n_angles = 180;
  int n_detectors = 0;  // 0 selects the smallest count covering the diagonal
  double detector_spacing = 1.0;
  double angle_range = std::numbers::pi;

  static ProjectionGeometry for_image(int image_size, int n_angles = 180);
  /// Throws std::invalid_argument for a degenerate geometry.
  void validate() const;
  int detectors() const;
  double angle(int a) const { return angle_range * a / n_angles; }
  double offset(int k) const { return (k - 0.5 * (detectors() - 1)) * detector_spacing; }
};

struct ArtifactPair {
  Tensor x_m;     // corrupted image
  Tensor x_gt;    // clean image
  Tensor x_l;     // linear-interpolation prior
  Tensor mask_i;  // 1 outside metal
};

/// Line integrals by bilinear sampling along each ray (step 0.25 px).
Sinogram radon(const Tensor& image, const ProjectionGeometry& geo);
/// Ram-Lak filtered back-projection onto an image_size grid.
Tensor fbp(const Sinogram& sino, const ProjectionGeometry& geo);

/// ln(sinh(x) / x) with x = eta * p, continuous at 0 and overflow-safe.
double beam_hardening_error(double p, double eta);
Sinogram beam_hardening_error(const Sinogram& metal_trace, double eta);

/// Replaces masked detector bins of each projection by linear interpolation
/// between the nearest unmasked neighbours on that row.
Sinogram interpolate_trace(const Sinogram& sino, const Tensor& trace_mask);
/// fbp(interpolate_trace(sino, trace_mask)).
Tensor li_prior(const Sinogram& sino, const Tensor& trace_mask, const ProjectionGeometry& geo);
/// radon(metal_mask) > 1e-6.
Tensor metal_trace_mask(const Tensor& metal_mask, const ProjectionGeometry& geo);

struct SimulationOptions {
  double pixel_size = 0.2;      // physical length of one pixel for the metal thickness
  double artifact_gain = 5.0;   // absorbs the reconstruction constant of the artifact term
  double metal_value = 1.0;     // display value written into metal pixels
  double metal_attenuation = 4.0;
};

/// The beam-hardening artifact image -gain * fbp(e(eta * pixel_size * radon(mask))) / pixel_size.
Tensor artifact_term(const Tensor& metal_mask, double eta, const ProjectionGeometry& geo,
                     const SimulationOptions& opts = {});

ArtifactPair synthesize_pair(const PhantomImage& phantom, double eta, const ProjectionGeometry& geo,
                             const SimulationOptions& opts = {});

/// Filled disk with anti-aliased edges (16x supersampling), value 1 inside.
Tensor disk_image(int size, double cx, double cy, double radius);
/// Body ellipse with random inner structures and 1-3 small metal disks.
PhantomImage random_phantom(int size, Rng& rng);
/// Fixed soft-tissue body with two metal disks on the horizontal axis.
PhantomImage two_disk_phantom(int size);

}  // namespace asmamba::ct
