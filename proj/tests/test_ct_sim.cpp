#include <gtest/gtest.h>

#include <cmath>

#include "asmamba/ct_sim.hpp"

using namespace asmamba;
using namespace asmamba::ct;

namespace {

const ProjectionGeometry& geo64() {
  static const ProjectionGeometry g = ProjectionGeometry::for_image(64);
  return g;
}

Tensor random_image(int n, std::uint64_t seed) {
  Rng rng(seed);
  return rand_uniform({n, n}, 0.0, 1.0, rng);
}

double masked_energy(const ArtifactPair& p) {
  double e = 0.0;
  for (std::size_t i = 0; i < p.x_m.size(); ++i) e += p.mask_i[i] * std::pow(p.x_m[i] - p.x_gt[i], 2);
  return e;
}

}  // namespace

TEST(Geometry, CoversDiagonal) {
  const ProjectionGeometry g = geo64();
  EXPECT_NO_THROW(g.validate());
  EXPECT_GE(g.detectors() * g.detector_spacing, 64 * std::sqrt(2.0));
  ProjectionGeometry bad = g;
  bad.n_detectors = 10;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = g;
  bad.n_angles = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Radon, DiskLineIntegrals) {
  // Chords within ~3 px of tangency are dominated by the pixelated rim, so
  // the per-offset bound skips them; the mean covers every |s| < r.
  const double r = 20.0;
  const Sinogram s = radon(disk_image(64, 0.0, 0.0, r), geo64());
  double total = 0.0;
  int count = 0;
  for (int a = 0; a < geo64().n_angles; ++a) {
    for (int k = 0; k < geo64().detectors(); ++k) {
      const double off = geo64().offset(k);
      if (std::abs(off) >= r) continue;
      const double expect = 2.0 * std::sqrt(r * r - off * off);
      const double rel = std::abs(s.at(a, k) - expect) / expect;
      if (std::abs(off) <= r - 3.0) EXPECT_LT(rel, 0.02) << "angle " << a << " offset " << off;
      total += rel;
      ++count;
    }
  }
  EXPECT_LT(total / count, 0.02);
}

TEST(Radon, ZeroImage) {
  const Sinogram s = radon(Tensor({64, 64}), geo64());
  for (double v : s.values()) EXPECT_EQ(v, 0.0);
}

TEST(Radon, Linear) {
  const ProjectionGeometry g = ProjectionGeometry::for_image(32, 30);
  const Tensor f = random_image(32, 1), h = random_image(32, 2);
  const Sinogram lhs = radon(f * 1.5 + h * -0.7, g);
  const Sinogram rhs = radon(f, g) * 1.5 + radon(h, g) * -0.7;
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-6);
}

TEST(Radon, RejectsBadInput) {
  EXPECT_THROW(radon(Tensor({32, 16}), geo64()), std::invalid_argument);
  EXPECT_THROW(radon(Tensor({32, 32}), geo64()), std::invalid_argument);
  EXPECT_THROW(radon(Tensor({4, 4}), ProjectionGeometry::for_image(4)), std::invalid_argument);
}

TEST(Fbp, GaussianRoundTrip) {
  Tensor g({64, 64});
  for (int i = 0; i < 64; ++i) {
    for (int j = 0; j < 64; ++j) {
      const double x = j - 31.5, y = 31.5 - i;
      g.at(i, j) = std::exp(-(x * x + y * y) / 72.0);
    }
  }
  const Tensor rec = fbp(radon(g, geo64()), geo64());
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 64; ++i) {
    for (int j = 0; j < 64; ++j) {
      const double x = j - 31.5, y = 31.5 - i;
      if (x * x + y * y > 31.5 * 31.5) continue;
      num += std::pow(rec.at(i, j) - g.at(i, j), 2);
      den += g.at(i, j) * g.at(i, j);
    }
  }
  EXPECT_LT(std::sqrt(num / den), 0.05);
}

TEST(Fbp, ZeroAndScaling) {
  const ProjectionGeometry g = ProjectionGeometry::for_image(32, 30);
  const Tensor zero = fbp(Sinogram({30, g.detectors()}), g);
  for (double v : zero.values()) EXPECT_EQ(v, 0.0);
  const Sinogram s = radon(random_image(32, 3), g);
  EXPECT_LT(max_abs_diff(fbp(s * 2.5, g), fbp(s, g) * 2.5), 1e-9);
  EXPECT_THROW(fbp(Sinogram({29, g.detectors()}), g), std::invalid_argument);
}

TEST(BeamHardening, ScalarValues) {
  EXPECT_EQ(beam_hardening_error(0.0, 1.0), 0.0);
  EXPECT_NEAR(beam_hardening_error(1.0, 1.0), std::log(std::sinh(1.0)), 1e-12);
  EXPECT_NEAR(beam_hardening_error(1.0, 1.0), 0.16144, 1e-5);
  EXPECT_NEAR(beam_hardening_error(2.0, 1e-9), 0.0, 1e-15);
  EXPECT_TRUE(std::isfinite(beam_hardening_error(700.0, 1.0)));
  EXPECT_NEAR(beam_hardening_error(100.0, 1.0), 100.0 - std::log(200.0), 1e-9);
  EXPECT_THROW(beam_hardening_error(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(beam_hardening_error(-1.0, 1.0), std::invalid_argument);
}

TEST(BeamHardening, MonotoneAndContinuous) {
  double prev = 0.0;
  for (double p = 1e-6; p < 800.0; p *= 1.37) {
    const double e = beam_hardening_error(p, 1.0);
    EXPECT_GT(e, prev) << p;
    EXPECT_GE(e, 0.0);
    prev = e;
  }
  // Branch boundaries.
  for (double x : {1e-4, 20.0}) {
    EXPECT_NEAR(beam_hardening_error(x * (1 - 1e-12), 1.0), beam_hardening_error(x * (1 + 1e-12), 1.0),
                1e-10 * std::max(1.0, x));
  }
  for (double eta : {0.5, 1.0, 2.0}) EXPECT_LT(beam_hardening_error(3.0, eta), beam_hardening_error(3.0, 2 * eta));
}

TEST(InterpolateTrace, LinearRampReproduced) {
  Sinogram s({3, 10});
  Tensor trace({3, 10});
  for (int a = 0; a < 3; ++a) {
    for (int k = 0; k < 10; ++k) s.at(a, k) = 0.5 * k - a;
    for (int k = 3 + a; k < 6 + a; ++k) trace.at(a, k) = 1.0;
  }
  EXPECT_LT(max_abs_diff(interpolate_trace(s, trace), s), 1e-12);
}

TEST(InterpolateTrace, BoundaryAndFullRows) {
  Sinogram s({2, 5}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  Tensor trace({2, 5}, {1, 1, 0, 0, 1, 1, 1, 1, 1, 1});
  const Sinogram out = interpolate_trace(s, trace);
  EXPECT_EQ(out.at(0, 0), 3.0);
  EXPECT_EQ(out.at(0, 1), 3.0);
  EXPECT_EQ(out.at(0, 4), 4.0);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(out.at(1, k), 8.0);
  EXPECT_THROW(interpolate_trace(s, Tensor({2, 4})), std::invalid_argument);
}

TEST(LiPrior, EmptyTraceIsPlainFbp) {
  const ProjectionGeometry g = ProjectionGeometry::for_image(32, 30);
  const Sinogram s = radon(random_image(32, 4), g);
  EXPECT_EQ(li_prior(s, Tensor(s.shape()), g).storage(), fbp(s, g).storage());
}

TEST(LiPrior, ConstantSinogram) {
  const ProjectionGeometry g = ProjectionGeometry::for_image(32, 30);
  const Sinogram s({30, g.detectors()}, 2.0);
  const Tensor trace = metal_trace_mask(disk_image(32, 3.0, -2.0, 3.0), g);
  EXPECT_LT(max_abs_diff(li_prior(s, trace, g), fbp(s, g)), 1e-12);
}

TEST(LiPrior, RampSinogramUnchanged) {
  const ProjectionGeometry g = ProjectionGeometry::for_image(32, 30);
  Sinogram s({30, g.detectors()});
  for (int a = 0; a < 30; ++a) {
    for (int k = 0; k < g.detectors(); ++k) s.at(a, k) = 0.1 * k + 0.01 * a;
  }
  const Tensor trace = metal_trace_mask(disk_image(32, 0.0, 0.0, 4.0), g);
  EXPECT_LT(max_abs_diff(li_prior(s, trace, g), fbp(s, g)), 1e-9);
}

TEST(LiPrior, Idempotent) {
  const ProjectionGeometry g = ProjectionGeometry::for_image(32, 30);
  const Sinogram s = radon(random_image(32, 5), g);
  const Tensor trace = metal_trace_mask(disk_image(32, 5.0, 5.0, 3.0), g);
  const Sinogram once = interpolate_trace(s, trace);
  EXPECT_LT(max_abs_diff(interpolate_trace(once, trace), once), 1e-12);
  EXPECT_LT(max_abs_diff(li_prior(once, trace, g), li_prior(s, trace, g)), 1e-6);
}

TEST(Synthesize, EmptyMaskIsCleanPair) {
  PhantomImage ph{disk_image(64, 0.0, 0.0, 20.0) * 0.4, Tensor({64, 64})};
  const ArtifactPair p = synthesize_pair(ph, 1.0, geo64());
  EXPECT_EQ(p.x_m.storage(), p.x_gt.storage());
  EXPECT_EQ(p.x_l.storage(), fbp(radon(p.x_gt, geo64()), geo64()).storage());
  for (double v : p.mask_i.values()) EXPECT_EQ(v, 1.0);
}

TEST(Synthesize, ArtifactEnergyIncreasesWithEta) {
  const PhantomImage ph = two_disk_phantom(64);
  double prev = -1.0;
  for (double eta : {0.5, 1.0, 2.0}) {
    const double e = masked_energy(synthesize_pair(ph, eta, geo64()));
    EXPECT_GT(e, prev) << eta;
    prev = e;
  }
}

TEST(Synthesize, DarkBandBetweenDisks) {
  const int n = 64;
  const ArtifactPair p = synthesize_pair(two_disk_phantom(n), 1.0, geo64());
  double m = 0.0, gt = 0.0;
  int count = 0;
  for (int j = n / 2 - 6; j < n / 2 + 6; ++j) {
    for (int i = n / 2 - 1; i <= n / 2; ++i) {
      m += p.x_m.at(i, j);
      gt += p.x_gt.at(i, j);
      ++count;
    }
  }
  EXPECT_LT(m / count, gt / count - 0.01);
}

TEST(Synthesize, PairInvariants) {
  Rng rng(6);
  const PhantomImage ph = random_phantom(64, rng);
  ASSERT_TRUE(ph.has_metal());
  const ArtifactPair p = synthesize_pair(ph, 2.0, geo64());
  for (std::size_t i = 0; i < p.x_m.size(); ++i) {
    EXPECT_EQ(p.mask_i[i], 1.0 - ph.metal_mask[i]);
    EXPECT_GE(p.x_m[i], 0.0);
    EXPECT_LE(p.x_m[i], 1.0);
    if (ph.metal_mask[i] != 0.0) EXPECT_EQ(p.x_m[i], 1.0);
    EXPECT_TRUE(std::isfinite(p.x_l[i]));
  }
  EXPECT_EQ(p.x_l.shape(), p.x_gt.shape());
}

TEST(Synthesize, LiPriorCloserThanCorruptedImage) {
  const ArtifactPair p = synthesize_pair(two_disk_phantom(64), 2.0, geo64());
  double em = 0.0, el = 0.0;
  for (std::size_t i = 0; i < p.x_m.size(); ++i) {
    em += p.mask_i[i] * std::pow(p.x_m[i] - p.x_gt[i], 2);
    el += p.mask_i[i] * std::pow(p.x_l[i] - p.x_gt[i], 2);
  }
  EXPECT_LT(el, em);
}

TEST(Synthesize, Validation) {
  PhantomImage bad{Tensor({64, 64}), Tensor({64, 64})};
  bad.metal_mask[3] = 0.5;
  EXPECT_THROW(synthesize_pair(bad, 1.0, geo64()), std::invalid_argument);
  PhantomImage neg{Tensor({64, 64}, -1.0), Tensor({64, 64})};
  EXPECT_THROW(synthesize_pair(neg, 1.0, geo64()), std::invalid_argument);
  EXPECT_THROW(synthesize_pair(two_disk_phantom(64), 0.0, geo64()), std::invalid_argument);
}

TEST(Phantoms, SeededReproducible) {
  Rng a(9), b(9);
  const PhantomImage p = random_phantom(48, a), q = random_phantom(48, b);
  EXPECT_EQ(p.attenuation.storage(), q.attenuation.storage());
  EXPECT_EQ(p.metal_mask.storage(), q.metal_mask.storage());
  EXPECT_NO_THROW(p.validate());
}
