#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "asmamba/freq_nets.hpp"
#include "asmamba/ops.hpp"
#include "asmamba/spectral.hpp"
#include "grad_check.hpp"

using namespace asmamba;
using namespace asmamba::freq;
namespace sp = asmamba::spectral;

namespace {

Tensor random_map(std::vector<int> shape, std::uint64_t seed) {
  Rng rng(seed);
  return randn(std::move(shape), 1.0, rng);
}

Var probe(const Var& y, std::uint64_t seed = 77) { return ops::sum(ops::mul_const(y, random_map(y.shape(), seed))); }

}  // namespace

TEST(Spectrum, ConstantImageIsDcOnly) {
  const sp::Spectrum s = sp::amplitude_phase_split(Tensor({1, 4, 6}, 0.5));
  ASSERT_EQ(s.amplitude.shape(), (std::vector<int>{1, 4, 4}));
  EXPECT_NEAR(s.amplitude[0], 0.5 * 24, 1e-12);
  EXPECT_EQ(s.phase[0], 0.0);
  for (std::size_t i = 1; i < s.amplitude.size(); ++i) EXPECT_NEAR(s.amplitude[i], 0.0, 1e-12);
}

TEST(Spectrum, ParsevalAgainstFullTransform) {
  const int h = 6, w = 7;
  const Tensor x = random_map({1, h, w}, 1);
  const auto half = sp::rfft2(x.data(), h, w);
  const auto full = sp::fft2(x.data(), h, w);
  const int wh = sp::half_width(w);
  double half_energy = 0.0, full_energy = 0.0;
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < wh; ++v) {
      const double weight = (v == 0 || (w % 2 == 0 && v == w / 2)) ? 1.0 : 2.0;
      half_energy += weight * std::norm(half[static_cast<std::size_t>(u * wh + v)]);
      EXPECT_NEAR(std::abs(half[static_cast<std::size_t>(u * wh + v)] - full[static_cast<std::size_t>(u * w + v)]),
                  0.0, 1e-12);
    }
  }
  for (const auto& z : full) full_energy += std::norm(z);
  EXPECT_NEAR(half_energy / (h * w), x.sum_squares(), 1e-9);
  EXPECT_NEAR(full_energy / (h * w), x.sum_squares(), 1e-9);
}

TEST(Spectrum, SplitRecombineRoundTrip) {
  for (int w : {8, 9}) {
    const Tensor x = random_map({3, 8, w}, 2);
    EXPECT_LT(max_abs_diff(sp::recombine(sp::amplitude_phase_split(x)), x), 1e-9);
  }
}

TEST(Spectrum, PhaseWrapped) {
  const sp::Spectrum s = sp::amplitude_phase_split(random_map({2, 6, 6}, 3));
  for (double p : s.phase.values()) {
    EXPECT_GT(p, -std::numbers::pi);
    EXPECT_LE(p, std::numbers::pi);
  }
  for (double a : s.amplitude.values()) EXPECT_GE(a, 0.0);
  EXPECT_NEAR(sp::wrap_angle(3 * std::numbers::pi), std::numbers::pi, 1e-12);
}

TEST(SpectralGradient, TransformsAndPolarOps) {
  const Tensor x = random_map({2, 4, 6}, 4);
  EXPECT_LT(gradcheck::check_input(x, [](const Var& v) { return probe(sp::rfft2(v)); }).rel_error, 1e-3);
  const Tensor z = random_map({4, 4, 4}, 5);
  EXPECT_LT(gradcheck::check_input(z, [](const Var& v) { return probe(sp::irfft2(v, 6)); }).rel_error, 1e-3);
  const Tensor z5 = random_map({2, 4, 3}, 6);
  EXPECT_LT(gradcheck::check_input(z5, [](const Var& v) { return probe(sp::irfft2(v, 5)); }).rel_error, 1e-3);
  EXPECT_LT(gradcheck::check_input(z, [](const Var& v) { return probe(sp::magnitude(v)); }).rel_error, 1e-3);
  EXPECT_LT(gradcheck::check_input(z, [](const Var& v) { return probe(sp::phasor(v)); }).rel_error, 1e-3);
  const Tensor amp = random_map({2, 4, 4}, 7);
  EXPECT_LT(gradcheck::check_input(amp, [&](const Var& v) { return probe(sp::polar_mul(v, constant(z))); }).rel_error,
            1e-3);
  EXPECT_LT(gradcheck::check_input(z, [&](const Var& v) { return probe(sp::polar_mul(constant(amp), v)); }).rel_error,
            1e-3);
}

TEST(DenStage, ZeroEnhancementIsIdentity) {
  ParamStore store;
  Rng rng(8);
  const Enhancement g = Enhancement::create(store, "g", 3, rng);
  const Tensor x = random_map({3, 8, 10}, 9);
  Context ctx;
  EXPECT_LT(max_abs_diff(den_stage(ctx, g, constant(x)).value(), x), 1e-5);
}

TEST(DenStage, PreservesPhase) {
  ParamStore store;
  Rng rng(10);
  Enhancement g = Enhancement::create(store, "g", 2, rng);
  g.c2.w->value = randn(g.c2.w->value.shape(), 0.5, rng);
  const Tensor x = random_map({2, 8, 8}, 11);
  Context ctx;
  const Tensor y = den_stage(ctx, g, constant(x)).value();
  const sp::Spectrum in = sp::amplitude_phase_split(x);
  const sp::Spectrum out = sp::amplitude_phase_split(y);
  int checked = 0;
  for (std::size_t i = 0; i < in.phase.size(); ++i) {
    if (out.amplitude[i] > 1e-6) {
      EXPECT_LT(std::abs(sp::wrap_angle(out.phase[i] - in.phase[i])), 1e-6);
      ++checked;
    }
  }
  EXPECT_GT(checked, 0);
}

TEST(DenStage, AmplitudeDoublingDoublesSinusoid) {
  // c1 = identity and c2 = identity give g(A) = s * relu(A / s) = A for A >= 0.
  ParamStore store;
  Rng rng(12);
  Enhancement g = Enhancement::create(store, "g", 1, rng);
  g.c1.set_identity();
  g.c2.set_identity();
  Tensor x({1, 8, 8});
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) x.at(0, i, j) = std::sin(2 * std::numbers::pi * (2 * i + j) / 8.0);
  }
  Context ctx;
  EXPECT_LT(max_abs_diff(den_stage(ctx, g, constant(x)).value(), x * 2.0), 1e-5);
}

TEST(Den, IdentityConfiguration) {
  ParamStore store;
  Rng rng(13);
  Den den = Den::create(store, "den", 2, 2, 2, rng);
  den.make_identity();
  const Tensor x = random_map({2, 8, 8}, 14);
  Context ctx;
  EXPECT_LT(max_abs_diff(den.forward(ctx, constant(x)).value(), x), 1e-5);
}

TEST(Den, ShapeContract) {
  ParamStore store;
  Rng rng(15);
  Den den = Den::create(store, "den", 1, 1, 4, rng);
  Context ctx;
  EXPECT_EQ(den.forward(ctx, constant(random_map({1, 6, 10}, 16))).shape(), (std::vector<int>{1, 6, 10}));
}

TEST(Den, GradientsMatchFiniteDifferences) {
  ParamStore store;
  Rng rng(17);
  Den den = Den::create(store, "den", 1, 1, 3, rng);
  for (int s = 0; s < 3; ++s) den.stage(s).c2.w->value = randn(den.stage(s).c2.w->value.shape(), 0.3, rng);
  const Tensor x = random_map({1, 8, 8}, 18);
  const Tensor w = random_map({1, 8, 8}, 19);
  auto reports = gradcheck::check_params(store, [&](Context& ctx) {
    return ops::sum(ops::mul_const(den.forward(ctx, constant(x)), w));
  });
  for (const auto& r : reports) EXPECT_LT(r.rel_error, 1e-3) << r.name;
}

TEST(UNet, ShapeContract) {
  ParamStore store;
  Rng rng(20);
  UNetTopology topo{{1, 1, 1, 1, 1}, 4};
  UNet net = UNet::create(store, "h", 3, 3, topo, {}, rng);
  EXPECT_EQ(net.depth(), 2);
  Context ctx;
  EXPECT_EQ(net.forward(ctx, constant(random_map({3, 32, 32}, 21))).shape(), (std::vector<int>{3, 32, 32}));
}

TEST(UNet, IdentityBlocksStayFinite) {
  ParamStore store;
  Rng rng(22);
  UNet net = UNet::create(store, "h", 3, 3, UNetTopology{{1, 2, 1}, 4}, {}, rng);
  net.make_blocks_identity();
  Context ctx;
  const Tensor y = net.forward(ctx, constant(random_map({3, 8, 8}, 23))).value();
  for (double v : y.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(UNet, IndivisibleSizeThrows) {
  ParamStore store;
  Rng rng(24);
  UNet net = UNet::create(store, "h", 1, 1, UNetTopology{{1, 1, 1, 1, 1}, 2}, {}, rng);
  Context ctx;
  EXPECT_THROW(net.forward(ctx, constant(Tensor({1, 6, 8}))), std::invalid_argument);
  EXPECT_THROW(net.forward(ctx, constant(Tensor({2, 8, 8}))), std::invalid_argument);
}

TEST(UNetTopology, Validation) {
  EXPECT_THROW((UNetTopology{{1, 1}, 4}).validate(), std::invalid_argument);
  EXPECT_THROW((UNetTopology{{1, 0, 1}, 4}).validate(), std::invalid_argument);
  EXPECT_EQ(UNetTopology{}.depth(), 4);
  EXPECT_NO_THROW(UNetTopology{}.validate());
}

TEST(UNet, GradientsMatchFiniteDifferences) {
  for (auto kind : {BlockKind::Mamba, BlockKind::Conv}) {
    ParamStore store;
    Rng rng(25);
    UNetOptions opts;
    opts.block = kind;
    opts.down = kind == BlockKind::Mamba ? DownKind::Haar : DownKind::AvgPool;
    UNet net = UNet::create(store, "h", 3, 3, UNetTopology{{1, 1, 1}, 2}, opts, rng);
    const Tensor x = random_map({3, 8, 8}, 26);
    const Tensor w = random_map({3, 8, 8}, 27);
    auto reports = gradcheck::check_params(store, [&](Context& ctx) {
      return ops::sum(ops::mul_const(net.forward(ctx, constant(x)), w));
    }, 6);
    for (const auto& r : reports) EXPECT_LT(r.rel_error, 1e-3) << r.name;
  }
}

TEST(UNet, Deterministic) {
  ParamStore store;
  Rng rng(28);
  UNet net = UNet::create(store, "h", 3, 3, UNetTopology{{1, 1, 1}, 4}, {}, rng);
  const Tensor x = random_map({3, 8, 8}, 29);
  Context a, b;
  EXPECT_EQ(net.forward(a, constant(x)).value().storage(), net.forward(b, constant(x)).value().storage());
}

TEST(ConvBranch, ShapeContract) {
  ParamStore store;
  Rng rng(30);
  ConvBranch c = ConvBranch::create(store, "c", 1, 1, 4, rng);
  Context ctx;
  EXPECT_EQ(c.forward(ctx, constant(random_map({1, 6, 6}, 31))).shape(), (std::vector<int>{1, 6, 6}));
}
