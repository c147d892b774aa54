#include <gtest/gtest.h>

#include <cmath>

#include "asmamba/ops.hpp"
#include "asmamba/unroll.hpp"
#include "asmamba/wavelet.hpp"
#include "grad_check.hpp"

using namespace asmamba;
using namespace asmamba::unroll;

namespace {

Tensor noise(std::vector<int> shape, std::uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  return randn(std::move(shape), sd, rng);
}

Tensor random_mask(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Tensor m({1, h, w}, 1.0);
  std::bernoulli_distribution metal(0.15);
  for (double& v : m.values()) v = metal(rng) ? 0.0 : 1.0;
  return m;
}

Var cst(double v) { return constant(Tensor::scalar(v)); }

StepVars steps(double t1, double t2, double t3, double g, double d) { return resolve(FixedSteps{t1, t2, t3, g, d}); }

bool all_finite(const Tensor& t) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Manet identity_manet(ParamStore& store, int stages, Domain d, std::uint64_t seed) {
  Rng rng(seed);
  ManetOptions opts;
  opts.stages = stages;
  opts.domain = d;
  Manet m = Manet::create(store, "manet", 1, opts, rng);
  for (int k = 0; k < stages; ++k) {
    m.wm_a(k).make_identity();
    m.wm_x(k).make_identity();
  }
  m.fix_steps(FixedSteps{0.5, 0.5, 0.5, 1.0, 0.0});
  return m;
}

}  // namespace

TEST(InitReconstruction, UnmodifiedBandsReturnImage) {
  const Tensor x = noise({1, 8, 12}, 1);
  const Var packed = wavelet::dwt2(constant(x));
  const Var u0 = init_reconstruction(ops::slice_channels(packed, 0, 1), ops::slice_channels(packed, 1, 3));
  EXPECT_LT(max_abs_diff(u0.value(), x), 1e-6);
}

TEST(InitReconstruction, ZeroBandsGiveZero) {
  const Var u0 = init_reconstruction(constant(Tensor({1, 4, 4})), constant(Tensor({3, 4, 4})));
  EXPECT_EQ(u0.value().max_abs(), 0.0);
  EXPECT_EQ(u0.shape(), (std::vector<int>{1, 8, 8}));
}

TEST(InitReconstruction, RandomBandsAreRecovered) {
  const Tensor ll = noise({1, 5, 6}, 2), hf = noise({3, 5, 6}, 3);
  const Var u0 = init_reconstruction(constant(ll), constant(hf));
  const Tensor back = wavelet::dwt2(u0).value();
  const Tensor expected = ops::concat_channels({constant(ll), constant(hf)}).value();
  EXPECT_LT(max_abs_diff(back, expected), 1e-6);
}

TEST(InitReconstruction, InconsistentBandsThrow) {
  EXPECT_THROW(init_reconstruction(constant(Tensor({1, 4, 4})), constant(Tensor({2, 4, 4}))), std::invalid_argument);
  EXPECT_THROW(init_reconstruction(constant(Tensor({1, 4, 4})), constant(Tensor({3, 4, 5}))), std::invalid_argument);
}

TEST(ArtifactStep, HalfStepIsTransformedResidual) {
  for (Domain d : {Domain::Wavelet, Domain::Spatial}) {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Tensor y = noise({1, 8, 8}, 10 + s), x = noise({1, 8, 8}, 20 + s);
      const Var a_prev = transform(d, constant(noise({1, 8, 8}, 30 + s)));
      const Tensor got = artifact_step(d, a_prev, constant(y), constant(x), cst(0.5)).value();
      const Tensor want = transform(d, ops::sub(constant(y), constant(x))).value();
      EXPECT_EQ(max_abs_diff(got, want), 0.0);
    }
  }
}

TEST(ArtifactStep, ZeroStepKeepsPrevious) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Var a_prev = constant(noise({4, 4, 4}, 40 + s));
    const Tensor got =
        artifact_step(Domain::Wavelet, a_prev, constant(noise({1, 8, 8}, s)), constant(noise({1, 8, 8}, 50 + s)),
                      cst(0.0))
            .value();
    EXPECT_EQ(max_abs_diff(got, a_prev.value()), 0.0);
  }
}

TEST(ArtifactStep, QuarterStepByHand) {
  // y - x = 0.8 everywhere on 2x2: the orthonormal LL is 0.8 * 4 / 2 = 1.6,
  // detail bands vanish. A_prev bands are (1, 2, 3, 4).
  const Var a_prev = constant(Tensor({4, 1, 1}, {1.0, 2.0, 3.0, 4.0}));
  const Tensor got = artifact_step(Domain::Wavelet, a_prev, constant(Tensor({1, 2, 2}, 1.0)),
                                   constant(Tensor({1, 2, 2}, 0.2)), cst(0.25))
                         .value();
  EXPECT_NEAR(got[0], 0.5 * 1.0 + 0.5 * 1.6, 1e-12);
  EXPECT_NEAR(got[1], 1.0, 1e-12);
  EXPECT_NEAR(got[2], 1.5, 1e-12);
  EXPECT_NEAR(got[3], 2.0, 1e-12);
}

TEST(ImageStep, ZeroStepKeepsPrevious) {
  const Var x_prev = constant(noise({4, 4, 4}, 60));
  const Tensor got = image_step(Domain::Wavelet, x_prev, constant(noise({1, 8, 8}, 61)),
                                constant(noise({4, 4, 4}, 62)), constant(noise({1, 8, 8}, 63)),
                                steps(0.5, 0.0, 0.5, 0.7, 0.4))
                         .value();
  EXPECT_EQ(max_abs_diff(got, x_prev.value()), 0.0);
}

TEST(ImageStep, HalfStepPureFidelity) {
  for (Domain d : {Domain::Wavelet, Domain::Spatial}) {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Var y = constant(noise({1, 8, 8}, 70 + s));
      const Var a_k = transform(d, constant(noise({1, 8, 8}, 80 + s)));
      const Tensor got = image_step(d, transform(d, constant(noise({1, 8, 8}, 90 + s))), y, a_k,
                                    constant(noise({1, 8, 8}, 100 + s)), steps(0.5, 0.5, 0.5, 1.0, 0.0))
                             .value();
      const Tensor want = transform(d, ops::sub(y, inverse(d, a_k))).value();
      EXPECT_EQ(max_abs_diff(got, want), 0.0);
    }
  }
}

TEST(ImageStep, BalancedWeightsByHand) {
  // 4x4 constants: y = 3, A = 1 (LL coefficient 2), u_prev = 5. Each 2x2 block
  // has LL = 2 * value, so X_tilde LL = (2 * (3 - 1) + 2 * 5) / 2 = 7.
  Tensor a_k({4, 2, 2});
  for (int i = 0; i < 4; ++i) a_k[static_cast<std::size_t>(i)] = 2.0;
  const Tensor got = image_step(Domain::Wavelet, constant(noise({4, 2, 2}, 110)), constant(Tensor({1, 4, 4}, 3.0)),
                                constant(a_k), constant(Tensor({1, 4, 4}, 5.0)), steps(0.5, 0.5, 0.5, 1.0, 1.0))
                         .value();
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(got[static_cast<std::size_t>(i)], 7.0, 1e-12);
  for (std::size_t i = 4; i < got.size(); ++i) EXPECT_NEAR(got[i], 0.0, 1e-12);
}

TEST(ImageStep, DegenerateWeightThrows) {
  EXPECT_THROW(image_step(Domain::Spatial, constant(Tensor({1, 2, 2})), constant(Tensor({1, 2, 2})),
                          constant(Tensor({1, 2, 2})), constant(Tensor({1, 2, 2})), steps(0.5, 0.5, 0.5, 0.0, 0.0)),
               std::domain_error);
}

TEST(UUpdate, SpecialCases) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Var u_prev = constant(noise({1, 8, 8}, 120 + s));
    const Var x_k = constant(noise({4, 4, 4}, 130 + s));
    EXPECT_EQ(max_abs_diff(u_update(Domain::Wavelet, u_prev, x_k, cst(0.5)).value(), wavelet::idwt2(x_k).value()),
              0.0);
    EXPECT_EQ(max_abs_diff(u_update(Domain::Wavelet, u_prev, x_k, cst(0.0)).value(), u_prev.value()), 0.0);
  }
}

TEST(UUpdate, FixedPointForAnyStep) {
  const Var u = constant(noise({1, 8, 8}, 140));
  const Var x_k = wavelet::dwt2(u);
  for (double tau : {0.0, 0.1, 0.37, 0.5, 0.9}) {
    EXPECT_LT(max_abs_diff(u_update(Domain::Wavelet, u, x_k, cst(tau)).value(), u.value()), 1e-12);
  }
}

TEST(MaskedObservation, KeepsYOutsideMetal) {
  const Tensor y = noise({1, 6, 6}, 150), u = noise({1, 6, 6}, 151), m = random_mask(6, 6, 152);
  const Tensor got = masked_observation(constant(y), m, constant(u)).value();
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i], m[i] != 0.0 ? y[i] : u[i]);
}

TEST(Steps, InitialValues) {
  ParamStore store;
  const LearnableSteps s = LearnableSteps::create(store, "st");
  Context ctx;
  const StepVars v = resolve(ctx, s);
  EXPECT_DOUBLE_EQ(v.tau1.value()[0], 0.5);
  EXPECT_DOUBLE_EQ(v.tau3.value()[0], 0.5);
  EXPECT_NEAR(v.gamma.value()[0], 1.0, 1e-12);
  EXPECT_NEAR(v.delta.value()[0], 1.0, 1e-12);
  EXPECT_NE(store.find("st.tau2"), nullptr);
}

TEST(Prox, IdentityAfterReset) {
  for (int channels : {1, 4}) {
    ParamStore store;
    Rng rng(160);
    Prox p = Prox::create(store, "p", channels, 2, 4, {}, rng);
    p.make_identity();
    const Tensor x = noise({channels, 6, 6}, 161);
    Context ctx;
    EXPECT_EQ(max_abs_diff(p.forward(ctx, constant(x)).value(), x), 0.0);
  }
}

TEST(Manet, IdentityReductionOnRandomPairs) {
  for (Domain d : {Domain::Wavelet, Domain::Spatial}) {
    ParamStore store;
    const Manet m = identity_manet(store, 1, d, 170);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Tensor y = noise({1, 16, 16}, 200 + s), u0 = noise({1, 16, 16}, 300 + s);
      Context ctx;
      const ManetResult r = m.run(ctx, constant(y), random_mask(16, 16, 400 + s), constant(u0));
      EXPECT_LT(max_abs_diff(r.u_final.value(), u0), 1e-5);
      EXPECT_EQ(r.u0.value().storage(), u0.storage());
    }
  }
}

TEST(Manet, IdentityReductionHoldsAcrossStages) {
  ParamStore store;
  const Manet m = identity_manet(store, 3, Domain::Wavelet, 171);
  const Tensor u0 = noise({1, 16, 16}, 172);
  Context ctx;
  const ManetResult r = m.run(ctx, constant(noise({1, 16, 16}, 173)), random_mask(16, 16, 174), constant(u0));
  EXPECT_LT(max_abs_diff(r.u_final.value(), u0), 1e-5);
}

TEST(Manet, StageCountContract) {
  ParamStore store;
  Rng rng(180);
  ManetOptions opts;
  opts.stages = 0;
  EXPECT_THROW(Manet::create(store, "m", 1, opts, rng), std::invalid_argument);
  for (int t : {1, 2}) {
    ParamStore s2;
    opts.stages = t;
    const Manet m = Manet::create(s2, "m", 1, opts, rng);
    Context ctx;
    const Tensor y = noise({1, 8, 8}, 181);
    const ManetResult r = m.run(ctx, constant(y), Tensor({1, 8, 8}, 1.0), constant(y));
    EXPECT_EQ(m.stages(), t);
    ASSERT_EQ(r.states.size(), static_cast<std::size_t>(t + 1));
    EXPECT_EQ(r.states.back().k, t);
    EXPECT_EQ(r.states[0].a_w.value().max_abs(), 0.0);
    EXPECT_EQ(r.states[0].a_w.shape(), (std::vector<int>{4, 4, 4}));
  }
}

TEST(Manet, Deterministic) {
  ParamStore sa, sb;
  Rng ra(190), rb(190);
  const Manet a = Manet::create(sa, "m", 1, {}, ra), b = Manet::create(sb, "m", 1, {}, rb);
  const Tensor y = noise({1, 8, 8}, 191), u0 = noise({1, 8, 8}, 192), mask = random_mask(8, 8, 193);
  Context ca, cb;
  EXPECT_EQ(a.run(ca, constant(y), mask, constant(u0)).u_final.value().storage(),
            b.run(cb, constant(y), mask, constant(u0)).u_final.value().storage());
}

TEST(Manet, ShapeMismatchThrows) {
  ParamStore store;
  Rng rng(195);
  const Manet m = Manet::create(store, "m", 1, {}, rng);
  Context ctx;
  EXPECT_THROW(m.run(ctx, constant(Tensor({1, 8, 8})), Tensor({1, 8, 8}, 1.0), constant(Tensor({1, 4, 4}))),
               std::invalid_argument);
}

TEST(Manet, GradientsMatchFiniteDifferences) {
  for (Domain d : {Domain::Wavelet, Domain::Spatial}) {
    ParamStore store;
    Rng rng(200);
    ManetOptions opts;
    opts.domain = d;
    opts.prox_blocks = 1;
    opts.mamba.state_dim = 4;
    const Manet m = Manet::create(store, "m", 1, opts, rng);
    // Move steps off their symmetric start and open the zero-initialized lifts.
    Rng perturb(201);
    for (auto& p : store) {
      for (double& v : p.value.values()) v += std::uniform_real_distribution<double>(-0.3, 0.3)(perturb);
    }
    const Tensor y = noise({1, 8, 8}, 202), u0 = noise({1, 8, 8}, 203), mask = random_mask(8, 8, 204);
    const Tensor w = noise({1, 8, 8}, 205);
    auto reports = gradcheck::check_params(store, [&](Context& ctx) {
      return ops::sum(ops::mul_const(m.run(ctx, constant(y), mask, constant(u0)).u_final, w));
    }, 6);
    for (const auto& r : reports) EXPECT_LT(r.rel_error, 1e-3) << r.name;
  }
}

TEST(Manet, TenStagesStayFinite) {
  ParamStore store;
  Rng rng(210);
  ManetOptions opts;
  opts.stages = 10;
  const Manet m = Manet::create(store, "m", 1, opts, rng);
  Rng fill(211);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& p : store) {
    for (double& v : p.value.values()) v = u(fill);
  }
  Context ctx;
  const ManetResult r = m.run(ctx, constant(noise({1, 16, 16}, 212)), random_mask(16, 16, 213),
                              constant(noise({1, 16, 16}, 214)));
  for (const auto& s : r.states) {
    EXPECT_TRUE(all_finite(s.a_w.value()));
    EXPECT_TRUE(all_finite(s.x_w.value()));
    EXPECT_TRUE(all_finite(s.u.value()));
  }
}
