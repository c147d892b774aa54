#include <gtest/gtest.h>

#include "asmamba/ops.hpp"
#include "asmamba/wavelet.hpp"
#include "grad_check.hpp"

using namespace asmamba;
namespace wv = asmamba::wavelet;

namespace {

Tensor random_map(std::vector<int> shape, std::uint64_t seed) {
  Rng rng(seed);
  return randn(std::move(shape), 1.0, rng);
}

}  // namespace

TEST(Dwt2, ConstantImageHasOnlyApproximation) {
  const wv::SubBands b = wv::dwt2(Tensor({1, 4, 6}, 0.75));
  for (double v : b.ll.values()) EXPECT_DOUBLE_EQ(v, 1.5);
  for (const Tensor* t : {&b.lh, &b.hl, &b.hh}) {
    for (double v : t->values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Dwt2, TwoByTwoBlockConvention) {
  const double a = 1.0, b = 4.0, c = -2.0, d = 0.5;
  const wv::SubBands s = wv::dwt2(Tensor({1, 2, 2}, {a, b, c, d}));
  EXPECT_DOUBLE_EQ(s.ll[0], (a + b + c + d) / 2);
  EXPECT_DOUBLE_EQ(s.lh[0], (a - b + c - d) / 2);
  EXPECT_DOUBLE_EQ(s.hl[0], (a + b - c - d) / 2);
  EXPECT_DOUBLE_EQ(s.hh[0], (a - b - c + d) / 2);
}

TEST(Dwt2, EnergyPreserved) {
  const Tensor x = random_map({1, 16, 16}, 1);
  EXPECT_NEAR(wv::dwt2(x).energy(), x.sum_squares(), 1e-6 * x.sum_squares());
}

TEST(Dwt2, RankTwoInput) {
  const wv::SubBands b = wv::dwt2(Tensor({4, 4}, 1.0));
  EXPECT_EQ(b.ll.shape(), (std::vector<int>{1, 2, 2}));
}

TEST(Dwt2, OddSizeThrows) {
  EXPECT_THROW(wv::dwt2(Tensor({1, 5, 4})), std::invalid_argument);
  EXPECT_THROW(wv::dwt2(Tensor({1, 4, 3})), std::invalid_argument);
}

TEST(Dwt2, Linear) {
  const Tensor x = random_map({2, 8, 8}, 2);
  const Tensor y = random_map({2, 8, 8}, 3);
  const Tensor lhs = wv::pack(wv::dwt2(x * 2.0 + y * -0.5));
  const Tensor rhs = wv::pack(wv::dwt2(x)) * 2.0 + wv::pack(wv::dwt2(y)) * -0.5;
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-6);
}

TEST(Idwt2, RoundTrip) {
  const Tensor x = random_map({4, 32, 32}, 4);
  EXPECT_LT(max_abs_diff(wv::idwt2(wv::dwt2(x)), x), 1e-6);
}

TEST(Idwt2, ZeroBandsGiveZeroImage) {
  wv::SubBands b{Tensor({1, 2, 2}), Tensor({1, 2, 2}), Tensor({1, 2, 2}), Tensor({1, 2, 2})};
  const Tensor x = wv::idwt2(b);
  for (double v : x.values()) EXPECT_EQ(v, 0.0);
}

TEST(Idwt2, ApproximationOnlyGivesConstant) {
  wv::SubBands b{Tensor({1, 3, 3}, 2.0 * 0.3), Tensor({1, 3, 3}), Tensor({1, 3, 3}), Tensor({1, 3, 3})};
  const Tensor x = wv::idwt2(b);
  for (double v : x.values()) EXPECT_NEAR(v, 0.3, 1e-15);
}

TEST(Idwt2, InconsistentBandsThrow) {
  wv::SubBands b{Tensor({1, 2, 2}), Tensor({1, 2, 3}), Tensor({1, 2, 2}), Tensor({1, 2, 2})};
  EXPECT_THROW(wv::idwt2(b), std::invalid_argument);
}

TEST(ConcatHf, SplitIsExact) {
  const wv::SubBands b = wv::dwt2(random_map({3, 6, 6}, 5));
  const Tensor hf = wv::concat_hf(b);
  EXPECT_EQ(hf.channels(), 9);
  const wv::HighBands s = wv::split_hf(hf);
  EXPECT_EQ(s.lh.storage(), b.lh.storage());
  EXPECT_EQ(s.hl.storage(), b.hl.storage());
  EXPECT_EQ(s.hh.storage(), b.hh.storage());
}

TEST(ConcatHf, ZeroBandsGiveZero) {
  wv::SubBands b{Tensor({2, 2, 2}), Tensor({2, 2, 2}), Tensor({2, 2, 2}), Tensor({2, 2, 2})};
  const Tensor hf = wv::concat_hf(b);
  for (double v : hf.values()) EXPECT_EQ(v, 0.0);
}

TEST(PackedTransform, MatchesBandForm) {
  const Tensor x = random_map({2, 8, 6}, 6);
  const Var packed = wv::dwt2(constant(x));
  EXPECT_EQ(packed.value().storage(), wv::pack(wv::dwt2(x)).storage());
  EXPECT_LT(max_abs_diff(wv::idwt2(packed).value(), x), 1e-12);
}

TEST(PackedTransform, Gradients) {
  const Tensor x = random_map({2, 4, 4}, 7);
  const Tensor wts = random_map({8, 2, 2}, 8);
  EXPECT_LT(gradcheck::check_input(x, [&](const Var& v) { return ops::sum(ops::mul_const(wv::dwt2(v), wts)); })
                .rel_error,
            1e-3);
  const Tensor y = random_map({8, 2, 2}, 9);
  const Tensor wimg = random_map({2, 4, 4}, 10);
  EXPECT_LT(gradcheck::check_input(y, [&](const Var& v) { return ops::sum(ops::mul_const(wv::idwt2(v), wimg)); })
                .rel_error,
            1e-3);
}

TEST(Hwd, IdentityMixIsBandConcatenation) {
  const int c = 2;
  const Tensor x = random_map({c, 6, 6}, 11);
  Tensor w({4 * c, 4 * c, 1, 1});
  for (int i = 0; i < 4 * c; ++i) w[static_cast<std::size_t>(i * 4 * c + i)] = 1.0;
  const Tensor y = wv::hwd(constant(x), constant(w), Var{}).value();
  EXPECT_EQ(y.shape(), (std::vector<int>{4 * c, 3, 3}));
  EXPECT_EQ(y.storage(), wv::pack(wv::dwt2(x)).storage());
  EXPECT_LT(max_abs_diff(wv::idwt2(wv::unpack(y)), x), 1e-6);
}

TEST(Hwd, OutputShape) {
  const Tensor x = random_map({3, 8, 4}, 12);
  const Tensor w = random_map({5, 12, 1, 1}, 13);
  EXPECT_EQ(wv::hwd(constant(x), constant(w), constant(Tensor({5}))).shape(), (std::vector<int>{5, 4, 2}));
}

TEST(PadToMultiple, ReflectsBottomRight) {
  Tensor x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor p = wv::pad_to_multiple(x, 4);
  ASSERT_EQ(p.shape(), (std::vector<int>{1, 4, 4}));
  EXPECT_EQ(p.at(0, 0, 3), 2.0);  // reflect of column 1
  EXPECT_EQ(p.at(0, 3, 0), 4.0);  // reflect of row 1
  EXPECT_EQ(p.at(0, 2, 2), 9.0);
  EXPECT_EQ(wv::pad_to_multiple(Tensor({2, 4, 8}), 4).shape(), (std::vector<int>{2, 4, 8}));
}
