#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mvlloc/ops.hpp"
#include "mvlloc/rng.hpp"
#include "mvlloc/tensor.hpp"
#include "test_util.hpp"

namespace mvl {
namespace {

using namespace ops;

Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor out({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

TEST(Tensor, ConstructionAndShape) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(shape_string(t.shape()), "[2x3]");
  EXPECT_DOUBLE_EQ(Tensor::scalar(4.0).item(), 4.0);
  const Tensor id = Tensor::identity(3);
  EXPECT_EQ(id(1, 1), 1.0);
  EXPECT_EQ(id(1, 2), 0.0);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  EXPECT_ANY_THROW(Tensor({2}, std::vector<double>{1.0, std::nan("")}));
  EXPECT_THROW(t.reshaped({4}), std::invalid_argument);
  EXPECT_EQ(t.reshaped({3, 2}).shape(), (Shape{3, 2}));
}

TEST(Tensor, RequireFinite) {
  Tensor t({2});
  t[1] = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(t.require_finite("t"), std::domain_error);
}

TEST(Ops, MatmulMatchesNaiveLoops) {
  Rng rng(1);
  for (const auto& [m, k, n] : std::vector<std::array<std::size_t, 3>>{{1, 1, 1}, {3, 5, 2}, {17, 9, 13}, {64, 48, 33}}) {
    const Tensor a = test::random_tensor({m, k}, rng);
    const Tensor b = test::random_tensor({k, n}, rng);
    const Tensor ref = naive_matmul(a, b);
    EXPECT_LT(max_abs_diff(matmul(a, b), ref), 1e-12);
    EXPECT_LT(max_abs_diff(matmul_nt(a, transpose(b)), ref), 1e-12);
    EXPECT_LT(max_abs_diff(matmul_tn(transpose(a), b), ref), 1e-12);
  }
  EXPECT_THROW(matmul(Tensor({2, 3}), Tensor({2, 3})), std::invalid_argument);
}

TEST(Ops, SoftmaxKnownValues) {
  const Tensor s = softmax(Tensor::vector({1.0, 2.0, 3.0}));
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(s[0], std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(s[1], std::exp(2.0) / z, 1e-15);
  EXPECT_NEAR(s[2], std::exp(3.0) / z, 1e-15);
  EXPECT_NEAR(s[0], 0.09003057317038046, 1e-15);
  EXPECT_NEAR(s[2], 0.6652409557748219, 1e-15);
}

TEST(Ops, SoftmaxIsShiftInvariantAndStable) {
  const Tensor a = softmax(Tensor::vector({1000.0, 1001.0, 1002.0}));
  const Tensor b = softmax(Tensor::vector({0.0, 1.0, 2.0}));
  EXPECT_LT(max_abs_diff(a, b), 1e-15);
  EXPECT_NEAR(log_sum_exp(Tensor::vector({1000.0, 1000.0})), 1000.0 + std::log(2.0), 1e-12);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Rng rng(2);
  const Tensor s = softmax_rows(test::random_tensor({7, 11}, rng, 5.0));
  for (std::size_t r = 0; r < s.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < s.cols(); ++c) {
      EXPECT_GT(s(r, c), 0.0);
      sum += s(r, c);
    }
    EXPECT_NEAR(sum, 1.0, 1e-14);
  }
}

TEST(Ops, LayerNormNormalizesRows) {
  Rng rng(3);
  const Tensor x = test::random_tensor({5, 32}, rng, 3.0);
  const Tensor y = layer_norm(x, Tensor({32}, 1.0), Tensor({32}, 0.0));
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double mean = 0.0;
    double var = 0.0;
    for (std::size_t c = 0; c < 32; ++c) mean += y(r, c) / 32.0;
    for (std::size_t c = 0; c < 32; ++c) var += (y(r, c) - mean) * (y(r, c) - mean) / 32.0;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    // Biased variance with eps in the denominator.
    double xm = 0.0;
    double xv = 0.0;
    for (std::size_t c = 0; c < 32; ++c) xm += x(r, c) / 32.0;
    for (std::size_t c = 0; c < 32; ++c) xv += (x(r, c) - xm) * (x(r, c) - xm) / 32.0;
    EXPECT_NEAR(var, xv / (xv + kLayerNormEps), 1e-12);
  }
  const Tensor shifted = layer_norm(x, Tensor({32}, 2.0), Tensor({32}, 0.5));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(shifted[i], 2.0 * y[i] + 0.5, 1e-12);
}

TEST(Ops, GeluUsesExactErf) {
  for (double x : {-3.0, -1.0, -0.25, 0.0, 0.5, 1.0, 2.5}) {
    EXPECT_NEAR(gelu(x), 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))), 1e-15);
  }
  EXPECT_NEAR(gelu(1.0), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(gelu(-1.0), -0.15865525393145707, 1e-15);
  // The tanh approximation differs at this point by about 1.5e-4.
  const double tanh_approx =
      0.5 * 1.0 * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (1.0 + 0.044715)));
  EXPECT_GT(std::abs(gelu(1.0) - tanh_approx), 1e-5);
}

TEST(Ops, GeluDerivativeMatchesFiniteDifference) {
  for (double x : {-2.0, -0.7, 0.0, 0.3, 1.9}) {
    const double h = 1e-6;
    EXPECT_NEAR(gelu_derivative(x), (gelu(x + h) - gelu(x - h)) / (2 * h), 1e-9);
  }
}

TEST(Ops, DropoutIsInvertedAndIdentityInEval) {
  Rng rng(4);
  const auto mask = dropout_mask(20000, 0.5, rng);
  std::size_t kept = 0;
  for (double m : mask) {
    EXPECT_TRUE(m == 0.0 || m == 2.0);
    kept += m != 0.0;
  }
  EXPECT_NEAR(static_cast<double>(kept) / 20000.0, 0.5, 0.02);
  Rng r2(4);
  const Tensor x = test::random_tensor({4, 4}, r2);
  EXPECT_EQ(dropout(x, 0.5, rng, false), x);
  EXPECT_EQ(dropout(x, 0.0, rng, true), x);
}

TEST(Rng, MatchesSplitMix64) {
  // Reference SplitMix64 seeded with 0.
  Rng rng(0);
  EXPECT_EQ(rng.next_u64(), 0xE220A8397B1DCDAFull);
  EXPECT_EQ(rng.next_u64(), 0x6E789E6AA1B965F4ull);
  EXPECT_EQ(rng.next_u64(), 0x06C45D188009454Full);
}

TEST(Rng, SplitDependsOnlyOnKeyAndTag) {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 10; ++i) b.next_u64();
  EXPECT_EQ(a.split(7).next_u64(), b.split(7).next_u64());
  EXPECT_NE(a.split(7).next_u64(), a.split(8).next_u64());
  EXPECT_NE(Rng(1).split(7).next_u64(), Rng(2).split(7).next_u64());
}

TEST(Rng, DistributionsStayInRange) {
  Rng rng(5);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(rng.below(7), 7u);
    ASSERT_LE(std::abs(rng.truncated_normal(0.02)), 0.04);
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.03);
  EXPECT_NEAR(sq / n, 1.0, 0.03);
}

TEST(Rng, ShuffleIsAPermutation) {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  Rng rng(6);
  shuffle(std::span(v), rng);
  EXPECT_EQ(std::set<int>(v.begin(), v.end()).size(), 50u);
  EXPECT_FALSE(std::is_sorted(v.begin(), v.end()));
}

}  // namespace
}  // namespace mvl
