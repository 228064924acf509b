#include <gtest/gtest.h>

#include "tagopt/kernels.hpp"
#include "test_util.hpp"

namespace tagopt {
namespace {

using testing_util::max_abs_diff;
using testing_util::random_vector;

// Sizes straddle the parallel threshold so both code paths run.
class KernelSizes : public ::testing::TestWithParam<std::size_t> {};

TEST_P(KernelSizes, ElementwiseMatchReference) {
  const std::size_t n = GetParam();
  Rng rng(n);
  const auto g = random_vector(n, rng);
  const auto base = random_vector(n, rng);

  auto a = base, b = base;
  kernels::axpy(a, -0.3, g);
  kernels::reference::axpy(b, -0.3, g);
  EXPECT_EQ(a, b);

  a = base, b = base;
  kernels::ema(a, g, 0.9);
  kernels::reference::ema(b, g, 0.9);
  EXPECT_EQ(a, b);

  auto va = base, vb = base;
  for (double& x : va) x = std::abs(x);
  vb = va;
  kernels::ema_square(va, g, 0.99);
  kernels::reference::ema_square(vb, g, 0.99);
  EXPECT_EQ(va, vb);

  kernels::accumulate_square(va, g);
  kernels::reference::accumulate_square(vb, g);
  EXPECT_EQ(va, vb);

  a = base, b = base;
  kernels::scaled_rsqrt_step(a, g, va, 0.01, 1e-8);
  kernels::reference::scaled_rsqrt_step(b, g, vb, 0.01, 1e-8);
  EXPECT_EQ(a, b);
}

TEST_P(KernelSizes, ReductionsMatchReference) {
  const std::size_t n = GetParam();
  Rng rng(n + 1);
  const auto x = random_vector(n, rng);
  const auto y = random_vector(n, rng);
  const double tol = 1e-12 * static_cast<double>(n);
  EXPECT_NEAR(kernels::dot(x, y), kernels::reference::dot(x, y), tol);
  EXPECT_NEAR(kernels::squared_norm(x), kernels::reference::squared_norm(x), tol);
}

INSTANTIATE_TEST_SUITE_P(Sizes, KernelSizes,
                         ::testing::Values(1, 7, 4096, kernels::kParallelMinElements + 3, 100000));

TEST(Kernels, ElementwiseFormulas) {
  std::vector<double> theta{1.0, 2.0};
  kernels::axpy(theta, -0.1, std::vector<double>{0.0, 0.0});
  EXPECT_EQ(theta, (std::vector<double>{1.0, 2.0}));

  std::vector<double> m{1.0};
  kernels::ema(m, std::vector<double>{3.0}, 0.5);
  EXPECT_DOUBLE_EQ(m[0], 2.0);

  std::vector<double> v{1.0};
  kernels::ema_square(v, std::vector<double>{2.0}, 0.5);
  EXPECT_DOUBLE_EQ(v[0], 2.5);

  std::vector<double> t{1.0};
  kernels::scaled_rsqrt_step(t, std::vector<double>{2.0}, std::vector<double>{4.0}, 0.5, 0.0);
  EXPECT_DOUBLE_EQ(t[0], 0.5);
}

TEST(Kernels, SizeMismatchThrows) {
  std::vector<double> a(3), b(4);
  EXPECT_THROW(kernels::axpy(a, 1.0, b), ShapeError);
  EXPECT_THROW((void)kernels::dot(a, b), ShapeError);
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  return Matrix(r, c, random_vector(r * c, rng));
}

TEST(Kernels, MatmulsMatchReference) {
  Rng rng(5);
  for (auto [n, k, m] : {std::tuple{3, 4, 5}, std::tuple{64, 33, 70}, std::tuple{200, 16, 40}}) {
    const auto a = random_matrix(n, k, rng);
    const auto w = random_matrix(m, k, rng);
    const auto bias = random_vector(m, rng);
    Matrix c1, c2;
    kernels::matmul_bt(a, w, bias, c1);
    kernels::reference::matmul_bt(a, w, bias, c2);
    EXPECT_LT(max_abs_diff(c1.values(), c2.values()), 1e-12);

    const auto d = random_matrix(n, m, rng);
    kernels::matmul_at(d, a, c1);
    kernels::reference::matmul_at(d, a, c2);
    EXPECT_LT(max_abs_diff(c1.values(), c2.values()), 1e-12);

    kernels::matmul(d, w, c1);
    kernels::reference::matmul(d, w, c2);
    EXPECT_LT(max_abs_diff(c1.values(), c2.values()), 1e-12);
  }
}

TEST(Kernels, MatmulHandValues) {
  const Matrix a(1, 2, {1.0, 2.0});
  const Matrix w(2, 2, {3.0, 4.0, 5.0, 6.0});
  Matrix c;
  kernels::matmul_bt(a, w, std::vector<double>{0.5, -1.0}, c);
  EXPECT_DOUBLE_EQ(c(0, 0), 11.5);
  EXPECT_DOUBLE_EQ(c(0, 1), 16.0);
}

}  // namespace
}  // namespace tagopt
