#include <algorithm>
#include <cmath>
#include <vector>

#include "tagopt/kernels.hpp"

namespace tagopt::kernels {

namespace {

using Index = std::ptrdiff_t;

bool parallel_worthwhile(std::size_t work) { return work >= kParallelMinElements; }

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "dot");
  const std::size_t n = a.size();
  const std::size_t blocks = (n + kReduceBlock - 1) / kReduceBlock;
  if (blocks <= 1) return reference::dot(a, b);

  std::vector<double> partial(blocks, 0.0);
#pragma omp parallel for schedule(static) if (parallel_worthwhile(n))
  for (Index blk = 0; blk < static_cast<Index>(blocks); ++blk) {
    const std::size_t lo = static_cast<std::size_t>(blk) * kReduceBlock;
    const std::size_t hi = std::min(n, lo + kReduceBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += a[i] * b[i];
    partial[static_cast<std::size_t>(blk)] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

void axpy(std::span<double> y, double a, std::span<const double> x) {
  require_same_size(y.size(), x.size(), "axpy");
  const Index n = static_cast<Index>(y.size());
#pragma omp parallel for simd schedule(static) if (parallel_worthwhile(y.size()))
  for (Index i = 0; i < n; ++i) y[i] += a * x[i];
}

void ema(std::span<double> m, std::span<const double> g, double beta) {
  require_same_size(m.size(), g.size(), "ema");
  const Index n = static_cast<Index>(m.size());
#pragma omp parallel for simd schedule(static) if (parallel_worthwhile(m.size()))
  for (Index i = 0; i < n; ++i) m[i] = beta * m[i] + (1.0 - beta) * g[i];
}

void ema_square(std::span<double> v, std::span<const double> g, double beta) {
  require_same_size(v.size(), g.size(), "ema_square");
  const Index n = static_cast<Index>(v.size());
#pragma omp parallel for simd schedule(static) if (parallel_worthwhile(v.size()))
  for (Index i = 0; i < n; ++i) v[i] = beta * v[i] + (1.0 - beta) * (g[i] * g[i]);
}

void accumulate_square(std::span<double> v, std::span<const double> g) {
  require_same_size(v.size(), g.size(), "accumulate_square");
  const Index n = static_cast<Index>(v.size());
#pragma omp parallel for simd schedule(static) if (parallel_worthwhile(v.size()))
  for (Index i = 0; i < n; ++i) v[i] += g[i] * g[i];
}

void scaled_rsqrt_step(std::span<double> theta, std::span<const double> direction,
                       std::span<const double> denominator, double scale, double eps) {
  require_same_size(theta.size(), direction.size(), "scaled_rsqrt_step");
  require_same_size(theta.size(), denominator.size(), "scaled_rsqrt_step");
  const Index n = static_cast<Index>(theta.size());
#pragma omp parallel for simd schedule(static) if (parallel_worthwhile(theta.size()))
  for (Index i = 0; i < n; ++i) {
    theta[i] -= scale * direction[i] / std::sqrt(denominator[i] + eps);
  }
}

void matmul_bt(MatrixView a, MatrixView b, std::span<const double> bias, Matrix& c) {
  require_same_size(a.cols, b.cols, "matmul_bt");
  if (!bias.empty()) require_same_size(bias.size(), b.rows, "matmul_bt bias");
  c = Matrix(a.rows, b.rows);
  const Index rows = static_cast<Index>(a.rows);
  const Index cols = static_cast<Index>(b.rows);
  const std::size_t inner = a.cols;
#pragma omp parallel for collapse(2) schedule(static) \
    if (parallel_worthwhile(a.rows * b.rows * inner))
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      const double* ar = a.row(static_cast<std::size_t>(i));
      const double* br = b.row(static_cast<std::size_t>(j));
      double s = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(j)];
      for (std::size_t k = 0; k < inner; ++k) s += ar[k] * br[k];
      c(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = s;
    }
  }
}

void matmul_at(MatrixView a, MatrixView b, Matrix& c) {
  require_same_size(a.rows, b.rows, "matmul_at");
  c = Matrix(a.cols, b.cols);
  const Index rows = static_cast<Index>(a.cols);
  const Index cols = static_cast<Index>(b.cols);
  const std::size_t inner = a.rows;
#pragma omp parallel for collapse(2) schedule(static) \
    if (parallel_worthwhile(a.cols * b.cols * inner))
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) {
        s += a(k, static_cast<std::size_t>(i)) * b(k, static_cast<std::size_t>(j));
      }
      c(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = s;
    }
  }
}

void matmul(MatrixView a, MatrixView b, Matrix& c) {
  require_same_size(a.cols, b.rows, "matmul");
  c = Matrix(a.rows, b.cols);
  const Index rows = static_cast<Index>(a.rows);
  const Index cols = static_cast<Index>(b.cols);
  const std::size_t inner = a.cols;
#pragma omp parallel for collapse(2) schedule(static) \
    if (parallel_worthwhile(a.rows * b.cols * inner))
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) {
        s += a(static_cast<std::size_t>(i), k) * b(k, static_cast<std::size_t>(j));
      }
      c(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = s;
    }
  }
}

}  // namespace tagopt::kernels
