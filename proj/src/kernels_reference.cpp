#include <cmath>

#include "tagopt/kernels.hpp"

namespace tagopt::kernels::reference {

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

void axpy(std::span<double> y, double a, std::span<const double> x) {
  require_same_size(y.size(), x.size(), "axpy");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

void ema(std::span<double> m, std::span<const double> g, double beta) {
  require_same_size(m.size(), g.size(), "ema");
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = beta * m[i] + (1.0 - beta) * g[i];
}

void ema_square(std::span<double> v, std::span<const double> g, double beta) {
  require_same_size(v.size(), g.size(), "ema_square");
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = beta * v[i] + (1.0 - beta) * (g[i] * g[i]);
}

void accumulate_square(std::span<double> v, std::span<const double> g) {
  require_same_size(v.size(), g.size(), "accumulate_square");
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += g[i] * g[i];
}

void scaled_rsqrt_step(std::span<double> theta, std::span<const double> direction,
                       std::span<const double> denominator, double scale, double eps) {
  require_same_size(theta.size(), direction.size(), "scaled_rsqrt_step");
  require_same_size(theta.size(), denominator.size(), "scaled_rsqrt_step");
  for (std::size_t i = 0; i < theta.size(); ++i) {
    theta[i] -= scale * direction[i] / std::sqrt(denominator[i] + eps);
  }
}

void matmul_bt(MatrixView a, MatrixView b, std::span<const double> bias, Matrix& c) {
  require_same_size(a.cols, b.cols, "matmul_bt");
  if (!bias.empty()) require_same_size(bias.size(), b.rows, "matmul_bt bias");
  c = Matrix(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      double s = bias.empty() ? 0.0 : bias[j];
      for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(j, k);
      c(i, j) = s;
    }
  }
}

void matmul_at(MatrixView a, MatrixView b, Matrix& c) {
  require_same_size(a.rows, b.rows, "matmul_at");
  c = Matrix(a.cols, b.cols);
  for (std::size_t i = 0; i < a.cols; ++i) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.rows; ++k) s += a(k, i) * b(k, j);
      c(i, j) = s;
    }
  }
}

void matmul(MatrixView a, MatrixView b, Matrix& c) {
  require_same_size(a.cols, b.rows, "matmul");
  c = Matrix(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  }
}

}  // namespace tagopt::kernels::reference
