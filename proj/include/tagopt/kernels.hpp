#pragma once

// Dense vector and matrix kernels used by the network and the optimizers.
//
// Two implementations share one signature set:
//   tagopt::kernels            OpenMP-parallel, used by the library
//   tagopt::kernels::reference plain serial loops, kept for tests and benchmarks
//
// Every parallel kernel writes each output element from exactly one thread in a
// fixed summation order, so results do not depend on the thread count. The
// reductions (dot) use fixed-size blocks combined serially for the same reason.

#include <cstddef>
#include <span>

#include "tagopt/matrix.hpp"

namespace tagopt::kernels {

// Loops shorter than this run serially; OpenMP fork/join costs more than the work.
inline constexpr std::size_t kParallelMinElements = 1 << 14;
// Block length for the deterministic blocked reduction.
inline constexpr std::size_t kReduceBlock = 4096;

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);

// y += a * x
void axpy(std::span<double> y, double a, std::span<const double> x);
// m = beta * m + (1 - beta) * g
void ema(std::span<double> m, std::span<const double> g, double beta);
// v = beta * v + (1 - beta) * g^2
void ema_square(std::span<double> v, std::span<const double> g, double beta);
// v += g^2
void accumulate_square(std::span<double> v, std::span<const double> g);
// theta -= scale * direction / sqrt(denominator + eps)
void scaled_rsqrt_step(std::span<double> theta, std::span<const double> direction,
                       std::span<const double> denominator, double scale, double eps);

// C = A * B^T + bias (bias broadcast over rows; may be empty)
void matmul_bt(MatrixView a, MatrixView b, std::span<const double> bias, Matrix& c);
// C = A^T * B
void matmul_at(MatrixView a, MatrixView b, Matrix& c);
// C = A * B
void matmul(MatrixView a, MatrixView b, Matrix& c);

namespace reference {

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
void axpy(std::span<double> y, double a, std::span<const double> x);
void ema(std::span<double> m, std::span<const double> g, double beta);
void ema_square(std::span<double> v, std::span<const double> g, double beta);
void accumulate_square(std::span<double> v, std::span<const double> g);
void scaled_rsqrt_step(std::span<double> theta, std::span<const double> direction,
                       std::span<const double> denominator, double scale, double eps);
void matmul_bt(MatrixView a, MatrixView b, std::span<const double> bias, Matrix& c);
void matmul_at(MatrixView a, MatrixView b, Matrix& c);
void matmul(MatrixView a, MatrixView b, Matrix& c);

}  // namespace reference

}  // namespace tagopt::kernels
