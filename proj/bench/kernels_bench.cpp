#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "tagopt/kernels.hpp"
#include "tagopt/net.hpp"

namespace {

using namespace tagopt;

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

template <bool Parallel>
void BM_RsqrtStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto theta = filled(n, 1);
  const auto g = filled(n, 2);
  auto v = filled(n, 3);
  for (double& x : v) x *= x;
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::ema_square(v, g, 0.99);
      kernels::scaled_rsqrt_step(theta, g, v, 1e-6, 1e-8);
    } else {
      kernels::reference::ema_square(v, g, 0.99);
      kernels::reference::scaled_rsqrt_step(theta, g, v, 1e-6, 1e-8);
    }
    benchmark::DoNotOptimize(theta.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Dot(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = filled(n, 4), b = filled(n, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? kernels::dot(a, b) : kernels::reference::dot(a, b));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_MatmulBt(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a(n, 64, filled(n * 64, 6));
  const Matrix w(128, 64, filled(128 * 64, 7));
  const std::vector<double> bias(128, 0.1);
  Matrix c;
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::matmul_bt(a, w, bias, c);
    } else {
      kernels::reference::matmul_bt(a, w, bias, c);
    }
    benchmark::DoNotOptimize(c.values().data());
  }
}

BENCHMARK(BM_RsqrtStep<false>)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_RsqrtStep<true>)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_Dot<false>)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_Dot<true>)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_MatmulBt<false>)->Arg(10)->Arg(256);
BENCHMARK(BM_MatmulBt<true>)->Arg(10)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
