// Serial reference kernels against the OpenMP kernels at the shapes the
// desk-scale model actually runs (packed batches of ~16 short sequences,
// width 64, feed-forward 256).

#include <benchmark/benchmark.h>

#include <vector>

#include "r2d/tensor/kernels.hpp"
#include "r2d/tensor/rng.hpp"

namespace {

using namespace r2d;

std::vector<double> random_buffer(std::size_t n, std::uint64_t seed) {
  tensor::Rng rng(seed);
  std::vector<double> out(n);
  for (double& v : out) v = rng.uniform() * 2.0 - 1.0;
  return out;
}

template <bool Serial>
void BM_MatmulNN(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  auto a = random_buffer(m * k, 1);
  auto b = random_buffer(k * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    if constexpr (Serial) {
      kernels::serial::matmul_nn(a, b, c, m, k, n, false);
    } else {
      kernels::matmul_nn(a, b, c, m, k, n, false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(
      2.0 * static_cast<double>(m * k * n), benchmark::Counter::kIsIterationInvariantRate,
      benchmark::Counter::kIs1000);
}

template <bool Serial>
void BM_MatmulTN(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  auto a = random_buffer(m * k, 1);
  auto b = random_buffer(m * n, 2);
  std::vector<double> c(k * n);
  for (auto _ : state) {
    if constexpr (Serial) {
      kernels::serial::matmul_tn(a, b, c, m, k, n, false);
    } else {
      kernels::matmul_tn(a, b, c, m, k, n, false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(
      2.0 * static_cast<double>(m * k * n), benchmark::Counter::kIsIterationInvariantRate,
      benchmark::Counter::kIs1000);
}

template <bool Serial>
void BM_Attention(benchmark::State& state) {
  const auto segments = static_cast<std::size_t>(state.range(0));
  const std::size_t len = 20, heads = 4, head_dim = 16, d = heads * head_dim;
  std::vector<std::size_t> offsets(segments + 1);
  for (std::size_t s = 0; s <= segments; ++s) offsets[s] = s * len;
  kernels::AttentionLayout layout{offsets, offsets, heads, head_dim, true};
  const std::size_t rows = segments * len;
  auto q = random_buffer(rows * d, 1);
  auto k = random_buffer(rows * d, 2);
  auto v = random_buffer(rows * d, 3);
  auto dout = random_buffer(rows * d, 4);
  std::vector<double> out(rows * d), probs(layout.prob_size());
  std::vector<double> dq(rows * d), dk(rows * d), dv(rows * d);
  for (auto _ : state) {
    if constexpr (Serial) {
      kernels::serial::attention_forward(q, k, v, out, probs, layout);
      kernels::serial::attention_backward(q, k, v, probs, dout, dq, dk, dv, layout);
    } else {
      kernels::attention_forward(q, k, v, out, probs, layout);
      kernels::attention_backward(q, k, v, probs, dout, dq, dk, dv, layout);
    }
    benchmark::DoNotOptimize(dq.data());
  }
}

}  // namespace

BENCHMARK(BM_MatmulNN<true>)->Args({320, 64, 64})->Args({320, 64, 256})->Args({320, 256, 64});
BENCHMARK(BM_MatmulNN<false>)->Args({320, 64, 64})->Args({320, 64, 256})->Args({320, 256, 64});
BENCHMARK(BM_MatmulTN<true>)->Args({320, 64, 64})->Args({320, 64, 256});
BENCHMARK(BM_MatmulTN<false>)->Args({320, 64, 64})->Args({320, 64, 256});
BENCHMARK(BM_Attention<true>)->Arg(16);
BENCHMARK(BM_Attention<false>)->Arg(16);

BENCHMARK_MAIN();
