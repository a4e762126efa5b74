// Serial reference kernels against their OpenMP counterparts.
// Arguments: channels and spatial size; batch is fixed at 8.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "fas/kernels.hpp"

namespace {

namespace k = fas::kernels;

struct Problem {
  fas::Tensor<float> x, g;
  std::vector<float> w;
  int c;
};

Problem make_problem(const benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), s = static_cast<int>(state.range(1));
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  Problem p{fas::Tensor<float>(8, c, s, s), fas::Tensor<float>(8, c, s, s),
            std::vector<float>(static_cast<std::size_t>(c) * c * 9), c};
  for (auto& v : p.x.data) v = d(rng);
  for (auto& v : p.g.data) v = d(rng);
  for (auto& v : p.w) v = d(rng);
  return p;
}

void set_flops(benchmark::State& state, const Problem& p) {
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * 9 * p.c * static_cast<double>(p.x.size()),
                                                 benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
}

void BM_conv3x3_reference(benchmark::State& state) {
  auto p = make_problem(state);
  fas::Tensor<float> y;
  for (auto _ : state) {
    k::conv3x3_forward_reference<float>(p.x, p.w, p.c, y);
    benchmark::DoNotOptimize(y.data.data());
  }
  set_flops(state, p);
}

void BM_conv3x3_omp(benchmark::State& state) {
  auto p = make_problem(state);
  fas::Tensor<float> y;
  for (auto _ : state) {
    k::conv3x3_forward<float>(p.x, p.w, p.c, y);
    benchmark::DoNotOptimize(y.data.data());
  }
  set_flops(state, p);
}

void BM_cdc_reference(benchmark::State& state) {
  auto p = make_problem(state);
  for (auto _ : state) {
    auto y = k::cdc_conv_reference<float>(p.x, p.w, p.c, 0.7f);
    benchmark::DoNotOptimize(y.data.data());
  }
  set_flops(state, p);
}

void BM_cdc_omp(benchmark::State& state) {
  auto p = make_problem(state);
  for (auto _ : state) {
    auto y = k::cdc_conv<float>(p.x, p.w, p.c, 0.7f);
    benchmark::DoNotOptimize(y.data.data());
  }
  set_flops(state, p);
}

void BM_backward_input_reference(benchmark::State& state) {
  auto p = make_problem(state);
  fas::Tensor<float> gx;
  for (auto _ : state) {
    k::conv3x3_backward_input_reference<float>(p.g, p.w, p.c, gx);
    benchmark::DoNotOptimize(gx.data.data());
  }
  set_flops(state, p);
}

void BM_backward_input_omp(benchmark::State& state) {
  auto p = make_problem(state);
  fas::Tensor<float> gx;
  for (auto _ : state) {
    k::conv3x3_backward_input<float>(p.g, p.w, p.c, gx);
    benchmark::DoNotOptimize(gx.data.data());
  }
  set_flops(state, p);
}

void BM_backward_weight_reference(benchmark::State& state) {
  auto p = make_problem(state);
  std::vector<float> gw(p.w.size());
  for (auto _ : state) {
    k::conv3x3_backward_weight_reference<float>(p.x, p.g, gw);
    benchmark::DoNotOptimize(gw.data());
  }
  set_flops(state, p);
}

void BM_backward_weight_omp(benchmark::State& state) {
  auto p = make_problem(state);
  std::vector<float> gw(p.w.size());
  for (auto _ : state) {
    k::conv3x3_backward_weight<float>(p.x, p.g, gw);
    benchmark::DoNotOptimize(gw.data());
  }
  set_flops(state, p);
}

#define FAS_SHAPES ->Args({16, 32})->Args({32, 64})->Unit(benchmark::kMillisecond)

BENCHMARK(BM_conv3x3_reference) FAS_SHAPES;
BENCHMARK(BM_conv3x3_omp) FAS_SHAPES;
BENCHMARK(BM_cdc_reference) FAS_SHAPES;
BENCHMARK(BM_cdc_omp) FAS_SHAPES;
BENCHMARK(BM_backward_input_reference) FAS_SHAPES;
BENCHMARK(BM_backward_input_omp) FAS_SHAPES;
BENCHMARK(BM_backward_weight_reference) FAS_SHAPES;
BENCHMARK(BM_backward_weight_omp) FAS_SHAPES;

}  // namespace

BENCHMARK_MAIN();
