// Serial vs OpenMP branch enumeration on QPCCs with m independent pairs.

#include <benchmark/benchmark.h>

#include <random>

#include "mpcc/qpcc.hpp"

using namespace mpcc;

namespace {

// n = 2m; pair i is (1 + w_i, 1 + w_{m+i}), so every branch is feasible.
QpccData instance(int m) {
  const int n = 2 * m;
  std::mt19937 gen(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = u(gen);
  }
  QpccData d;
  d.hessian = a * a.transpose() + n * Mat::Identity(n, n);
  d.gradient = Vec::NullaryExpr(n, [&] { return u(gen); });
  d.J_h.resize(0, n);
  d.h.resize(0);
  d.J_g.resize(0, n);
  d.g.resize(0);
  d.J_G = Mat::Zero(m, n);
  d.J_H = Mat::Zero(m, n);
  for (int i = 0; i < m; ++i) {
    d.J_G(i, i) = 1.0;
    d.J_H(i, m + i) = 1.0;
  }
  d.G = Vec::Ones(m);
  d.H = Vec::Ones(m);
  return d;
}

void BM_Serial(benchmark::State& state) {
  QpccData d = instance(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_qpcc_enumerate_serial(d));
  }
  state.SetComplexityN(state.range(0));
}

void BM_Parallel(benchmark::State& state) {
  QpccData d = instance(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_qpcc_enumerate(d));
  }
  state.SetComplexityN(state.range(0));
}

}  // namespace

BENCHMARK(BM_Serial)->DenseRange(4, 12, 2)->UseRealTime();
BENCHMARK(BM_Parallel)->DenseRange(4, 12, 2)->UseRealTime();

BENCHMARK_MAIN();
