// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include "nrbdoor/rng.hpp"
#include "nrbdoor/tinynet.hpp"

using namespace nrb;

namespace {

PointCloud cloud(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({rng.uniform(-.5, .5), rng.uniform(-.5, .5), rng.uniform(-.5, .5)});
  return c;
}

struct Batch {
  std::vector<PointCloud> clouds;
  std::vector<const PointCloud*> ptrs;
  std::vector<int> labels;

  Batch(std::size_t size, std::size_t points) {
    for (std::size_t i = 0; i < size; ++i) {
      clouds.push_back(cloud(points, i));
      labels.push_back(static_cast<int>(i % 6));
    }
    for (const auto& c : clouds) ptrs.push_back(&c);
  }
};

template <bool Parallel>
void BM_PointMlp(benchmark::State& state) {
  const auto p = init_params(6, 1);
  const auto c = cloud(static_cast<std::size_t>(state.range(0)), 2);
  kernels::PointActivations act;
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::point_mlp(p, c.points, act);
    else
      kernels::serial::point_mlp(p, c.points, act);
    benchmark::DoNotOptimize(act.h2.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_BatchGradient(benchmark::State& state) {
  const auto p = init_params(6, 1);
  const Batch b(static_cast<std::size_t>(state.range(0)), 256);
  for (auto _ : state) {
    auto g = Parallel ? kernels::batch_gradient(p, b.ptrs, b.labels) : kernels::serial::batch_gradient(p, b.ptrs, b.labels);
    benchmark::DoNotOptimize(g.mean_loss);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_PredictMany(benchmark::State& state) {
  const auto p = init_params(6, 1);
  const Batch b(static_cast<std::size_t>(state.range(0)), 256);
  for (auto _ : state) {
    auto pred = Parallel ? kernels::predict_many(p, b.ptrs) : kernels::serial::predict_many(p, b.ptrs);
    benchmark::DoNotOptimize(pred.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_PointMlp<true>)->Arg(256)->Arg(4096);
BENCHMARK(BM_PointMlp<false>)->Arg(256)->Arg(4096);
BENCHMARK(BM_BatchGradient<true>)->Arg(8)->Arg(64);
BENCHMARK(BM_BatchGradient<false>)->Arg(8)->Arg(64);
BENCHMARK(BM_PredictMany<true>)->Arg(60)->Arg(240);
BENCHMARK(BM_PredictMany<false>)->Arg(60)->Arg(240);

BENCHMARK_MAIN();
