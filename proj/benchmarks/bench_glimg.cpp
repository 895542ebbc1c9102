#include <benchmark/benchmark.h>

#include <array>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "glimg/glimg.hpp"

using namespace glimg;

namespace {

// Random ratings with roughly the per-user density of MovieLens-1M (~4.5%).
RatingMatrix synthetic(int users, int items, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> stars(1, 5);
  std::vector<std::string> u, i;
  for (int k = 0; k < users; ++k) u.push_back("u" + std::to_string(k));
  for (int k = 0; k < items; ++k) i.push_back("i" + std::to_string(k));
  std::vector<RatingTriplet> t;
  for (int a = 0; a < users; ++a) {
    for (int b = 0; b < items; ++b) {
      if (coin(rng) < density) t.push_back({a, b, double(stars(rng))});
    }
    if (t.empty() || t.back().user != a) t.push_back({a, a % items, 3.0});
  }
  return RatingMatrix(std::make_shared<IdIndex>(u), std::make_shared<IdIndex>(i), t);
}

void BM_ItemGraph(benchmark::State& state) {
  const auto r = synthetic(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 0.045, 1);
  for (auto _ : state) benchmark::DoNotOptimize(build_item_graph(r, 0.5));
  state.counters["nnz"] = static_cast<double>(r.nnz());
}
BENCHMARK(BM_ItemGraph)->Args({1000, 500})->Args({6040, 3706})->Unit(benchmark::kMillisecond);

void BM_ClusterSolve(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  const auto mode = static_cast<SolveMode>(state.range(1));
  const auto r = synthetic(2000, static_cast<int>(n), 0.045, 2);
  const auto w = build_item_graph(r, 0.5).weights;
  HyperParams p;
  for (auto _ : state) benchmark::DoNotOptimize(build_cluster_model(0, combine_normalize(w, w, 1.0), p, mode));
}
BENCHMARK(BM_ClusterSolve)
    ->Args({500, 0})
    ->Args({1000, 0})
    ->Args({1000, 1})
    ->Args({3706, 0})
    ->Unit(benchmark::kMillisecond)
    ->Iterations(1);

// Online scoring and top-N for one user on a catalog of ML-1M size.
void BM_OnlineRecommend(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto mode = static_cast<SolveMode>(state.range(1));
  const auto r = synthetic(600, n, 0.045, 3);
  HyperParams p;
  p.k = 1;
  FitOptions opts;
  opts.solve = mode;
  const auto model = fit(r, p, opts);
  Index u = 0;
  for (auto _ : state) {
    const auto s = predict_user(model, u);
    const std::array<const RatingMatrix*, 1> history = {&model.history};
    benchmark::DoNotOptimize(top_n(u, std::span<const double>(s.data(), static_cast<std::size_t>(s.size())),
                                   rated_mask(u, history), 10));
    u = (u + 1) % model.num_users();
  }
}
BENCHMARK(BM_OnlineRecommend)->Args({3706, 0})->Args({3706, 1})->Unit(benchmark::kMicrosecond);

void BM_TopN(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> scores(static_cast<std::size_t>(state.range(0)));
  for (auto& s : scores) s = unit(rng);
  for (auto _ : state) benchmark::DoNotOptimize(top_n(0, scores, {}, 50));
}
BENCHMARK(BM_TopN)->Arg(3706)->Arg(100000)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
