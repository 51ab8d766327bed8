#include <algorithm>
#include <vector>

#include <benchmark/benchmark.h>

#include "saenad/evaluation.hpp"
#include "saenad/geo_kernel.hpp"
#include "saenad/random.hpp"
#include "saenad/training.hpp"

using namespace saenad;

namespace {

std::vector<GeoPoint> city_points(std::size_t n, double box_degrees) {
  Rng rng(1);
  std::vector<GeoPoint> pts(n);
  for (auto& p : pts) p = {30.0 + rng.uniform(0.0, box_degrees), -98.0 + rng.uniform(0.0, box_degrees)};
  return pts;
}

InteractionData random_interactions(std::size_t users, std::size_t pois, std::size_t per_user) {
  Rng rng(2);
  std::vector<InteractionData::Entry> entries;
  for (UserIndex u = 0; u < users; ++u) {
    for (std::size_t k = 0; k < per_user; ++k) {
      entries.push_back({u, static_cast<PoiIndex>(rng.below(pois)), static_cast<std::uint32_t>(1 + rng.below(3))});
    }
  }
  return InteractionData::from_counts(users, pois, std::move(entries), 2.0, 1e-5);
}

void BM_KernelBuild(benchmark::State& state) {
  const auto pts = city_points(static_cast<std::size_t>(state.range(0)), 3.0);
  KernelOptions o;
  o.grid_index = state.range(1) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(build_kernel(pts, o));
  state.SetLabel(o.grid_index ? "grid" : "all-pairs");
}
BENCHMARK(BM_KernelBuild)->ArgsProduct({{1000, 4000}, {0, 1}})->Unit(benchmark::kMillisecond);

struct BatchFixture {
  GeoKernel kernel;
  InteractionData data;
  ModelParams params;
  std::vector<UserIndex> users;
  std::vector<std::span<const PoiIndex>> lists;

  BatchFixture(std::size_t n, Variant v)
      : kernel(build_kernel(city_points(n, 1.0), KernelOptions{})),
        data(random_interactions(256, n, 30)),
        params(ModelParams::initialize({n, 200, 50, 20, v, 0.5}, 3)) {
    for (UserIndex u = 0; u < 256; ++u) {
      users.push_back(u);
      lists.push_back(data.checkins(u));
    }
  }
};

void BM_ForwardBackward(benchmark::State& state) {
  const auto v = kAllVariants[state.range(1)];
  BatchFixture f(static_cast<std::size_t>(state.range(0)), v);
  const auto targets = batch_targets(f.data, f.users);
  Rng rng(4);
  for (auto _ : state) {
    const auto fwd = forward_batch(f.params, f.kernel, f.lists, Mode::Train, &rng);
    benchmark::DoNotOptimize(backward(f.params, f.kernel, fwd, targets, 1e-3, 2));
  }
  state.SetLabel(std::string(to_string(v)));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_ForwardBackward)->ArgsProduct({{1000}, {0, 1, 2, 3}})->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  const std::size_t n = 2000;
  BatchFixture f(n, Variant::SAE_NAD);
  Rng rng(5);
  std::vector<std::vector<PoiIndex>> test(256);
  for (auto& t : test) {
    for (int i = 0; i < 5; ++i) t.push_back(static_cast<PoiIndex>(rng.below(n)));
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
  }
  EvalOptions opts;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(f.params, f.kernel, f.data, test, opts));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
