#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "crowdloss/baselines.hpp"
#include "crowdloss/couloss.hpp"
#include "crowdloss/evalkit.hpp"
#include "crowdloss/gradcheck.hpp"
#include "crowdloss/simulator.hpp"

using namespace crowdloss;

namespace {

std::vector<Detection> random_detections(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0, 500), size(10, 80), score(0, 1);
  std::vector<Detection> out;
  for (int k = 0; k < n; ++k) {
    const double x = pos(rng), y = pos(rng);
    out.push_back({BBox(x, y, x + size(rng), y + size(rng)), score(rng), 0});
  }
  return out;
}

// A row of `peds` GTs, neighbours at IoU 1/3, with 8 proposals each.
GradCheckCase crowd(int peds) {
  Scene s;
  s.width = 20.0 * peds + 60.0;
  s.height = 200.0;
  for (int k = 0; k < peds; ++k) {
    const BBox b(20.0 + 20.0 * k, 50.0, 60.0 + 20.0 * k, 150.0);
    s.pedestrians.push_back({b, b});
  }
  const ProposalSet p = spawn_proposals(s, SimConfig{}, 8);
  return {s.full_boxes(), p.boxes, {}};
}

}  // namespace

static void BM_Iou(benchmark::State& state) {
  const BBox a(0, 0, 40, 100), b(12, 5, 55, 98);
  for (auto _ : state) benchmark::DoNotOptimize(iou(a, b));
}
BENCHMARK(BM_Iou);

static void BM_CouLoss(benchmark::State& state) {
  const GradCheckCase c = crowd(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(couloss(c.gts, c.proposals).total);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CouLoss)->RangeMultiplier(2)->Range(2, 16)->Complexity();

static void BM_CouLossGradient(benchmark::State& state) {
  const GradCheckCase c = crowd(static_cast<int>(state.range(0)));
  const auto assign = assign_proposals(c.gts, c.proposals);
  for (auto _ : state) benchmark::DoNotOptimize(couloss_gradient(c.gts, c.proposals, assign).attraction.data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CouLossGradient)->RangeMultiplier(2)->Range(2, 16)->Complexity();

static void BM_GreedyNms(benchmark::State& state) {
  const auto dets = random_detections(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(greedy_nms(dets, 0.5).size());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GreedyNms)->RangeMultiplier(4)->Range(16, 4096)->Complexity();

static void BM_Descent(benchmark::State& state) {
  const Scene s = generate_scene({}, 1);
  const SimConfig cfg;
  const ProposalSet p = spawn_proposals(s, cfg, proposal_seed(1));
  const auto loss = make_variant("couloss", default_simulation_loss()).loss;
  for (auto _ : state) benchmark::DoNotOptimize(run_descent(s, p, loss, {}, cfg).drift_rate);
}
BENCHMARK(BM_Descent)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
