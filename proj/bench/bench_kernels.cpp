// Serial reference vs OpenMP kernels. Thread count is the benchmark argument.

#include <benchmark/benchmark.h>

#include <numeric>

#include "ernf/accumulation.hpp"
#include "ernf/losses.hpp"
#include "ernf/scenes.hpp"
#include "ernf/simulator.hpp"

namespace {

const ernf::SensorGeometry kSensor{48, 48, ernf::ColorFilter::None, 1};

ernf::SimulationParams sim_params(int threads) {
  ernf::SimulationParams p;
  p.thresholds = {0.25, 0.25};
  p.sigma = 0.03;
  p.seed = 3;
  p.threads = threads;
  return p;
}

void BM_SimulateSerial(benchmark::State& state) {
  const auto src = ernf::random_smooth_source(11);
  for (auto _ : state) benchmark::DoNotOptimize(ernf::simulate_serial(src, kSensor, sim_params(1)));
}

void BM_SimulateParallel(benchmark::State& state) {
  const auto src = ernf::random_smooth_source(11);
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ernf::simulate(src, kSensor, sim_params(threads)));
}

struct LossFixture {
  ernf::SensorGeometry sensor{24, 24, ernf::ColorFilter::None, 1};
  ernf::SpiralParams spiral;
  ernf::VoxelScene scene;
  ernf::EventStream stream;
  std::vector<std::size_t> ids;

  LossFixture()
      : spiral([] {
          ernf::SpiralParams s;
          s.duration = 1.0;
          s.revolutions = 1.0;
          return s;
        }()),
        scene(ernf::make_toy_field({16, 1, 0.6, 60.0, 0.5}), ernf::generate_spiral(spiral),
              ernf::toy_intrinsics(sensor), sensor, 32) {
    ernf::SimulationParams p;
    p.t1 = 1.0;
    stream = ernf::simulate(ernf::ModelSource(scene), sensor, p);
    stream.events.resize(std::min<std::size_t>(stream.size(), 1024));
    ids.resize(stream.size());
    std::iota(ids.begin(), ids.end(), std::size_t{0});
  }
};

LossFixture& loss_fixture() {
  static LossFixture f;
  return f;
}

void BM_LossSerial(benchmark::State& state) {
  auto& f = loss_fixture();
  ernf::TotalLossOptions o;
  for (auto _ : state) benchmark::DoNotOptimize(ernf::total_loss_serial(f.stream.events, f.ids, f.scene, o));
}

void BM_LossParallel(benchmark::State& state) {
  auto& f = loss_fixture();
  ernf::TotalLossOptions o;
  o.threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ernf::total_loss(f.stream.events, f.ids, f.scene, o));
}

const ernf::AccumulationSpec kSpec{20, 12, 0.3, 0.2, 0.03, 0.02, 0.0002};

void BM_MonteCarloSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(ernf::acc_monte_carlo_serial(kSpec, 1 << 20, 5));
}

void BM_MonteCarloParallel(benchmark::State& state) {
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ernf::acc_monte_carlo(kSpec, 1 << 20, 5, threads));
}

}  // namespace

BENCHMARK(BM_SimulateSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarloSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarloParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
