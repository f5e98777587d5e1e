#include <benchmark/benchmark.h>

#include "pdmp/coupling.hpp"
#include "pdmp/models.hpp"
#include "pdmp/simulate.hpp"
#include "pdmp/solver.hpp"
#include "pdmp/value.hpp"

using namespace pdmp;

namespace {

class Null final : public PathObserver {};

void BM_SimulatePhagePath(benchmark::State& state) {
  const auto m = phage_lambda_model();
  const Policy pol = Policy::constant({ControlVec{0.5}, ControlVec{0.5}});
  const double horizon = static_cast<double>(state.range(0));
  std::uint64_t i = 0;
  Null obs;
  for (auto _ : state) {
    Rng rng({1, i++});
    benchmark::DoNotOptimize(simulate_path(*m, 0, StateVec{5.0, 5.0}, pol, horizon, rng, {}, obs));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SimulatePhagePath)->Arg(10)->Arg(50);

void BM_AbelEstimate(benchmark::State& state) {
  const auto m = phage_lambda_model();
  const Policy pol = Policy::constant({ControlVec{0.5}, ControlVec{0.5}});
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_abel(*m, pol, 0, StateVec{5.0, 5.0}, 0.5, 100, 3));
  }
}
BENCHMARK(BM_AbelEstimate)->Unit(benchmark::kMillisecond);

void BM_BellmanApply(benchmark::State& state) {
  const auto m = phage_lambda_model();
  const auto nodes = static_cast<std::size_t>(state.range(0));
  const StateGrid grid(*m->info().invariant_box, {nodes, nodes});
  const BellmanOperator op(*m, grid, 0.5, 4, control_grid({linspace(0, 1, 5)}, {linspace(0, 1, 5)}));
  std::vector<std::vector<double>> in(5, std::vector<double>(grid.node_count(), 0.3)), out;
  for (auto _ : state) {
    op.apply(in, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(5 * grid.node_count()));
}
BENCHMARK(BM_BellmanApply)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_SelectWHat(benchmark::State& state) {
  const auto m = phage_lambda_model();
  const auto grid = uniform_v_grid(*m, 33);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        select_w_hat(*m, 0, StateVec{2.0, 8.0}, StateVec{6.0, 3.0}, ControlVec{0.4}, ControlVec{0.7}, grid));
  }
}
BENCHMARK(BM_SelectWHat);

}  // namespace
BENCHMARK_MAIN();
