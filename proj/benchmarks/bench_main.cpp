#include "riskhjb/control_law.hpp"
#include "riskhjb/ergodic_solver.hpp"
#include "riskhjb/hjb_solver.hpp"
#include "riskhjb/simulation.hpp"

#include <benchmark/benchmark.h>

using namespace riskhjb;

namespace {

Grid line(int points) { return Grid(Vector::Constant(1, -4.0), Vector::Constant(1, 4.0), {points}); }

void BM_Selector(benchmark::State& state) {
    const MarketModel m = make_model(ou_factor_spec());
    const ControlParams params(2.0);
    const Vector x = Vector::Constant(1, 0.3);
    const Vector p = Vector::Constant(1, 0.1);
    for (auto _ : state) benchmark::DoNotOptimize(minimizing_selector(m, x, p, params));
}
BENCHMARK(BM_Selector);

// one unit of horizon, so time per iteration scales with nodes * steps
void BM_FiniteHorizon(benchmark::State& state) {
    const MarketModel m = make_model(ou_factor_spec());
    const ControlParams params(2.0);
    SolverConfig cfg;
    cfg.dt = 1e-3;
    const Grid g = line(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(solve_finite_horizon(m, params, 1.0, g, cfg));
    state.SetItemsProcessed(state.iterations() * state.range(0) * 1000);
}
BENCHMARK(BM_FiniteHorizon)->Arg(101)->Arg(401)->Unit(benchmark::kMillisecond);

void BM_Ergodic(benchmark::State& state) {
    const MarketModel m = make_model(ou_factor_spec());
    const ControlParams params(2.0);
    SolverConfig cfg;
    cfg.dt = 1e-2;
    const Grid g = line(201);
    for (auto _ : state) benchmark::DoNotOptimize(solve_ergodic(m, params, g, cfg));
}
BENCHMARK(BM_Ergodic)->Unit(benchmark::kMillisecond);

void BM_Simulation(benchmark::State& state) {
    const MarketModel m = make_model(ou_factor_spec());
    const ControlParams params(2.0);
    SimConfig cfg;
    cfg.n_paths = static_cast<std::size_t>(state.range(0));
    cfg.dt = 1e-2;
    cfg.seed = 1;
    const Strategy s = constant_strategy("const", Vector::Constant(1, 0.5));
    for (auto _ : state) benchmark::DoNotOptimize(estimate_criterion_finite(simulate(m, s, Vector::Zero(1), 1.0, 1.0, cfg), params));
    state.SetItemsProcessed(state.iterations() * state.range(0) * 100);
}
BENCHMARK(BM_Simulation)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
