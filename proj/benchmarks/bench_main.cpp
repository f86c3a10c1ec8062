#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "stieltjes/expr.hpp"
#include "stieltjes/gcalc.hpp"
#include "stieltjes/scenario.hpp"
#include "stieltjes/solver.hpp"

using namespace stieltjes;

namespace {

void BM_SolveLinearJumps(benchmark::State& state) {
  const auto sc = buildScenario(builtinConfig("linear_jumps"));
  auto dom = sc.domain;
  dom.horizon = static_cast<double>(state.range(0));
  const std::vector<double> x0{1.0};
  for (auto _ : state) benchmark::DoNotOptimize(solveIVP(sc.derivator, sc.field, dom, x0, 1e-3));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 1000);
}
BENCHMARK(BM_SolveLinearJumps)->Arg(10)->Arg(100);

void BM_SolveCyanobacteria(benchmark::State& state) {
  const auto sc = buildScenario(builtinConfig("cyanobacteria"));
  const std::vector<double> x0{9.5, 0.12};
  for (auto _ : state) benchmark::DoNotOptimize(solveIVP(sc.derivator, sc.field, sc.domain, x0, 1e-3));
}
BENCHMARK(BM_SolveCyanobacteria)->Unit(benchmark::kMillisecond);

void BM_SolveExpressionTwin(benchmark::State& state) {
  const auto sc = buildScenario(builtinConfig("allee_train"));
  const auto twin = buildSystem(builtinSystemAsExpressions("allee_train"));
  const std::vector<double> x0{45.0};
  for (auto _ : state) benchmark::DoNotOptimize(solveIVP(sc.derivator, twin, sc.domain, x0, 1e-3));
}
BENCHMARK(BM_SolveExpressionTwin)->Unit(benchmark::kMillisecond);

void BM_LsIntegrate(benchmark::State& state) {
  const auto sc = buildScenario(builtinConfig("rational_decay"));
  const TwoBranchScalar w{[](double t) { return 2.0 * t / (1.0 + t * t); }, [](double) { return 0.75; }};
  const double b = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(lsIntegrate(sc.derivator, w, 0.0, b));
}
BENCHMARK(BM_LsIntegrate)->Arg(10)->Arg(1000)->Arg(10000);

void BM_GExpDayNight(benchmark::State& state) {
  const auto sc = buildScenario(builtinConfig("cyanobacteria"));
  const TwoBranchScalar p{[](double t) { return -0.1 * std::sin(t); }, {}};
  for (auto _ : state) benchmark::DoNotOptimize(gExp(sc.derivator, p, 0.0, 200.0));
}
BENCHMARK(BM_GExpDayNight);

void BM_ExprEval(benchmark::State& state) {
  const auto e = Expr::parse("0.001*x1*(1-x1/100)*(x1/50-1) + sin(t)*exp(-x2^2)", 2);
  std::vector<double> x{45.0, 0.3};
  double t = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(e.eval(t, x));
    t += 1e-3;
  }
}
BENCHMARK(BM_ExprEval);

void BM_ExprParse(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(Expr::parse("0.001*x1*(1-x1/100)*(x1/50-1) + sin(t)*exp(-x2^2)", 2));
  }
}
BENCHMARK(BM_ExprParse);

}  // namespace

BENCHMARK_MAIN();
