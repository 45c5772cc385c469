#include "calibra/estimators.hpp"
#include "calibra/lasso.hpp"
#include "calibra/logistic.hpp"
#include "calibra/rng.hpp"
#include "calibra/simulator.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace calibra;

namespace {

Matrix gaussian(std::size_t n, std::size_t p, std::uint64_t seed, bool intercept = true) {
    Rng rng(seed);
    Matrix m(n, p);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) m(i, j) = rng.normal();
        if (intercept) m(i, 0) = 1.0;
    }
    return m;
}

void BM_OlsSolve(benchmark::State& st) {
    auto n = static_cast<std::size_t>(st.range(0));
    Matrix x = gaussian(n, 4, 1);
    Rng rng(2);
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = x(i, 1) - 0.5 * x(i, 2) + rng.normal();
    for (auto _ : st) benchmark::DoNotOptimize(ols_solve(x, y));
}
BENCHMARK(BM_OlsSolve)->Arg(400)->Arg(5000)->Arg(50000);

void BM_Irls(benchmark::State& st) {
    auto n = static_cast<std::size_t>(st.range(0));
    Matrix x = gaussian(n, 3, 3);
    Rng rng(4);
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(2.0 - x(i, 1) - 0.5 * x(i, 2))));
    for (auto _ : st) benchmark::DoNotOptimize(fit_logistic_irls(x, y));
}
BENCHMARK(BM_Irls)->Arg(1000)->Arg(10000);

void BM_EstimateCrs(benchmark::State& st) {
    Scenario s = find_scenario(st.range(0) ? "dag4-base-binary" : "dag4-base-continuous");
    auto [m, v] = generate_scenario_data(s, 5);
    OutcomeModelSpec spec;
    spec.link = st.range(0) ? Link::logit : Link::identity;
    auto strat = AdjustmentStrategy::uniform(StrategyLabel::OM, {"V"});
    for (auto _ : st) benchmark::DoNotOptimize(estimate_crs(m, v, strat, spec));
}
BENCHMARK(BM_EstimateCrs)->Arg(0)->Arg(1);

void BM_LassoPath(benchmark::State& st) {
    auto p = static_cast<std::size_t>(st.range(0));
    Matrix x = gaussian(400, p, 6, false);
    Rng rng(7);
    Vector y(400);
    for (std::size_t i = 0; i < 400; ++i) y[i] = x(i, 1) + 0.3 * x(i, 2) + rng.normal();
    Vector grid = default_lambda_grid();
    for (auto _ : st) benchmark::DoNotOptimize(fit_lasso_path(x, y, grid));
}
BENCHMARK(BM_LassoPath)->Arg(5)->Arg(30);

void BM_CvLasso(benchmark::State& st) {
    Matrix x = gaussian(400, 10, 8, false);
    Rng rng(9);
    Vector y(400);
    for (std::size_t i = 0; i < 400; ++i) y[i] = x(i, 1) + rng.normal();
    Vector grid = default_lambda_grid();
    for (auto _ : st) benchmark::DoNotOptimize(cross_validate_lasso(x, y, grid, 10, 1));
}
BENCHMARK(BM_CvLasso);

}

BENCHMARK_MAIN();
