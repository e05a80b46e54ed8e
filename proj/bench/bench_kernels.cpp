// Serial reference kernels against their OpenMP counterparts, plus one full leapfrog
// step on each backend. Sizes are interior nodes of square 2D grids.
#include <benchmark/benchmark.h>

#include <vector>

#include "dampwave/field.hpp"
#include "dampwave/kernels.hpp"
#include "dampwave/model.hpp"
#include "dampwave/solver.hpp"

using namespace dampwave;

namespace {

DiscreteOperator square_operator(int n)
{
    const double l[] = {1.0, 1.0};
    const int c[] = {n, n};
    return assemble(build_grid(2, l, c), CoefficientField::smooth(1.0, 0.5, 0.2));
}

std::vector<double> sample(std::size_t n)
{
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = 1.0 / (1.0 + static_cast<double>(i % 97));
    return x;
}

template <kernels::Backend B>
void BM_matvec(benchmark::State& state)
{
    const auto op = square_operator(static_cast<int>(state.range(0)));
    const auto x = sample(op.lumped_mass.size());
    std::vector<double> y(x.size());
    for (auto _ : state) {
        kernels::matvec(B, op.stiffness, x, y);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * op.stiffness.nonZeros());
}

template <kernels::Backend B>
void BM_power_sum(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0) * state.range(0));
    const auto w = sample(n);
    const auto x = sample(n);
    for (auto _ : state)
        benchmark::DoNotOptimize(kernels::weighted_power_sum(B, w, x, 4.0));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}

template <kernels::Backend B>
void BM_dot(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0) * state.range(0));
    const auto x = sample(n);
    const auto y = sample(n);
    for (auto _ : state)
        benchmark::DoNotOptimize(kernels::dot(B, x, y));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}

template <kernels::Backend B>
void BM_step(benchmark::State& state)
{
    auto op = square_operator(static_cast<int>(state.range(0)));
    const Grid g = op.grid;
    auto u0 = GridFunction::sample(g, [](double x, double y) { return 0.1 * x * (1 - x) * y * (1 - y); });
    const Problem pr(std::move(op), Feedback::power(1.0, 3.0), DampingSchedule::constant(1.0), 3.0,
                     u0, GridFunction(g));
    StepperConfig cfg;
    cfg.dt = 1e-4;
    cfg.backend = B;
    Stepper stepper(pr, cfg);
    State s = stepper.initial_state();
    for (auto _ : state) {
        benchmark::DoNotOptimize(stepper.solve_velocity(s));
        stepper.advance(s);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(g.size()));
}

constexpr auto serial = kernels::Backend::serial;
constexpr auto openmp = kernels::Backend::openmp;

} // namespace

BENCHMARK(BM_matvec<serial>)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(BM_matvec<openmp>)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(BM_power_sum<serial>)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(BM_power_sum<openmp>)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(BM_dot<serial>)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(BM_dot<openmp>)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(BM_step<serial>)->Arg(64)->Arg(256);
BENCHMARK(BM_step<openmp>)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
