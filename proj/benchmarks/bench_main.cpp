#include <benchmark/benchmark.h>

#include <random>

#include "cdt/analysis.hpp"
#include "cdt/control.hpp"
#include "cdt/kernel.hpp"
#include "cdt/training.hpp"

using namespace cdt;

namespace {

struct Setup {
    NetworkState state;
    Batch batch;
};

Setup make_setup(int rows, int width) {
    NetworkSpec spec;
    spec.input_dim = 8;
    spec.hidden_widths = {width};
    Setup s{init_network(spec, 1), {}};
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    s.batch.inputs = Matrix::NullaryExpr(rows, 8, [&] { return nd(rng); });
    s.batch.targets = Vector::NullaryExpr(rows, [&] { return nd(rng); });
    return s;
}

void BM_Jacobian(benchmark::State& st) {
    const Setup s = make_setup(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
    for (auto _ : st) benchmark::DoNotOptimize(jacobian(s.state, s.batch));
}
BENCHMARK(BM_Jacobian)->Args({32, 64})->Args({89, 256})->Unit(benchmark::kMillisecond);

void BM_Kernel(benchmark::State& st) {
    const Setup s = make_setup(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)));
    for (auto _ : st) benchmark::DoNotOptimize(build_kernel(s.state, s.batch));
}
BENCHMARK(BM_Kernel)->Args({32, 64})->Args({89, 256})->Unit(benchmark::kMillisecond);

void BM_Reachability(benchmark::State& st) {
    const Setup s = make_setup(static_cast<int>(st.range(0)), 256);
    const Kernel k = build_kernel(s.state, s.batch);
    for (auto _ : st) benchmark::DoNotOptimize(reachability_check(k, 0.01));
}
BENCHMARK(BM_Reachability)->Arg(32)->Arg(89)->Unit(benchmark::kMillisecond);

void BM_Dare(benchmark::State& st) {
    const Setup s = make_setup(static_cast<int>(st.range(0)), 256);
    const Kernel k = build_kernel(s.state, s.batch);
    const double alpha = 0.5 * stability_check(k, 1.0, LossModel(LossKind::sse)).safe_alpha_bound;
    const AugmentedSystem sys = build_augmented_system(k, alpha, s.batch.targets, 1.0, 0.1);
    DareOptions o;
    o.method = st.range(1) ? DareMethod::doubling : DareMethod::fixed_point;
    for (auto _ : st) benchmark::DoNotOptimize(solve_dare(sys, o));
    st.SetLabel(o.method == DareMethod::doubling ? "doubling" : "fixed_point");
}
BENCHMARK(BM_Dare)->Args({16, 0})->Args({16, 1})->Args({32, 0})->Args({32, 1})->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& st) {
    const Setup s = make_setup(89, 256);
    const Kernel k = build_kernel(s.state, s.batch);
    const LossModel loss(LossKind::mse);
    const FeedbackLaw law = [&] {
        DareOptions o;
        o.method = DareMethod::doubling;
        return solve_dare(build_augmented_system(k, 0.01, s.batch.targets, 1.0, 0.1, LossKind::mse), o);
    }();
    for (auto _ : st) {
        if (st.range(0))
            benchmark::DoNotOptimize(cdt_step(s.state, s.batch, loss, law, 0.01));
        else
            benchmark::DoNotOptimize(gd_step(s.state, s.batch, loss, 0.01));
    }
    st.SetLabel(st.range(0) ? "cdt" : "gd");
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();
