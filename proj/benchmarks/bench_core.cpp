#include <benchmark/benchmark.h>

#include "treehaar/certify.hpp"
#include "treehaar/rng.hpp"

using namespace treehaar;

namespace {

struct Fixture {
    DyadicTree tree;
    HaarSystem system;
    AlphaSequence alphas;
    LeafFunction f;
};

Fixture make_fixture(int depth) {
    DyadicTree tree = build_uniform(depth, 2);
    HaarSystem system = build_haar(tree);
    AlphaSequence alphas = alphas_plus_minus(tree, system);
    Rng rng(7);
    LeafFunction f = random_leaf_function(tree, rng, true);
    return {std::move(tree), std::move(system), std::move(alphas), std::move(f)};
}

} // namespace

static void bm_build_haar(benchmark::State& state) {
    const DyadicTree tree = build_uniform(static_cast<int>(state.range(0)), 2);
    for (auto _ : state)
        benchmark::DoNotOptimize(build_haar(tree));
    state.SetComplexityN(tree.leaf_count());
}
BENCHMARK(bm_build_haar)->Arg(6)->Arg(10)->Arg(14)->Complexity();

static void bm_analyze_synthesize(benchmark::State& state) {
    const Fixture fx = make_fixture(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        const HaarCoefficients coeffs = analyze(fx.tree, fx.system, fx.f);
        benchmark::DoNotOptimize(synthesize(fx.tree, fx.system, coeffs));
    }
    state.SetComplexityN(fx.tree.leaf_count());
}
BENCHMARK(bm_analyze_synthesize)->Arg(6)->Arg(10)->Arg(14)->Complexity();

static void bm_multiplier_constant(benchmark::State& state) {
    const Fixture fx = make_fixture(static_cast<int>(state.range(0)));
    const Symbol eta =
        Symbol::constant(std::vector<double>(fx.system.function_count(), 0.5));
    for (auto _ : state)
        benchmark::DoNotOptimize(apply_multiplier(fx.tree, fx.system, eta, fx.f));
}
BENCHMARK(bm_multiplier_constant)->Arg(6)->Arg(10)->Arg(14);

static void bm_multiplier_variable(benchmark::State& state) {
    const Fixture fx = make_fixture(static_cast<int>(state.range(0)));
    const Symbol eta = petermichl_symbol(fx.tree, fx.system, fx.alphas);
    for (auto _ : state)
        benchmark::DoNotOptimize(apply_multiplier(fx.tree, fx.system, eta, fx.f));
}
BENCHMARK(bm_multiplier_variable)->Arg(6)->Arg(10)->Arg(14);

static void bm_petermichl_apply(benchmark::State& state) {
    const Fixture fx = make_fixture(static_cast<int>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(petermichl_apply(fx.tree, fx.system, fx.alphas, fx.f));
}
BENCHMARK(bm_petermichl_apply)->Arg(6)->Arg(10)->Arg(14);

static void bm_assemble_kernel(benchmark::State& state) {
    const Fixture fx = make_fixture(static_cast<int>(state.range(0)));
    const Symbol eta = petermichl_symbol(fx.tree, fx.system, fx.alphas);
    for (auto _ : state)
        benchmark::DoNotOptimize(assemble_kernel(fx.tree, fx.system, eta));
}
BENCHMARK(bm_assemble_kernel)->Arg(6)->Arg(8)->Arg(10);

static void bm_delta_matrix(benchmark::State& state) {
    const DyadicTree tree = build_uniform(static_cast<int>(state.range(0)), 2);
    for (auto _ : state)
        benchmark::DoNotOptimize(delta_matrix(tree));
}
BENCHMARK(bm_delta_matrix)->Arg(6)->Arg(8)->Arg(10);

static void bm_ultrametric_exhaustive(benchmark::State& state) {
    const DyadicTree tree = build_uniform(static_cast<int>(state.range(0)), 2);
    for (auto _ : state)
        benchmark::DoNotOptimize(verify_ultrametric(tree, ScanMode::exhaustive));
}
BENCHMARK(bm_ultrametric_exhaustive)->Arg(5)->Arg(7);

static void bm_smoothness_scan(benchmark::State& state) {
    const Fixture fx = make_fixture(static_cast<int>(state.range(0)));
    const Symbol eta = petermichl_symbol(fx.tree, fx.system, fx.alphas);
    const KernelMatrix kernel = assemble_kernel(fx.tree, fx.system, eta);
    for (auto _ : state)
        benchmark::DoNotOptimize(smoothness_constants(fx.tree, kernel));
}
BENCHMARK(bm_smoothness_scan)->Arg(5)->Arg(7);

BENCHMARK_MAIN();
