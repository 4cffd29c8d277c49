// Microbenchmarks for the hot reduction/assembly paths: the OpenMP
// deterministic reduction against the serial reference, grid quadrature,
// and Galerkin matrix assembly at the reference sizes.

#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>

#include "exflow/common.hpp"
#include "exflow/evolution.hpp"
#include "exflow/functionals.hpp"
#include "exflow/geometry.hpp"
#include "exflow/steady.hpp"
#include "exflow/stream.hpp"

namespace {

using namespace exflow;

double node_term(const PolarGrid& g, std::size_t i) {
    const double r = g.node_r(i);
    return g.node_weight(i) * std::exp(-r) * (1.0 + std::cos(g.node_theta(i)));
}

void BM_reduce_serial(benchmark::State& state) {
    const PolarGrid g = build_polar_grid(16.0, std::size_t(state.range(0)), 64);
    for (auto _ : state) {
        double s = reduce_serial(g.n_nodes(), [&](std::size_t i) { return node_term(g, i); });
        benchmark::DoNotOptimize(s);
    }
    state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(g.n_nodes()));
}
BENCHMARK(BM_reduce_serial)->Arg(64)->Arg(256)->Arg(1024);

void BM_reduce_indexed(benchmark::State& state) {
    const PolarGrid g = build_polar_grid(16.0, std::size_t(state.range(0)), 64);
    for (auto _ : state) {
        double s = reduce_indexed(g.n_nodes(), [&](std::size_t i) { return node_term(g, i); });
        benchmark::DoNotOptimize(s);
    }
    state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(g.n_nodes()));
}
BENCHMARK(BM_reduce_indexed)->Arg(64)->Arg(256)->Arg(1024);

void BM_assemble_system(benchmark::State& state) {
    auto grid = std::make_shared<const PolarGrid>(
        build_polar_grid(8.0, 78, 22, Stretch::geometric, 6));
    auto basis = std::make_shared<const GalerkinBasis>(
        build_galerkin_basis(grid, int(state.range(0)), 12));
    for (auto _ : state) {
        GalerkinSystem sys = assemble_system(basis, {M_PI, 0.0, 0.0});
        benchmark::DoNotOptimize(sys.M);
    }
}
BENCHMARK(BM_assemble_system)->Arg(2)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_nonlinear_apply(benchmark::State& state) {
    auto grid = std::make_shared<const PolarGrid>(
        build_polar_grid(8.0, 78, 22, Stretch::geometric, 6));
    auto basis = std::make_shared<const GalerkinBasis>(
        build_galerkin_basis(grid, int(state.range(0)), 12));
    GalerkinSystem sys = assemble_system(basis, {M_PI, 0.0, 0.0});
    SplitMix64 rng(7);
    Eigen::VectorXd xi(long(basis->n()));
    for (long i = 0; i < xi.size(); ++i) xi[i] = rng.uniform(-1.0, 1.0);
    for (auto _ : state) {
        Eigen::VectorXd n = sys.nonlinear(xi);
        benchmark::DoNotOptimize(n);
    }
}
BENCHMARK(BM_nonlinear_apply)->Arg(2)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
