// Serial reference vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include <random>

#include "mf/engine.hpp"
#include "mf/kernels.hpp"
#include "mf/mc.hpp"

using namespace mf;

namespace {

SparseMatrix banded(int n, int band) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Triplet> e;
    for (int r = 0; r < n; ++r)
        for (int c = std::max(0, r - band); c < std::min(n, r + band + 1); ++c) e.push_back({r, c, u(rng)});
    return from_triplets(n, std::move(e));
}

void spmv_bench(benchmark::State& st, Exec ex) {
    SparseMatrix A = banded(static_cast<int>(st.range(0)), 8);
    std::vector<double> x(A.n, 1.0), y(A.n);
    for (auto _ : st) {
        spmv(ex, A, x.data(), y.data());
        benchmark::DoNotOptimize(y.data());
    }
    st.SetItemsProcessed(st.iterations() * static_cast<long long>(A.nnz()));
}

void BM_spmv_serial(benchmark::State& st) { spmv_bench(st, Exec::Serial); }
void BM_spmv_parallel(benchmark::State& st) { spmv_bench(st, Exec::Parallel); }

void mc_bench(benchmark::State& st, Exec ex) {
    BmConfig c;
    c.N = static_cast<int>(st.range(0));
    c.step = 1e-2;
    c.samples = 400;
    std::vector<PartitionedWord> T{singletons({{1, 2}}), singletons({{1}, {-1}})};
    for (auto _ : st) benchmark::DoNotOptimize(estimate_observables(c, {1.0, 0.5}, T, ex));
    st.SetItemsProcessed(st.iterations() * c.samples);
}

void BM_mc_serial(benchmark::State& st) { mc_bench(st, Exec::Serial); }
void BM_mc_parallel(benchmark::State& st) { mc_bench(st, Exec::Parallel); }

}  // namespace

BENCHMARK(BM_spmv_serial)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_spmv_parallel)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_mc_serial)->Arg(3)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mc_parallel)->Arg(3)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
