// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "cldflood/cldnet.hpp"
#include "cldflood/forcing.hpp"
#include "cldflood/rng.hpp"
#include "cldflood/swe.hpp"
#include "cldflood/terrain.hpp"

using namespace cldflood;

namespace {

struct Scene {
    terrain::TerrainField terrain;
    terrain::TerrainFeatures features;
    swe::FlowState state;
};

const Scene& scene(int n) {
    static std::vector<std::pair<int, Scene>> cache;
    for (auto& [k, s] : cache)
        if (k == n) return s;
    terrain::DemOptions o;
    o.style = terrain::DemStyle::valley;
    o.relief = 192.0;
    o.floodplain_width = 1500.0;
    Scene s;
    s.terrain = terrain::generate_dem({n, n, 100.0}, 3, o);
    s.features = terrain::compute_features(s.terrain);
    s.state = swe::FlowState::dry(s.terrain.grid);
    Rng rng(5);
    for (std::size_t c = 0; c < s.state.size(); ++c) {
        s.state.h[c] = rng.uniform(0.0, 1.0);
        s.state.hu[c] = rng.uniform(-0.2, 0.2);
        s.state.hv[c] = rng.uniform(-0.2, 0.2);
    }
    cache.emplace_back(n, std::move(s));
    return cache.back().second;
}

void threads(benchmark::State& state, int t) {
    omp_set_num_threads(t);
    state.counters["threads"] = t;
}

void BM_step(benchmark::State& st) {
    const auto& s = scene(static_cast<int>(st.range(0)));
    threads(st, static_cast<int>(st.range(1)));
    const swe::SolverConfig c;
    const double dt = swe::cfl_timestep(s.state, c, s.terrain);
    for (auto _ : st) benchmark::DoNotOptimize(swe::step(s.state, s.terrain, {}, dt, c));
    st.SetItemsProcessed(st.iterations() * static_cast<long>(s.state.size()));
}

void BM_step_reference(benchmark::State& st) {
    const auto& s = scene(static_cast<int>(st.range(0)));
    const swe::SolverConfig c;
    const double dt = swe::cfl_timestep(s.state, c, s.terrain);
    for (auto _ : st) benchmark::DoNotOptimize(swe::reference::step(s.state, s.terrain, {}, dt, c));
    st.SetItemsProcessed(st.iterations() * static_cast<long>(s.state.size()));
}

cldnet::Model desk_model(const terrain::RasterGrid& g) {
    cldnet::ModelConfig mc;
    mc.latent_dim = 16;
    mc.fourier_m = 8;
    mc.dyn_depth = 4;
    mc.dyn_width = 32;
    mc.rec_depth = 5;
    mc.rec_width = 64;
    return cldnet::Model(mc, cldnet::CoordinateBox::of(g), forcing::ForcingStats({1e-5}, {1e-5}, false));
}

forcing::ForcingSequence forcing24() {
    forcing::ForcingSequence f;
    for (int k = 0; k < 24; ++k) f.values.push_back(1e-6 * k);
    return f;
}

void BM_predict(benchmark::State& st) {
    const auto& s = scene(static_cast<int>(st.range(0)));
    threads(st, static_cast<int>(st.range(1)));
    const auto m = desk_model(s.terrain.grid);
    const auto q = cldnet::grid_queries(m, &s.features, s.terrain.grid, s.terrain.mask);
    const auto f = forcing24();
    for (auto _ : st) benchmark::DoNotOptimize(cldnet::predict_field(m, f, q));
    st.SetItemsProcessed(st.iterations() * static_cast<long>(q.size() * f.values.size()));
}

void BM_predict_reference(benchmark::State& st) {
    const auto& s = scene(static_cast<int>(st.range(0)));
    const auto m = desk_model(s.terrain.grid);
    const auto q = cldnet::grid_queries(m, &s.features, s.terrain.grid, s.terrain.mask);
    const auto f = forcing24();
    for (auto _ : st) benchmark::DoNotOptimize(cldnet::reference::predict_field(m, f, q));
    st.SetItemsProcessed(st.iterations() * static_cast<long>(q.size() * f.values.size()));
}

}  // namespace

BENCHMARK(BM_step)->ArgsProduct({{64, 256}, {1, 2, 4}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_step_reference)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_predict)->ArgsProduct({{64}, {1, 2, 4}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_predict_reference)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
