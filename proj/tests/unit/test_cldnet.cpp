#include <omp.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cldflood/cldnet.hpp"
#include "cldflood/error.hpp"
#include "cldflood/rng.hpp"
#include "doctest.h"

using namespace cldflood;
using namespace cldflood::cldnet;

namespace {

ModelConfig small_config(bool conditioned) {
    ModelConfig c;
    c.latent_dim = 5;
    c.fourier_m = 4;
    c.dyn_depth = 2;
    c.dyn_width = 8;
    c.rec_depth = 2;
    c.rec_width = 12;
    c.conditioned = conditioned;
    c.latent_dt = 0.5;
    c.seed = 17;
    return c;
}

forcing::ForcingStats stats() { return forcing::ForcingStats({1e-5}, {2e-5}, false); }

forcing::ForcingSequence random_forcing(std::size_t steps, std::uint64_t seed) {
    Rng rng(seed);
    forcing::ForcingSequence f;
    f.dim = 1;
    for (std::size_t k = 0; k < steps; ++k) f.values.push_back(rng.uniform(0.0, 4e-5));
    return f;
}

struct Scene {
    terrain::TerrainField terrain;
    terrain::TerrainFeatures features;
};

Scene scene(int n = 12) {
    terrain::DemOptions o;
    o.style = terrain::DemStyle::valley;
    o.channel_manning = 0.02;
    Scene s;
    s.terrain = terrain::generate_dem({n, n, 50.0, 1000.0, 2000.0}, 3, o);
    s.features = terrain::compute_features(s.terrain);
    return s;
}

}  // namespace

TEST_CASE("network shapes follow the config") {
    const auto sc = scene();
    for (bool cond : {true, false}) {
        const Model m(small_config(cond), CoordinateBox::of(sc.terrain.grid), stats());
        CHECK(m.dyn().input_size() == 5 + 1);
        CHECK(m.dyn().output_size() == 5);
        CHECK(m.rec().input_size() == 5 + 8 + (cond ? 3 : 0));
        CHECK(m.rec().output_size() == 3);
        CHECK(m.dyn().layer_count() == 3u);
        CHECK(m.kind() == (cond ? "cldnet" : "ldnet"));
    }
    ModelConfig bad = small_config(true);
    bad.latent_dt = 0.0;
    CHECK_THROWS_AS(Model(bad, {}, stats()), ConfigError);
    const Model m(small_config(true), {}, stats());
    CHECK_THROWS_AS(Model(small_config(false), {}, stats(), m.dyn(), m.rec(), m.embedding()), ContractError);
}

TEST_CASE("zero dynamics keep the latent at zero") {
    Model m(small_config(true), {}, stats());
    std::fill(m.dyn().mutable_params().begin(), m.dyn().mutable_params().end(), 0.0);
    const auto lt = rollout_latent(m, random_forcing(6, 1));
    CHECK(lt.steps() == 6u);
    for (double v : lt.states) CHECK(v == 0.0);
}

TEST_CASE("constant right-hand side integrates linearly") {
    Model m(small_config(false), {}, stats());
    auto p = m.dyn().mutable_params();
    std::fill(p.begin(), p.end(), 0.0);
    const std::vector<double> c{0.3, -1.0, 2.0, 0.0, 7.5};
    const std::size_t last = m.dyn().layer_count() - 1;
    const std::size_t bias = m.dyn().weight_offset(last) +
                             static_cast<std::size_t>(m.dyn().widths()[last]) * m.dyn().widths()[last + 1];
    for (std::size_t i = 0; i < c.size(); ++i) p[bias + i] = c[i];
    const auto lt = rollout_latent(m, random_forcing(10, 2));
    for (std::size_t k = 0; k < 10; ++k)
        for (int i = 0; i < 5; ++i)
            CHECK(lt.state(k)[i] == doctest::Approx((k + 1) * 0.5 * c[i]).epsilon(1e-14));
}

TEST_CASE("rollout matches an independent recurrence") {
    const Model m(small_config(true), {}, stats());
    const auto f = m.forcing_stats().standardize(random_forcing(12, 3));
    const auto lt = rollout_latent(m, f);
    std::vector<double> s(5, 0.0);
    for (std::size_t k = 0; k < 12; ++k) {
        std::vector<double> in = s;
        in.push_back(f.values[k]);
        const auto rhs = m.dyn().forward(std::span<const double>(in));
        for (int i = 0; i < 5; ++i) {
            s[i] = s[i] + 0.5 * rhs[i];
            CHECK(std::abs(lt.state(k)[i] - s[i]) <= 1e-14);
        }
    }
    const auto cached = rollout_latent_cached(m, f);
    CHECK(cached.latent.states == lt.states);
    CHECK(cached.steps.size() == 12u);
}

TEST_CASE("non-finite latent names the step") {
    Model m(small_config(false), {}, stats());
    auto f = random_forcing(4, 1);
    f.values[2] = std::nan("");
    try {
        (void)rollout_latent(m, f);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("step 2") != std::string::npos);
    }
    forcing::ForcingSequence wrong;
    wrong.dim = 2;
    wrong.values.assign(4, 0.0);
    CHECK_THROWS_AS(rollout_latent(m, wrong), ContractError);
}

TEST_CASE("decode_point") {
    const auto sc = scene();
    Model m(small_config(true), CoordinateBox::of(sc.terrain.grid), stats());
    const std::vector<double> s{0.1, -0.2, 0.3, 0.0, 1.0};
    CHECK_THROWS_AS(decode_point(m, s.data(), {0.5, 0.5}, std::nullopt), ContractError);
    const auto a = decode_point(m, s.data(), {0.5, 0.5}, terrain::FeatureTriple{0, 0, 2});
    const auto b = decode_point(m, s.data(), {0.5, 0.5}, terrain::FeatureTriple{0, 0, 5});
    CHECK(a != b);

    const Model u(small_config(false), CoordinateBox::of(sc.terrain.grid), stats());
    CHECK_THROWS_AS(decode_point(u, s.data(), {0.5, 0.5}, terrain::FeatureTriple{0, 0, 2}), ContractError);

    Model z = m;
    std::fill(z.rec().mutable_params().begin(), z.rec().mutable_params().end(), 0.0);
    CHECK(decode_point(z, s.data(), {0.2, 0.9}, terrain::FeatureTriple{1, 2, 3}) == Output{0, 0, 0});
}

TEST_CASE("queries") {
    const auto sc = scene(8);
    const auto& g = sc.terrain.grid;
    const Model m(small_config(true), CoordinateBox::of(g), stats());
    const auto all = grid_queries(m, &sc.features, g, sc.terrain.mask);
    CHECK(all.size() == g.cell_count());
    CHECK(all.spatial.rows == m.spatial_width());
    CHECK(all.spatial.cols == static_cast<int>(g.cell_count()));
    CHECK(all.xi.front()[0] == doctest::Approx(0.5 / 8));
    const auto sub = select_queries(all, {3, 10});
    CHECK(sub.x == std::vector<double>{all.x[3], all.x[10]});
    CHECK(sub.phi[1] == all.phi[10]);
    CHECK_THROWS_AS(make_queries(m, nullptr, {g.center_x(0)}, {g.center_y(0)}), ContractError);
    CHECK_THROWS_AS(make_queries(m, &sc.features, {g.max_x() + 1.0}, {g.center_y(0)}), DomainError);

    auto masked = sc.terrain.mask;
    masked[0] = 0;
    CHECK(grid_queries(m, &sc.features, g, masked).size() == g.cell_count() - 1);
}

TEST_CASE("chunked prediction equals the serial reference") {
    const auto sc = scene(10);
    const auto& g = sc.terrain.grid;
    const auto f = random_forcing(7, 5);
    for (bool cond : {true, false}) {
        const Model m(small_config(cond), CoordinateBox::of(g), stats());
        const auto q = grid_queries(m, cond ? &sc.features : nullptr, g, sc.terrain.mask);
        const auto ref = reference::predict_field(m, f, q);
        omp_set_num_threads(3);
        for (std::size_t chunk : {1u, 7u, 64u, 1000u}) CHECK(predict_field(m, f, q, chunk).values == ref.values);
        omp_set_num_threads(1);
        CHECK(predict_field(m, f, q).values == ref.values);
    }
}

TEST_CASE("point queries equal the full grid bit for bit") {
    const auto sc = scene(9);
    const auto& g = sc.terrain.grid;
    const Model m(small_config(true), CoordinateBox::of(g), stats());
    const auto f = random_forcing(5, 8);
    const auto full = predict_field(m, f, grid_queries(m, &sc.features, g, sc.terrain.mask));
    Rng rng(2);
    std::vector<std::size_t> cells;
    for (int k = 0; k < 15; ++k) cells.push_back(static_cast<std::size_t>(rng.uniform() * g.cell_count()));
    std::vector<double> x, y;
    for (std::size_t c : cells) {
        x.push_back(g.center_x(static_cast<int>(c % g.nx)));
        y.push_back(g.center_y(static_cast<int>(c / g.nx)));
    }
    const auto pts = predict_field(m, f, make_queries(m, &sc.features, x, y));
    for (std::size_t k = 0; k < full.steps; ++k)
        for (int v = 0; v < 3; ++v)
            for (std::size_t p = 0; p < cells.size(); ++p) CHECK(pts.at(k, v, p) == full.at(k, v, cells[p]));

    // One cell alone and inside different subsets.
    for (std::size_t p = 0; p < cells.size(); ++p) {
        const auto one = predict_field(m, f, make_queries(m, &sc.features, {x[p]}, {y[p]}));
        for (std::size_t k = 0; k < full.steps; ++k) CHECK(one.at(k, 0, 0) == full.at(k, 0, cells[p]));
    }
}

TEST_CASE("prediction memory scales with the query count") {
    const auto sc = scene(32);
    const auto& g = sc.terrain.grid;
    const Model m(small_config(true), CoordinateBox::of(g), stats());
    const auto f = random_forcing(25, 8);
    PredictMemory few, full;
    std::vector<double> x, y;
    for (int k = 0; k < 10; ++k) {
        x.push_back(g.center_x(k));
        y.push_back(g.center_y(2 * k));
    }
    (void)predict_field(m, f, make_queries(m, &sc.features, x, y), 512, &few);
    (void)predict_field(m, f, grid_queries(m, &sc.features, g, sc.terrain.mask), 512, &full);
    CHECK(few.output_bytes == 25u * 3 * 10 * sizeof(double));
    CHECK(full.output_bytes == 25u * 3 * g.cell_count() * sizeof(double));
    // Workspace is bounded by the chunk, not by the raster.
    CHECK(few.workspace_bytes < full.workspace_bytes);
    CHECK(full.workspace_bytes < 512u * 64 * sizeof(double));
}
