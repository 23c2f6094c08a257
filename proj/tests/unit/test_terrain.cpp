#include <cmath>
#include <limits>

#include "cldflood/error.hpp"
#include "cldflood/rng.hpp"
#include "cldflood/terrain.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cldflood;
using namespace cldflood::terrain;

namespace {

TerrainField flat(int nx, int ny, double dx, double bed = 0.0, double n = 0.03) {
    TerrainField t;
    t.grid = {nx, ny, dx, 0.0, 0.0};
    t.bed.assign(t.grid.cell_count(), bed);
    t.manning.assign(t.grid.cell_count(), n);
    t.mask.assign(t.grid.cell_count(), 1);
    return t;
}

DemOptions style(DemStyle s) {
    DemOptions o;
    o.style = s;
    return o;
}

}  // namespace

TEST_CASE("grid invariants") {
    CHECK_THROWS_AS((RasterGrid{1, 4, 1.0}).validate(), ConfigError);
    CHECK_THROWS_AS((RasterGrid{4, 4, 0.0}).validate(), ConfigError);
    const RasterGrid g{5, 3, 2.5, 10.0, -4.0};
    CHECK_NOTHROW(g.validate());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double x = g.center_x(i), y = g.center_y(j);
            CHECK(x == 10.0 + i * 2.5);
            CHECK(y == -4.0 + j * 2.5);
            CHECK(static_cast<int>(std::lround((x - g.origin_x) / g.dx)) == i);
            CHECK(static_cast<int>(std::lround((y - g.origin_y) / g.dx)) == j);
        }
}

TEST_CASE("tilted plane is analytic") {
    const RasterGrid g{8, 8, 30.0};
    DemOptions o = style(DemStyle::tilted_plane);
    o.plane_gradient = 0.01;
    const TerrainField t = generate_dem(g, 1, o);
    for (int j = 0; j < 8; ++j)
        for (int i = 0; i < 8; ++i) CHECK(t.bed[g.index(i, j)] == 0.01 * i * 30.0);
}

TEST_CASE("generators are deterministic with nontrivial relief") {
    const RasterGrid g{8, 8, 30.0};
    for (DemStyle s : {DemStyle::valley, DemStyle::fractal}) {
        const TerrainField a = generate_dem(g, 1, style(s));
        const TerrainField b = generate_dem(g, 1, style(s));
        CHECK(a.bed == b.bed);
        CHECK(a.manning == b.manning);
        const auto [lo, hi] = std::minmax_element(a.bed.begin(), a.bed.end());
        CHECK(*hi - *lo >= 1.0);
        CHECK(a.active_count() == g.cell_count());
        const TerrainField c = generate_dem(g, 2, style(s));
        CHECK(a.bed != c.bed);
    }
}

TEST_CASE("fractal 64x64 seed 7 mean slope band") {
    const TerrainField t = generate_dem({64, 64, 30.0}, 7, style(DemStyle::fractal));
    const double s = mean_slope(t);
    CHECK(s >= 0.005);
    CHECK(s <= 0.2);
}

TEST_CASE("valley floodplain and channel roughness") {
    DemOptions o = style(DemStyle::valley);
    o.channel_manning = 0.02;
    o.floodplain_width = 600.0;
    const TerrainField t = generate_dem({32, 32, 100.0}, 4, o);
    CHECK(std::count(t.manning.begin(), t.manning.end(), 0.02) > 0);
    o.floodplain_width = 31 * 100.0;
    CHECK_THROWS_AS(generate_dem({32, 32, 100.0}, 4, o), ConfigError);
}

TEST_CASE("floodplain roughness only touches the valley floor") {
    DemOptions o = style(DemStyle::valley);
    o.floodplain_width = 800.0;
    const TerrainField smooth = generate_dem({32, 32, 100.0}, 4, o);
    o.floodplain_roughness = 1.5;
    const TerrainField rough = generate_dem({32, 32, 100.0}, 4, o);
    std::size_t changed = 0;
    for (std::size_t c = 0; c < smooth.bed.size(); ++c) {
        const double d = rough.bed[c] - smooth.bed[c];
        CHECK(d >= 0.0);
        CHECK(d <= 1.5 + 1e-12);
        if (d > 0.0) ++changed;
    }
    CHECK(changed > 100u);
    CHECK(changed < smooth.bed.size());
    o.floodplain_roughness = -1.0;
    CHECK_THROWS_AS(generate_dem({32, 32, 100.0}, 4, o), ConfigError);
}

TEST_CASE("unknown style is a configuration error") {
    CHECK_THROWS_AS(parse_dem_style("canyon"), ConfigError);
    CHECK(parse_dem_style("valley") == DemStyle::valley);
}

TEST_CASE("scaled Manning values") {
    TerrainField t = flat(3, 3, 1.0);
    t.bed = {0, 1, 2, 3, 4, 5, 6, 7, 8};
    t.manning[0] = 0.02;
    t.manning[1] = 0.05;
    const TerrainFeatures f = compute_features(t);
    CHECK(f.manning_scaled[0] == 2.0);
    CHECK(f.manning_scaled[1] == 5.0);
    for (std::size_t c = 0; c < t.manning.size(); ++c) CHECK(f.manning_scaled[c] == 100.0 * t.manning[c]);
}

TEST_CASE("constant bed gives zero features") {
    const TerrainFeatures f = compute_features(flat(4, 5, 2.0, 123.0));
    for (double v : f.bed_z) CHECK(v == 0.0);
    for (double v : f.slope) CHECK(v == 0.0);
}

TEST_CASE("2x2 step bed by hand") {
    TerrainField t = flat(2, 2, 1.0);
    t.bed = {0.0, 2.0, 0.0, 2.0};  // left column 0, right column 2
    const TerrainFeatures f = compute_features(t);
    CHECK(f.mu_b == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(f.sigma_b == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(f.bed_z[0] == doctest::Approx(-1.0));
    CHECK(f.bed_z[1] == doctest::Approx(1.0));
    // Only one neighbour per axis: one-sided differences. x: (2-0)/1, y: 0.
    for (double s : f.slope) CHECK(s == doctest::Approx(2.0));
}

TEST_CASE("standardization statistics over active cells") {
    TerrainField t = generate_dem({16, 12, 10.0}, 5, style(DemStyle::fractal));
    t.mask[3] = 0;
    t.mask[40] = 0;
    t.bed[3] = 1e6;  // must not affect the statistics
    const TerrainFeatures f = compute_features(t);
    double s = 0, ss = 0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < t.mask.size(); ++c) {
        if (!t.mask[c]) {
            CHECK(std::isnan(f.bed_z[c]));
            continue;
        }
        s += f.bed_z[c];
        ++n;
    }
    const double m = s / n;
    for (std::size_t c = 0; c < t.mask.size(); ++c)
        if (t.mask[c]) ss += (f.bed_z[c] - m) * (f.bed_z[c] - m);
    CHECK(std::abs(m) < 1e-10);
    CHECK(std::abs(std::sqrt(ss / n) - 1.0) < 1e-10);
    for (std::size_t c = 0; c < t.mask.size(); ++c)
        if (t.mask[c]) CHECK(f.slope[c] >= 0.0);
}

TEST_CASE("affine bed invariance") {
    const TerrainField t = generate_dem({16, 16, 10.0}, 9, style(DemStyle::fractal));
    TerrainField u = t;
    const double a = 3.5, c = -42.0;
    for (double& b : u.bed) b = a * b + c;
    const TerrainFeatures f = compute_features(t);
    const TerrainFeatures g = compute_features(u);
    for (std::size_t i = 0; i < t.bed.size(); ++i) {
        CHECK(std::abs(f.bed_z[i] - g.bed_z[i]) < 1e-9);
        CHECK(g.slope[i] == doctest::Approx(a * f.slope[i]).epsilon(1e-12));
    }
    const TerrainFeatures f2 = compute_features(t);
    CHECK(f2.bed_z == f.bed_z);
    CHECK(f2.slope == f.slope);
}

TEST_CASE("interior slope uses centred differences") {
    TerrainField t = flat(5, 5, 2.0);
    for (int j = 0; j < 5; ++j)
        for (int i = 0; i < 5; ++i) t.bed[t.grid.index(i, j)] = 0.3 * i * i + 0.1 * j;
    const auto s = slope_magnitude(t);
    const double gx = (0.3 * 9 - 0.3 * 1) / 4.0;  // at i = 2
    const double gy = 0.1 * 2 / 4.0;
    CHECK(s[t.grid.index(2, 2)] == doctest::Approx(std::hypot(gx, gy)));
    // Edge i = 0: forward difference.
    const double ex = (0.3 * 1 - 0.0) / 2.0;
    CHECK(s[t.grid.index(0, 2)] == doctest::Approx(std::hypot(ex, gy)));
}

TEST_CASE("features_at identity and midpoint") {
    TerrainField t = generate_dem({9, 7, 25.0}, 3, style(DemStyle::fractal));
    t.grid.origin_x = 1000.0;
    t.grid.origin_y = -50.0;
    const TerrainFeatures f = compute_features(t);
    const auto& g = f.grid;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const FeatureTriple v = features_at(f, g.center_x(i), g.center_y(j));
            const std::size_t c = g.index(i, j);
            CHECK(v[0] == f.bed_z[c]);
            CHECK(v[1] == f.slope[c]);
            CHECK(v[2] == f.manning_scaled[c]);
        }
    TerrainFeatures m = f;
    m.bed_z[g.index(2, 3)] = 0.0;
    m.bed_z[g.index(3, 3)] = 1.0;
    CHECK(features_at(m, 0.5 * (g.center_x(2) + g.center_x(3)), g.center_y(3))[0] == doctest::Approx(0.5));
}

TEST_CASE("features_at matches an independent bilinear formula") {
    const TerrainField t = generate_dem({11, 8, 7.0}, 12, style(DemStyle::valley));
    const TerrainFeatures f = compute_features(t);
    const auto& g = f.grid;
    Rng rng(77);
    for (int k = 0; k < 500; ++k) {
        const double x = rng.uniform(g.min_x(), g.max_x());
        const double y = rng.uniform(g.min_y(), g.max_y());
        const FeatureTriple v = features_at(f, x, y);
        CHECK(v[0] == doctest::Approx(oracle::bilinear(f.bed_z, g.nx, g.ny, g.dx, g.origin_x, g.origin_y, x, y)).epsilon(1e-12));
        CHECK(v[1] == doctest::Approx(oracle::bilinear(f.slope, g.nx, g.ny, g.dx, g.origin_x, g.origin_y, x, y)).epsilon(1e-12));
    }
}

TEST_CASE("features_at errors") {
    TerrainField t = flat(4, 4, 1.0);
    t.bed[5] = 1.0;
    TerrainFeatures f = compute_features(t);
    CHECK_THROWS_AS(features_at(f, -0.6, 1.0), DomainError);
    CHECK_THROWS_AS(features_at(f, 1.0, 3.6), DomainError);
    CHECK_NOTHROW(features_at(f, -0.5, -0.5));
    for (std::size_t c : {0u, 1u, 4u, 5u}) t.mask[c] = 0;
    f = compute_features(t);
    CHECK_THROWS_AS(features_at(f, 0.5, 0.5), DomainError);
    // One active neighbour left: its value alone.
    CHECK(features_at(f, 1.5, 0.5)[2] == f.manning_scaled[t.grid.index(2, 0)]);
}

TEST_CASE("terrain validation") {
    TerrainField t = flat(3, 3, 1.0);
    CHECK_NOTHROW(t.validate());
    t.manning[4] = 0.0;
    CHECK_THROWS(t.validate());
    t.mask[4] = 0;
    CHECK_NOTHROW(t.validate());
    t.bed[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS(t.validate());
    std::fill(t.mask.begin(), t.mask.end(), 0);
    CHECK_THROWS(t.validate());
}
