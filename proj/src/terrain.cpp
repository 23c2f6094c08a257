#include "cldflood/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cldflood/error.hpp"
#include "cldflood/rng.hpp"

namespace cldflood::terrain {

void RasterGrid::validate() const {
    if (nx < 2 || ny < 2) throw ConfigError("raster grid needs at least 2x2 cells");
    if (!(dx > 0.0) || !std::isfinite(dx)) throw ConfigError("raster cell size must be positive");
    if (!std::isfinite(origin_x) || !std::isfinite(origin_y))
        throw ConfigError("raster origin must be finite");
}

std::size_t TerrainField::active_count() const noexcept {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

void TerrainField::validate() const {
    grid.validate();
    const std::size_t n = grid.cell_count();
    if (bed.size() != n || manning.size() != n || mask.size() != n)
        throw ConfigError("terrain field arrays do not match the grid");
    std::size_t active_cells = 0;
    for (std::size_t c = 0; c < n; ++c) {
        if (!mask[c]) continue;
        ++active_cells;
        if (!std::isfinite(bed[c])) throw ConfigError("non-finite bed elevation on an active cell");
        if (!(manning[c] > 0.0)) throw ConfigError("Manning coefficient must be positive on active cells");
    }
    if (active_cells == 0) throw ConfigError("terrain has no active cells");
}

DemStyle parse_dem_style(std::string_view name) {
    if (name == "valley") return DemStyle::valley;
    if (name == "fractal") return DemStyle::fractal;
    if (name == "tilted_plane") return DemStyle::tilted_plane;
    throw ConfigError("unknown DEM style '" + std::string(name) + "'");
}

std::string_view to_string(DemStyle style) {
    switch (style) {
        case DemStyle::valley: return "valley";
        case DemStyle::fractal: return "fractal";
        case DemStyle::tilted_plane: return "tilted_plane";
    }
    return "?";
}

namespace {

// Multi-octave value noise on [0,1]^2 with smoothstep blending, rescaled to
// zero minimum and unit maximum.
std::vector<double> value_noise(const RasterGrid& grid, Rng& rng, int octaves) {
    std::vector<double> out(grid.cell_count(), 0.0);
    double amplitude = 1.0;
    for (int o = 0; o < octaves; ++o) {
        const int lattice = (2 << o) + 1;
        std::vector<double> knots(static_cast<std::size_t>(lattice * lattice));
        for (double& k : knots) k = rng.uniform(-1.0, 1.0);
        for (int j = 0; j < grid.ny; ++j) {
            const double fy = static_cast<double>(j) / (grid.ny - 1) * (lattice - 1);
            const int y0 = std::min(static_cast<int>(fy), lattice - 2);
            double ty = fy - y0;
            ty = ty * ty * (3.0 - 2.0 * ty);
            for (int i = 0; i < grid.nx; ++i) {
                const double fx = static_cast<double>(i) / (grid.nx - 1) * (lattice - 1);
                const int x0 = std::min(static_cast<int>(fx), lattice - 2);
                double tx = fx - x0;
                tx = tx * tx * (3.0 - 2.0 * tx);
                const auto at = [&](int a, int b) {
                    return knots[static_cast<std::size_t>(b * lattice + a)];
                };
                const double v = (1 - tx) * (1 - ty) * at(x0, y0) + tx * (1 - ty) * at(x0 + 1, y0) +
                                 (1 - tx) * ty * at(x0, y0 + 1) + tx * ty * at(x0 + 1, y0 + 1);
                out[grid.index(i, j)] += amplitude * v;
            }
        }
        amplitude *= 0.5;
    }
    const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
    const double low = *lo;
    const double span = *hi - *lo;
    for (double& v : out) v = span > 0.0 ? (v - low) / span : 0.0;
    return out;
}

}  // namespace

TerrainField generate_dem(const RasterGrid& grid, std::uint64_t seed, const DemOptions& options) {
    grid.validate();
    if (!(options.manning > 0.0) || options.channel_manning < 0.0)
        throw ConfigError("Manning coefficients must be positive");
    if (options.floodplain_width < 0.0 || options.floodplain_width >= (grid.ny - 1) * grid.dx)
        throw ConfigError("floodplain width must be in [0, domain width)");
    if (!(options.floodplain_roughness >= 0.0)) throw ConfigError("floodplain roughness must be non-negative");
    TerrainField t;
    t.grid = grid;
    const std::size_t n = grid.cell_count();
    t.bed.assign(n, options.base_elevation);
    t.manning.assign(n, options.manning);
    t.mask.assign(n, 1);
    Rng rng(seed);

    switch (options.style) {
        case DemStyle::tilted_plane:
            for (int j = 0; j < grid.ny; ++j)
                for (int i = 0; i < grid.nx; ++i)
                    t.bed[grid.index(i, j)] = options.plane_gradient * i * grid.dx;
            break;

        case DemStyle::fractal: {
            const auto noise = value_noise(grid, rng, 5);
            std::vector<double> floor_noise;
            if (options.floodplain_roughness > 0.0) floor_noise = value_noise(grid, rng, 6);
            for (std::size_t c = 0; c < n; ++c) t.bed[c] = options.base_elevation + options.relief * noise[c];
            break;
        }

        case DemStyle::valley: {
            // Meandering V-shaped valley draining toward i = 0, with rough
            // hillslopes. Relief is split between the valley walls and noise.
            const double width_y = (grid.ny - 1) * grid.dx;
            const double length_x = (grid.nx - 1) * grid.dx;
            const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double wiggle = rng.uniform(0.08, 0.18) * width_y;
            const double wavelength = rng.uniform(0.6, 1.2) * length_x;
            const double wall_slope = 0.7 * options.relief / (0.5 * (width_y - options.floodplain_width));
            const double channel_half_width = 1.5 * grid.dx;
            const auto noise = value_noise(grid, rng, 5);
            std::vector<double> floor_noise;
            if (options.floodplain_roughness > 0.0) floor_noise = value_noise(grid, rng, 6);
            for (int j = 0; j < grid.ny; ++j) {
                for (int i = 0; i < grid.nx; ++i) {
                    const double x = i * grid.dx;
                    const double y = j * grid.dx;
                    const double centre =
                        0.5 * width_y + wiggle * std::sin(2.0 * std::numbers::pi * x / wavelength + phase);
                    const double dist = std::abs(y - centre);
                    const double wall = std::max(0.0, dist - 0.5 * options.floodplain_width);
                    const std::size_t c = grid.index(i, j);
                    const double blend = std::min(1.0, wall / (4.0 * grid.dx));
                    t.bed[c] = options.base_elevation + options.plane_gradient * x + wall_slope * wall +
                               0.3 * options.relief * noise[c] * blend;
                    if (!floor_noise.empty()) t.bed[c] += options.floodplain_roughness * floor_noise[c] * (1.0 - blend);
                    if (options.channel_manning > 0.0 && dist <= channel_half_width)
                        t.manning[c] = options.channel_manning;
                }
            }
            break;
        }
    }
    return t;
}

std::vector<double> slope_magnitude(const TerrainField& terrain) {
    const RasterGrid& g = terrain.grid;
    std::vector<double> out(g.cell_count(), 0.0);
    const auto usable = [&](int i, int j) {
        return i >= 0 && j >= 0 && i < g.nx && j < g.ny && terrain.mask[g.index(i, j)] != 0;
    };
    const auto derivative = [&](int i, int j, int di, int dj) {
        const bool lo = usable(i - di, j - dj);
        const bool hi = usable(i + di, j + dj);
        const double bc = terrain.bed[g.index(i, j)];
        if (lo && hi)
            return (terrain.bed[g.index(i + di, j + dj)] - terrain.bed[g.index(i - di, j - dj)]) / (2.0 * g.dx);
        if (hi) return (terrain.bed[g.index(i + di, j + dj)] - bc) / g.dx;
        if (lo) return (bc - terrain.bed[g.index(i - di, j - dj)]) / g.dx;
        return 0.0;
    };
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const std::size_t c = g.index(i, j);
            if (!terrain.mask[c]) {
                out[c] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            const double gx = derivative(i, j, 1, 0);
            const double gy = derivative(i, j, 0, 1);
            out[c] = std::sqrt(gx * gx + gy * gy);
        }
    }
    return out;
}

double mean_slope(const TerrainField& terrain) {
    const auto s = slope_magnitude(terrain);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t c = 0; c < s.size(); ++c) {
        if (!terrain.mask[c]) continue;
        sum += s[c];
        ++count;
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

TerrainFeatures compute_features(const TerrainField& terrain) {
    terrain.validate();
    const std::size_t n = terrain.grid.cell_count();
    TerrainFeatures f;
    f.grid = terrain.grid;
    f.mask = terrain.mask;

    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t c = 0; c < n; ++c) {
        if (!terrain.mask[c]) continue;
        sum += terrain.bed[c];
        ++count;
    }
    f.mu_b = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        if (!terrain.mask[c]) continue;
        const double d = terrain.bed[c] - f.mu_b;
        ss += d * d;
    }
    f.sigma_b = std::sqrt(ss / static_cast<double>(count));
    const double scale = std::max(f.sigma_b, kSigmaFloor);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    f.bed_z.assign(n, nan);
    f.manning_scaled.assign(n, nan);
    for (std::size_t c = 0; c < n; ++c) {
        if (!terrain.mask[c]) continue;
        f.bed_z[c] = (terrain.bed[c] - f.mu_b) / scale;
        f.manning_scaled[c] = 100.0 * terrain.manning[c];
    }
    f.slope = slope_magnitude(terrain);
    return f;
}

namespace {

struct Stencil {
    std::array<std::size_t, 4> cell{};
    std::array<double, 4> weight{};
};

double snap_unit(double t) {
    constexpr double eps = 1e-9;
    if (t < eps) return 0.0;
    if (t > 1.0 - eps) return 1.0;
    return t;
}

Stencil bilinear_stencil(const RasterGrid& g, double x, double y) {
    if (!(x >= g.min_x() && x <= g.max_x() && y >= g.min_y() && y <= g.max_y()))
        throw DomainError("query point outside the raster bounding box");
    const double fx = std::clamp((x - g.origin_x) / g.dx, 0.0, static_cast<double>(g.nx - 1));
    const double fy = std::clamp((y - g.origin_y) / g.dx, 0.0, static_cast<double>(g.ny - 1));
    const int i0 = std::min(static_cast<int>(fx), g.nx - 2);
    const int j0 = std::min(static_cast<int>(fy), g.ny - 2);
    const double tx = snap_unit(fx - i0);
    const double ty = snap_unit(fy - j0);
    Stencil s;
    s.cell = {g.index(i0, j0), g.index(i0 + 1, j0), g.index(i0, j0 + 1), g.index(i0 + 1, j0 + 1)};
    s.weight = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
    return s;
}

}  // namespace

FeatureTriple features_at(const TerrainFeatures& features, double x, double y) {
    const Stencil s = bilinear_stencil(features.grid, x, y);
    FeatureTriple out{0.0, 0.0, 0.0};
    double wsum = 0.0;
    for (int k = 0; k < 4; ++k) {
        const std::size_t c = s.cell[k];
        const double w = s.weight[k];
        if (w <= 0.0 || !features.mask[c]) continue;
        out[0] += w * features.bed_z[c];
        out[1] += w * features.slope[c];
        out[2] += w * features.manning_scaled[c];
        wsum += w;
    }
    if (wsum <= 0.0) throw DomainError("query point lies in a masked region");
    if (wsum != 1.0)
        for (double& v : out) v /= wsum;
    return out;
}

double sample_bilinear(const RasterGrid& grid, const std::vector<std::uint8_t>& mask,
                       const std::vector<double>& field, double x, double y) {
    const Stencil s = bilinear_stencil(grid, x, y);
    double v = 0.0;
    double wsum = 0.0;
    for (int k = 0; k < 4; ++k) {
        const std::size_t c = s.cell[k];
        if (s.weight[k] <= 0.0 || !mask[c]) continue;
        v += s.weight[k] * field[c];
        wsum += s.weight[k];
    }
    if (wsum <= 0.0) throw DomainError("query point lies in a masked region");
    return wsum != 1.0 ? v / wsum : v;
}

}  // namespace cldflood::terrain
