#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cldflood/swe.hpp"
#include "swe_internal.hpp"

namespace cldflood::swe {

namespace {

void check_rain(std::span<const double> rain, std::size_t n) {
    if (!rain.empty() && rain.size() != n) throw ContractError("rain field does not match the grid");
}

}  // namespace

FlowState step(const FlowState& state, const terrain::TerrainField& terrain, std::span<const double> rain,
               double dt, const SolverConfig& config, StepStats* stats) {
    const auto& g = terrain.grid;
    const std::size_t n = g.cell_count();
    check_rain(rain, n);
    if (state.size() != n) throw ContractError("flow state does not match the grid");
    if (!(dt > 0.0)) throw ContractError("time step must be positive");

    std::size_t bad_input = std::numeric_limits<std::size_t>::max();
#pragma omp parallel for schedule(static) reduction(min : bad_input)
    for (std::size_t c = 0; c < n; ++c)
        if (terrain.mask[c] && !(std::isfinite(state.h[c]) && std::isfinite(state.hu[c]) && std::isfinite(state.hv[c])))
            bad_input = std::min(bad_input, c);
    if (bad_input != std::numeric_limits<std::size_t>::max())
        throw NumericBlowup("non-finite input state at cell " + std::to_string(bad_input), bad_input, state.time);

    const int nx = g.nx;
    const int ny = g.ny;
    const std::size_t x_stride = static_cast<std::size_t>(nx) + 1;
    std::vector<detail::FaceFlux> xf(x_stride * static_cast<std::size_t>(ny));
    std::vector<detail::FaceFlux> yf(static_cast<std::size_t>(nx) * (static_cast<std::size_t>(ny) + 1));

#pragma omp parallel
    {
#pragma omp for schedule(static) nowait
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i <= nx; ++i) xf[static_cast<std::size_t>(j) * x_stride + i] = detail::x_face(state, terrain, i, j, config);
#pragma omp for schedule(static)
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i < nx; ++i) yf[static_cast<std::size_t>(j) * nx + i] = detail::y_face(state, terrain, i, j, config);
    }

    FlowState next = FlowState::dry(g);
    next.time = state.time + dt;
    const double dt_over_dx = dt / g.dx;
    const double area = g.dx * g.dx;
    // Per-row sums, combined serially, so the totals do not depend on the
    // thread count.
    std::vector<double> row_rain(static_cast<std::size_t>(ny), 0.0);
    std::vector<double> row_clipped(static_cast<std::size_t>(ny), 0.0);
    std::size_t bad_cell = std::numeric_limits<std::size_t>::max();

#pragma omp parallel for schedule(static) reduction(min : bad_cell)
    for (int j = 0; j < ny; ++j) {
        double rain_sum = 0.0;
        double clipped = 0.0;
        for (int i = 0; i < nx; ++i) {
            const std::size_t c = g.index(i, j);
            if (!terrain.mask[c]) continue;
            const double r_dt = rain.empty() ? 0.0 : rain[c] * dt;
            const std::size_t xw = static_cast<std::size_t>(j) * x_stride + i;
            const std::size_t ys = static_cast<std::size_t>(j) * nx + i;
            detail::CellUpdate u = detail::update_cell(state.h[c], state.hu[c], state.hv[c], xf[xw], xf[xw + 1], yf[ys],
                                                       yf[ys + nx], dt_over_dx, r_dt);
            rain_sum += r_dt;
            if (u.h < 0.0) {
                clipped -= u.h;
                u.h = 0.0;
            }
            detail::friction_cell(u.h, u.hu, u.hv, terrain.manning[c], dt, config);
            if (!std::isfinite(u.h) || !std::isfinite(u.hu) || !std::isfinite(u.hv)) bad_cell = std::min(bad_cell, c);
            next.h[c] = u.h;
            next.hu[c] = u.hu;
            next.hv[c] = u.hv;
        }
        row_rain[static_cast<std::size_t>(j)] = rain_sum;
        row_clipped[static_cast<std::size_t>(j)] = clipped;
    }
    double rain_sum = 0.0;
    double clipped = 0.0;
    for (int j = 0; j < ny; ++j) {
        rain_sum += row_rain[static_cast<std::size_t>(j)];
        clipped += row_clipped[static_cast<std::size_t>(j)];
    }
    if (bad_cell != std::numeric_limits<std::size_t>::max())
        throw NumericBlowup("non-finite flow state at cell " + std::to_string(bad_cell), bad_cell, next.time);
    if (stats) {
        stats->dt = dt;
        stats->rain_volume = rain_sum * area;
        stats->clipped_volume = clipped * area;
    }
    return next;
}

}  // namespace cldflood::swe
