#include <cmath>
#include <string>

#include "cldflood/swe.hpp"
#include "swe_internal.hpp"

namespace cldflood::swe::reference {

FlowState step(const FlowState& state, const terrain::TerrainField& terrain, std::span<const double> rain,
               double dt, const SolverConfig& config, StepStats* stats) {
    const auto& g = terrain.grid;
    if (state.size() != g.cell_count()) throw ContractError("flow state does not match the grid");
    if (!rain.empty() && rain.size() != g.cell_count()) throw ContractError("rain field does not match the grid");
    if (!(dt > 0.0)) throw ContractError("time step must be positive");

    for (std::size_t c = 0; c < g.cell_count(); ++c)
        if (terrain.mask[c] && !(std::isfinite(state.h[c]) && std::isfinite(state.hu[c]) && std::isfinite(state.hv[c])))
            throw NumericBlowup("non-finite input state at cell " + std::to_string(c), c, state.time);

    FlowState next = FlowState::dry(g);
    next.time = state.time + dt;
    double rain_sum = 0.0;
    double clipped = 0.0;
    for (int j = 0; j < g.ny; ++j) {
        double row_rain = 0.0;
        double row_clipped = 0.0;
        for (int i = 0; i < g.nx; ++i) {
            const std::size_t c = g.index(i, j);
            if (!terrain.mask[c]) continue;
            const detail::FaceFlux west = detail::x_face(state, terrain, i, j, config);
            const detail::FaceFlux east = detail::x_face(state, terrain, i + 1, j, config);
            const detail::FaceFlux south = detail::y_face(state, terrain, i, j, config);
            const detail::FaceFlux north = detail::y_face(state, terrain, i, j + 1, config);
            const double r_dt = rain.empty() ? 0.0 : rain[c] * dt;
            detail::CellUpdate u = detail::update_cell(state.h[c], state.hu[c], state.hv[c], west, east, south, north,
                                                       dt / g.dx, r_dt);
            row_rain += r_dt;
            if (u.h < 0.0) {
                row_clipped -= u.h;
                u.h = 0.0;
            }
            detail::friction_cell(u.h, u.hu, u.hv, terrain.manning[c], dt, config);
            if (!std::isfinite(u.h) || !std::isfinite(u.hu) || !std::isfinite(u.hv))
                throw NumericBlowup("non-finite flow state at cell " + std::to_string(c), c, next.time);
            next.h[c] = u.h;
            next.hu[c] = u.hu;
            next.hv[c] = u.hv;
        }
        rain_sum += row_rain;
        clipped += row_clipped;
    }
    if (stats) {
        stats->dt = dt;
        stats->rain_volume = rain_sum * (g.dx * g.dx);
        stats->clipped_volume = clipped * (g.dx * g.dx);
    }
    return next;
}

}  // namespace cldflood::swe::reference
