#include <cmath>
#include <limits>
#include <string>

#include "cldflood/swe.hpp"

namespace cldflood::swe {

Trajectory simulate(const terrain::TerrainField& terrain, const RainSource* rain, const SolverConfig& config,
                    double horizon, double dt_out, const FlowState* initial, SimulationStats* stats) {
    config.validate();
    terrain.validate();
    if (!(dt_out > 0.0) || !(horizon > 0.0)) throw ConfigError("horizon and output interval must be positive");
    const double ratio = horizon / dt_out;
    const auto n_out = static_cast<long>(std::llround(ratio));
    if (std::abs(ratio - static_cast<double>(n_out)) > 1e-9 * ratio || n_out < 1)
        throw ConfigError("horizon must be an integer multiple of the output interval");

    const auto& grid = terrain.grid;
    FlowState state = initial ? *initial : FlowState::dry(grid);
    if (state.size() != grid.cell_count()) throw ContractError("initial state does not match the grid");
    state.time = 0.0;

    Trajectory traj;
    traj.grid = grid;
    traj.dt_out = dt_out;
    traj.snapshots.reserve(static_cast<std::size_t>(n_out) + 1);
    traj.snapshots.push_back(state);

    SimulationStats local;
    const double initial_volume = total_volume(state, terrain);
    std::vector<double> rates;
    double t = 0.0;
    for (long k = 1; k <= n_out; ++k) {
        const double target = static_cast<double>(k) * dt_out;
        while (t < target) {
            const double raw = cfl_timestep_raw(state, config, terrain);
            if (raw < config.min_dt)
                throw NumericBlowup("CFL time step " + std::to_string(raw) + " s below min_dt at t=" +
                                        std::to_string(t) + " s",
                                    0, t);
            double dt = std::min(raw, config.max_dt);
            double land = std::min(target, rain ? rain->next_change(t) : std::numeric_limits<double>::infinity());
            if (!(land > t)) land = target;
            double t_next;
            if (t + dt >= land) {
                dt = land - t;
                t_next = land;
            } else {
                // Avoid a sliver step just before the landing time.
                if (land - t < 2.0 * dt) dt = 0.5 * (land - t);
                t_next = t + dt;
            }
            if (rain) {
                rain->rates_at(t, rates);
            } else {
                rates.clear();
            }
            StepStats ss;
            try {
                state = step(state, terrain, rates, dt, config, &ss);
            } catch (const NumericBlowup& e) {
                throw NumericBlowup(std::string(e.what()) + " (t=" + std::to_string(t) + " s)", e.cell(), t);
            }
            state.time = t_next;
            t = t_next;
            ++local.steps;
            local.rain_volume += ss.rain_volume;
            local.clipped_volume += ss.clipped_volume;
        }
        state.time = target;
        t = target;
        traj.snapshots.push_back(state);
    }
    local.cell_updates = local.steps * terrain.active_count();
    local.outflow_volume =
        initial_volume + local.rain_volume + local.clipped_volume - total_volume(state, terrain);
    if (stats) *stats = local;
    return traj;
}

}  // namespace cldflood::swe
