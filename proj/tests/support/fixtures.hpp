#pragma once

// Shared scenario builders for unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "cldflood/swe.hpp"
#include "cldflood/terrain.hpp"
#include "oracles.hpp"

namespace fixture {

inline cldflood::terrain::TerrainField flat_terrain(int nx, int ny, double dx, double manning = 0.03,
                                                    double bed = 0.0) {
    cldflood::terrain::TerrainField t;
    t.grid = {nx, ny, dx, 0.0, 0.0};
    t.bed.assign(t.grid.cell_count(), bed);
    t.manning.assign(t.grid.cell_count(), manning);
    t.mask.assign(t.grid.cell_count(), 1);
    return t;
}

/// Lake at rest at `level`; cells above it stay dry.
inline cldflood::swe::FlowState lake_at_rest(const cldflood::terrain::TerrainField& t, double level) {
    auto s = cldflood::swe::FlowState::dry(t.grid);
    for (std::size_t c = 0; c < s.size(); ++c) s.h[c] = std::max(0.0, level - t.bed[c]);
    return s;
}

struct DamBreakErrors {
    double depth_l1 = 0.0;     // sum |h - h_exact| / sum h_exact
    double momentum_l1 = 0.0;  // sum |hu - (hu)_exact| / sum |(hu)_exact|
};

/// Flat frictionless channel of `cells` x 2 cells, dam at the centre, run to
/// `t_end` and compared with the analytic solution at cell centres.
inline DamBreakErrors dam_break(int cells, double dx, double hl, double hr, double t_end) {
    using namespace cldflood;
    auto t = flat_terrain(cells, 2, dx, 1e-9);
    const double x_dam = t.grid.center_x(cells / 2) - 0.5 * dx;
    auto s = swe::FlowState::dry(t.grid);
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < cells; ++i) s.h[t.grid.index(i, j)] = i < cells / 2 ? hl : hr;
    swe::SolverConfig cfg;
    cfg.max_dt = t_end;
    const swe::Trajectory traj = swe::simulate(t, nullptr, cfg, t_end, t_end, &s);
    const swe::FlowState& f = traj.snapshots.back();
    const oracle::Stoker exact(cfg.g, hl, hr);
    long double dh = 0, nh = 0, dq = 0, nq = 0;
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < cells; ++i) {
            const std::size_t c = t.grid.index(i, j);
            const double x = t.grid.center_x(i) - x_dam;
            double h, u;
            exact.at(x / t_end, h, u);
            dh += std::abs(f.h[c] - h);
            nh += h;
            dq += std::abs(f.hu[c] - h * u);
            nq += std::abs(h * u);
        }
    return {static_cast<double>(dh / nh), static_cast<double>(dq / nq)};
}

}  // namespace fixture
