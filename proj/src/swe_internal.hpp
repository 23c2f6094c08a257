#pragma once

// Face-level kernels shared by the parallel step and its serial reference.

#include <cmath>
#include <cstddef>

#include "cldflood/swe.hpp"

namespace cldflood::swe::detail {

/// Flux through one face, split into the parts each adjacent cell needs.
/// `d_left`/`d_right` are the normal momentum flux minus the hydrostatic
/// pressure of that side's reconstructed depth (balanced bed-slope form).
struct FaceFlux {
    double mass = 0.0;
    double d_left = 0.0;
    double d_right = 0.0;
    double tang = 0.0;
};

FaceFlux interior_face_flux(double bed_l, const FaceState& q_l, double bed_r, const FaceState& q_r,
                            const SolverConfig& config);

/// `cell_on_left` is true when the active cell lies on the low-index side of
/// the face (the ghost is on the right).
FaceFlux boundary_face_flux(double bed, const FaceState& q, bool cell_on_left, const SolverConfig& config);

inline FaceState x_state(const FlowState& s, std::size_t c) { return {s.h[c], s.hu[c], s.hv[c]}; }
inline FaceState y_state(const FlowState& s, std::size_t c) { return {s.h[c], s.hv[c], s.hu[c]}; }

/// Flux through the x-face on the west side of cell (i, j), 0 <= i <= nx.
FaceFlux x_face(const FlowState& s, const terrain::TerrainField& t, int i, int j, const SolverConfig& config);
/// Flux through the y-face on the south side of cell (i, j), 0 <= j <= ny.
FaceFlux y_face(const FlowState& s, const terrain::TerrainField& t, int i, int j, const SolverConfig& config);

struct CellUpdate {
    double h, hu, hv;
};

inline CellUpdate update_cell(double h, double hu, double hv, const FaceFlux& west, const FaceFlux& east,
                              const FaceFlux& south, const FaceFlux& north, double dt_over_dx, double rain_dt) {
    CellUpdate u;
    u.h = h - dt_over_dx * ((east.mass - west.mass) + (north.mass - south.mass)) + rain_dt;
    u.hu = hu - dt_over_dx * ((east.d_left - west.d_right) + (north.tang - south.tang));
    u.hv = hv - dt_over_dx * ((east.tang - west.tang) + (north.d_left - south.d_right));
    return u;
}

/// Backward-Euler Manning friction on one cell (h already updated).
inline void friction_cell(double h, double& hu, double& hv, double manning, double dt, const SolverConfig& config) {
    if (!(h > config.h_min)) {
        hu = 0.0;
        hv = 0.0;
        return;
    }
    const double m = std::hypot(hu, hv);
    if (m == 0.0) return;
    // d|q|/dt = -g n^2 |q|^2 / h^(7/3), implicit in |q|:
    //   |q'| (1 + k |q'|) = |q|,  k = dt g n^2 h^(-7/3)
    const double k = dt * config.g * manning * manning / (h * h * std::cbrt(h));
    const double m_new = 2.0 * m / (1.0 + std::sqrt(1.0 + 4.0 * k * m));
    const double scale = std::min(1.0, m_new / m);
    hu *= scale;
    hv *= scale;
}

}  // namespace cldflood::swe::detail
