#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cldflood/swe.hpp"
#include "swe_internal.hpp"

namespace cldflood::swe {

Boundary parse_boundary(std::string_view name) {
    if (name == "open") return Boundary::open;
    if (name == "closed") return Boundary::closed;
    throw ConfigError("unknown boundary type '" + std::string(name) + "'");
}

std::string_view to_string(Boundary b) { return b == Boundary::open ? "open" : "closed"; }

void SolverConfig::validate() const {
    if (!(g > 0.0)) throw ConfigError("gravity must be positive");
    if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("cfl must lie in (0, 1]");
    if (!(h_min > 0.0)) throw ConfigError("h_min must be positive");
    if (!(min_dt > 0.0) || !(min_dt <= max_dt)) throw ConfigError("need 0 < min_dt <= max_dt");
}

FlowState FlowState::dry(const terrain::RasterGrid& grid) {
    FlowState s;
    s.h.assign(grid.cell_count(), 0.0);
    s.hu.assign(grid.cell_count(), 0.0);
    s.hv.assign(grid.cell_count(), 0.0);
    return s;
}

double minmod(double a, double b) noexcept {
    if (a * b <= 0.0) return 0.0;
    return std::abs(a) < std::abs(b) ? a : b;
}

FaceReconstruction reconstruct_face(double bed_l, const FaceState& q_l, double bed_r, const FaceState& q_r,
                                    double h_min) noexcept {
    FaceReconstruction r;
    r.bed_face = std::max(bed_l, bed_r);
    const auto side = [&](double bed, const FaceState& q) {
        FaceState out;
        out.h = std::max(0.0, (bed + q.h) - r.bed_face);
        if (q.h > h_min && out.h > 0.0) {
            if (out.h == q.h) {
                out.qn = q.qn;
                out.qt = q.qt;
            } else {
                out.qn = out.h * (q.qn / q.h);
                out.qt = out.h * (q.qt / q.h);
            }
        }
        return out;
    };
    r.left = side(bed_l, q_l);
    r.right = side(bed_r, q_r);
    return r;
}

Flux physical_flux(const FaceState& q, double g, double h_min) noexcept {
    if (!(q.h > h_min)) return {0.0, 0.0, 0.0};
    const double un = q.qn / q.h;
    return {q.qn, q.qn * un + 0.5 * g * q.h * q.h, q.qt * un};
}

Flux hllc_flux(const FaceState& left, const FaceState& right, double g, double h_min) {
    if (!std::isfinite(left.h) || !std::isfinite(left.qn) || !std::isfinite(left.qt) || !std::isfinite(right.h) ||
        !std::isfinite(right.qn) || !std::isfinite(right.qt))
        throw NumericError("non-finite Riemann state");
    const bool wet_l = left.h > h_min;
    const bool wet_r = right.h > h_min;
    if (!wet_l && !wet_r) return {0.0, 0.0, 0.0};
    if (left.h == right.h && left.qn == right.qn && left.qt == right.qt) return physical_flux(left, g, h_min);

    const double hl = wet_l ? left.h : 0.0;
    const double hr = wet_r ? right.h : 0.0;
    const double ul = wet_l ? left.qn / left.h : 0.0;
    const double ur = wet_r ? right.qn / right.h : 0.0;
    const double vl = wet_l ? left.qt / left.h : 0.0;
    const double vr = wet_r ? right.qt / right.h : 0.0;
    const double cl = std::sqrt(g * hl);
    const double cr = std::sqrt(g * hr);

    double sl;
    double sr;
    if (!wet_l) {
        sl = ur - 2.0 * cr;
        sr = ur + cr;
    } else if (!wet_r) {
        sl = ul - cl;
        sr = ul + 2.0 * cl;
    } else {
        const double c_mid = 0.5 * (cl + cr) + 0.25 * (ul - ur);
        const double h_star = c_mid > 0.0 ? c_mid * c_mid / g : 0.0;
        const double u_star = 0.5 * (ul + ur) + (cl - cr);
        const double c_star = std::sqrt(g * h_star);
        sl = std::min(ul - cl, u_star - c_star);
        sr = std::max(ur + cr, u_star + c_star);
    }

    const FaceState ql{hl, hl * ul, hl * vl};
    const FaceState qr{hr, hr * ur, hr * vr};
    const Flux fl = physical_flux(ql, g, h_min);
    const Flux fr = physical_flux(qr, g, h_min);
    if (sl >= 0.0) return fl;
    if (sr <= 0.0) return fr;

    const double denom = hr * (ur - sr) - hl * (ul - sl);
    const double s_mid = denom != 0.0 ? (sl * hr * (ur - sr) - sr * hl * (ul - sl)) / denom : 0.5 * (sl + sr);
    const double inv = 1.0 / (sr - sl);
    Flux f;
    f[0] = (sr * fl[0] - sl * fr[0] + sl * sr * (hr - hl)) * inv;
    f[1] = (sr * fl[1] - sl * fr[1] + sl * sr * (qr.qn - ql.qn)) * inv;
    f[2] = s_mid >= 0.0 ? f[0] * vl : f[0] * vr;
    return f;
}

Flux hllc_flux(const FaceState& left, const FaceState& right, Axis axis, double g, double h_min) {
    if (axis == Axis::x) return hllc_flux(left, right, g, h_min);
    const Flux f = hllc_flux({left.h, left.qt, left.qn}, {right.h, right.qt, right.qn}, g, h_min);
    return {f[0], f[2], f[1]};
}

InterfaceReconstruction reconstruct_interfaces(const FlowState& state, const terrain::TerrainField& terrain,
                                               double h_min) {
    const auto& g = terrain.grid;
    InterfaceReconstruction out;
    out.x_faces.reserve(static_cast<std::size_t>((g.nx - 1) * g.ny));
    out.y_faces.reserve(static_cast<std::size_t>(g.nx * (g.ny - 1)));
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i) {
            const auto a = g.index(i, j), b = g.index(i + 1, j);
            out.x_faces.push_back(
                reconstruct_face(terrain.bed[a], detail::x_state(state, a), terrain.bed[b], detail::x_state(state, b), h_min));
        }
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const auto a = g.index(i, j), b = g.index(i, j + 1);
            out.y_faces.push_back(
                reconstruct_face(terrain.bed[a], detail::y_state(state, a), terrain.bed[b], detail::y_state(state, b), h_min));
        }

    out.bed_grad_x.assign(g.cell_count(), 0.0);
    out.bed_grad_y.assign(g.cell_count(), 0.0);
    const auto usable = [&](int i, int j) {
        return i >= 0 && j >= 0 && i < g.nx && j < g.ny && terrain.mask[g.index(i, j)] != 0;
    };
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const auto c = g.index(i, j);
            if (!terrain.mask[c]) continue;
            const double b = terrain.bed[c];
            if (usable(i - 1, j) && usable(i + 1, j))
                out.bed_grad_x[c] =
                    minmod((b - terrain.bed[g.index(i - 1, j)]) / g.dx, (terrain.bed[g.index(i + 1, j)] - b) / g.dx);
            if (usable(i, j - 1) && usable(i, j + 1))
                out.bed_grad_y[c] =
                    minmod((b - terrain.bed[g.index(i, j - 1)]) / g.dx, (terrain.bed[g.index(i, j + 1)] - b) / g.dx);
        }
    return out;
}

double cfl_timestep_raw(const FlowState& state, const SolverConfig& config, const terrain::TerrainField& terrain) {
    const std::size_t n = state.size();
    double max_speed = 0.0;
#pragma omp parallel for reduction(max : max_speed) schedule(static)
    for (std::size_t c = 0; c < n; ++c) {
        if (!terrain.mask[c] || !(state.h[c] > config.h_min)) continue;
        const double h = state.h[c];
        const double u = state.hu[c] / h;
        const double v = state.hv[c] / h;
        const double speed = std::sqrt(u * u + v * v) + std::sqrt(config.g * h);
        max_speed = std::max(max_speed, speed);
    }
    if (max_speed == 0.0) return std::numeric_limits<double>::infinity();
    return config.cfl * (0.5 * terrain.grid.dx) / max_speed;
}

double cfl_timestep(const FlowState& state, const SolverConfig& config, const terrain::TerrainField& terrain) {
    const double raw = cfl_timestep_raw(state, config, terrain);
    return std::clamp(raw, config.min_dt, config.max_dt);
}

void implicit_friction_update(FlowState& state, const terrain::TerrainField& terrain, double dt,
                              const SolverConfig& config) {
    const std::size_t n = state.size();
#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < n; ++c) {
        if (!terrain.mask[c]) continue;
        detail::friction_cell(state.h[c], state.hu[c], state.hv[c], terrain.manning[c], dt, config);
    }
}

double total_volume(const FlowState& state, const terrain::TerrainField& terrain) {
    double v = 0.0;
    for (std::size_t c = 0; c < state.size(); ++c)
        if (terrain.mask[c]) v += state.h[c];
    return v * terrain.grid.dx * terrain.grid.dx;
}

namespace detail {

FaceFlux interior_face_flux(double bed_l, const FaceState& q_l, double bed_r, const FaceState& q_r,
                            const SolverConfig& config) {
    const FaceReconstruction rec = reconstruct_face(bed_l, q_l, bed_r, q_r, config.h_min);
    const Flux f = hllc_flux(rec.left, rec.right, config.g, config.h_min);
    FaceFlux out;
    out.mass = f[0];
    out.tang = f[2];
    out.d_left = f[1] - 0.5 * config.g * rec.left.h * rec.left.h;
    out.d_right = f[1] - 0.5 * config.g * rec.right.h * rec.right.h;
    return out;
}

FaceFlux boundary_face_flux(double bed, const FaceState& q, bool cell_on_left, const SolverConfig& config) {
    // Open faces pass outgoing water through a zero-gradient ghost; they
    // never draw water into the domain, so inward flow sees a wall.
    const bool outward = cell_on_left ? q.qn > 0.0 : q.qn < 0.0;
    if (config.boundary == Boundary::open && (outward || q.qn == 0.0))
        return interior_face_flux(bed, q, bed, q, config);
    const FaceState ghost{q.h, -q.qn, q.qt};
    FaceFlux out = cell_on_left ? interior_face_flux(bed, q, bed, ghost, config)
                                : interior_face_flux(bed, ghost, bed, q, config);
    out.mass = 0.0;
    out.tang = 0.0;
    return out;
}

FaceFlux x_face(const FlowState& s, const terrain::TerrainField& t, int i, int j, const SolverConfig& config) {
    const auto& g = t.grid;
    const bool has_w = i > 0 && t.mask[g.index(i - 1, j)];
    const bool has_e = i < g.nx && t.mask[g.index(i, j)];
    if (has_w && has_e) {
        const auto w = g.index(i - 1, j), e = g.index(i, j);
        return interior_face_flux(t.bed[w], x_state(s, w), t.bed[e], x_state(s, e), config);
    }
    if (has_w) {
        const auto w = g.index(i - 1, j);
        return boundary_face_flux(t.bed[w], x_state(s, w), true, config);
    }
    if (has_e) {
        const auto e = g.index(i, j);
        return boundary_face_flux(t.bed[e], x_state(s, e), false, config);
    }
    return {};
}

FaceFlux y_face(const FlowState& s, const terrain::TerrainField& t, int i, int j, const SolverConfig& config) {
    const auto& g = t.grid;
    const bool has_s = j > 0 && t.mask[g.index(i, j - 1)];
    const bool has_n = j < g.ny && t.mask[g.index(i, j)];
    if (has_s && has_n) {
        const auto so = g.index(i, j - 1), no = g.index(i, j);
        return interior_face_flux(t.bed[so], y_state(s, so), t.bed[no], y_state(s, no), config);
    }
    if (has_s) {
        const auto so = g.index(i, j - 1);
        return boundary_face_flux(t.bed[so], y_state(s, so), true, config);
    }
    if (has_n) {
        const auto no = g.index(i, j);
        return boundary_face_flux(t.bed[no], y_state(s, no), false, config);
    }
    return {};
}

}  // namespace detail
}  // namespace cldflood::swe
