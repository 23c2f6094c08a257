#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "cldflood/error.hpp"
#include "cldflood/terrain.hpp"

namespace cldflood::swe {

enum class Boundary { open, closed };

Boundary parse_boundary(std::string_view name);
std::string_view to_string(Boundary b);

struct SolverConfig {
    double g = 9.81;
    double cfl = 0.5;
    double h_min = 1e-10;
    double max_dt = 3600.0;
    double min_dt = 1e-6;
    Boundary boundary = Boundary::open;

    void validate() const;
};

/// Conserved variables per cell, row-major over the raster.
struct FlowState {
    std::vector<double> h;
    std::vector<double> hu;
    std::vector<double> hv;
    double time = 0.0;

    static FlowState dry(const terrain::RasterGrid& grid);
    [[nodiscard]] std::size_t size() const noexcept { return h.size(); }
};

/// Thrown when an update produces a non-finite value.
class NumericBlowup : public NumericError {
public:
    NumericBlowup(const std::string& what, std::size_t cell, double time)
        : NumericError(what), cell_(cell), time_(time) {}
    [[nodiscard]] std::size_t cell() const noexcept { return cell_; }
    [[nodiscard]] double time() const noexcept { return time_; }

private:
    std::size_t cell_;
    double time_;
};

/// Riemann state in a face-normal frame: depth, normal and tangential
/// unit discharge.
struct FaceState {
    double h = 0.0;
    double qn = 0.0;
    double qt = 0.0;
};

using Flux = std::array<double, 3>;  // (mass, normal momentum, tangential momentum)

[[nodiscard]] double minmod(double a, double b) noexcept;

/// Hydrostatic face reconstruction between two cells.
struct FaceReconstruction {
    double bed_face = 0.0;
    FaceState left;
    FaceState right;
};

/// Single-valued face bed b_f = max(bL, bR); side depths max(0, eta - b_f);
/// discharges rescaled so the side velocity is preserved.
[[nodiscard]] FaceReconstruction reconstruct_face(double bed_l, const FaceState& q_l, double bed_r,
                                                  const FaceState& q_r, double h_min) noexcept;

/// Reconstruction of every interior face plus minmod-limited bed gradients.
struct InterfaceReconstruction {
    std::vector<FaceReconstruction> x_faces;  // (nx-1)*ny, between (i,j) and (i+1,j)
    std::vector<FaceReconstruction> y_faces;  // nx*(ny-1), between (i,j) and (i,j+1)
    std::vector<double> bed_grad_x;           // per cell
    std::vector<double> bed_grad_y;
};

InterfaceReconstruction reconstruct_interfaces(const FlowState& state, const terrain::TerrainField& terrain,
                                               double h_min);

/// Physical flux in the normal frame.
[[nodiscard]] Flux physical_flux(const FaceState& q, double g, double h_min) noexcept;

/// HLLC flux in the normal frame. Zero if both sides are dry; dry-front
/// wave speeds if exactly one side is dry. Throws NumericError on non-finite
/// input.
Flux hllc_flux(const FaceState& left, const FaceState& right, double g, double h_min);

/// Axis of a face normal. This overload takes states as (h, hu, hv) in
/// the grid frame and returns (mass, x-momentum, y-momentum) fluxes.
enum class Axis { x, y };
Flux hllc_flux(const FaceState& left, const FaceState& right, Axis axis, double g, double h_min);

/// CFL step over wet active cells with d = dx/2, clamped to
/// [min_dt, max_dt]. All-dry domains return max_dt.
double cfl_timestep(const FlowState& state, const SolverConfig& config, const terrain::TerrainField& terrain);

/// Unclamped CFL estimate; +inf when no cell is wet.
double cfl_timestep_raw(const FlowState& state, const SolverConfig& config, const terrain::TerrainField& terrain);

/// Backward-Euler Manning friction solved in closed form per cell. The
/// discharge keeps its direction and its magnitude can only shrink. Dry
/// cells get zero discharge.
void implicit_friction_update(FlowState& state, const terrain::TerrainField& terrain, double dt,
                              const SolverConfig& config);

struct StepStats {
    double dt = 0.0;
    double rain_volume = 0.0;      // m^3 added this step
    double clipped_volume = 0.0;   // m^3 of negative depth zeroed
};

/// One explicit finite-volume update with the given dt followed by the
/// implicit friction update. `rain` is per cell in m/s (empty = no rain).
/// OpenMP-parallel over faces and cells.
FlowState step(const FlowState& state, const terrain::TerrainField& terrain, std::span<const double> rain,
               double dt, const SolverConfig& config, StepStats* stats = nullptr);

namespace reference {
/// Serial cell-by-cell implementation of step(); kept as the oracle for the
/// parallel kernel and must agree with it bit-for-bit.
FlowState step(const FlowState& state, const terrain::TerrainField& terrain, std::span<const double> rain,
               double dt, const SolverConfig& config, StepStats* stats = nullptr);
}  // namespace reference

/// Source of per-cell rainfall: returns the rate field on [t, t_next) and
/// the next time at which the rate changes (+inf if never).
class RainSource {
public:
    virtual ~RainSource() = default;
    virtual void rates_at(double t, std::vector<double>& out) const = 0;
    [[nodiscard]] virtual double next_change(double t) const = 0;
};

/// Time-ordered snapshots at t_k = k * dt_out.
struct Trajectory {
    terrain::RasterGrid grid;
    double dt_out = 0.0;
    std::vector<FlowState> snapshots;

    [[nodiscard]] std::size_t size() const noexcept { return snapshots.size(); }
};

struct SimulationStats {
    std::size_t steps = 0;
    std::size_t cell_updates = 0;
    double rain_volume = 0.0;
    double clipped_volume = 0.0;
    double outflow_volume = 0.0;  // rain_volume + initial - final (open boundaries)
};

/// Adaptive CFL stepping from `initial` (dry if empty) to `horizon`,
/// landing exactly on every output time and on every rate change of the
/// rain source. `rain` may be null.
Trajectory simulate(const terrain::TerrainField& terrain, const RainSource* rain, const SolverConfig& config,
                    double horizon, double dt_out, const FlowState* initial = nullptr,
                    SimulationStats* stats = nullptr);

/// Total water volume over active cells.
double total_volume(const FlowState& state, const terrain::TerrainField& terrain);

}  // namespace cldflood::swe
