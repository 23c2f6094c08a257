#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cldflood::terrain {

/// Uniform square-cell raster. Cell (i, j) has its center at
/// (origin_x + i*dx, origin_y + j*dx); j grows northward.
struct RasterGrid {
    int nx = 0;
    int ny = 0;
    double dx = 1.0;
    double origin_x = 0.0;
    double origin_y = 0.0;

    [[nodiscard]] std::size_t cell_count() const noexcept {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
    }
    [[nodiscard]] std::size_t index(int i, int j) const noexcept {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) +
               static_cast<std::size_t>(i);
    }
    [[nodiscard]] double center_x(int i) const noexcept { return origin_x + i * dx; }
    [[nodiscard]] double center_y(int j) const noexcept { return origin_y + j * dx; }

    // Bounding box of the cell areas (not the cell centers).
    [[nodiscard]] double min_x() const noexcept { return origin_x - 0.5 * dx; }
    [[nodiscard]] double max_x() const noexcept { return origin_x + (nx - 0.5) * dx; }
    [[nodiscard]] double min_y() const noexcept { return origin_y - 0.5 * dx; }
    [[nodiscard]] double max_y() const noexcept { return origin_y + (ny - 0.5) * dx; }

    /// Throws ConfigError unless nx >= 2, ny >= 2 and dx > 0.
    void validate() const;

    friend bool operator==(const RasterGrid&, const RasterGrid&) = default;
};

struct TerrainField {
    RasterGrid grid;
    std::vector<double> bed;        // m
    std::vector<double> manning;    // s m^(-1/3)
    std::vector<std::uint8_t> mask; // 1 = active

    [[nodiscard]] bool active(std::size_t c) const noexcept { return mask[c] != 0; }
    [[nodiscard]] std::size_t active_count() const noexcept;

    /// Checks sizes, finiteness of bed and positivity of Manning on active
    /// cells, and that at least one cell is active.
    void validate() const;
};

enum class DemStyle { valley, fractal, tilted_plane };

DemStyle parse_dem_style(std::string_view name);
std::string_view to_string(DemStyle style);

struct DemOptions {
    DemStyle style = DemStyle::fractal;
    // Overall relief of the valley/fractal surfaces in metres.
    double relief = 40.0;
    double base_elevation = 200.0;
    // Slope of the tilted plane (dz/dx), and the downstream tilt of the valley.
    double plane_gradient = 0.01;
    double manning = 0.035;
    // Valley style only: Manning value inside the main channel; 0 keeps a
    // uniform roughness.
    double channel_manning = 0.0;
    // Valley style only: width in metres of the flat valley floor.
    double floodplain_width = 0.0;
    // Valley style only: amplitude in metres of the noise on the valley floor.
    double floodplain_roughness = 0.0;
};

/// Procedural DEM. Deterministic in `seed`; all cells active.
TerrainField generate_dem(const RasterGrid& grid, std::uint64_t seed, const DemOptions& options);

/// Mean of the slope magnitude over active cells (same stencil as the
/// conditioning features).
double mean_slope(const TerrainField& terrain);

/// Static decoder conditioning inputs.
struct TerrainFeatures {
    RasterGrid grid;
    std::vector<double> bed_z;      // standardized elevation
    std::vector<double> slope;      // |grad b|
    std::vector<double> manning_scaled;
    std::vector<std::uint8_t> mask;
    double mu_b = 0.0;
    double sigma_b = 0.0;
};

inline constexpr double kSigmaFloor = 1e-8;

TerrainFeatures compute_features(const TerrainField& terrain);

/// Bed-slope magnitude per cell: centred differences where both neighbours
/// are active, one-sided where only one is, zero along an axis with none.
std::vector<double> slope_magnitude(const TerrainField& terrain);

using FeatureTriple = std::array<double, 3>;  // (b_z, b_g, n_scaled)

/// Bilinear interpolation of the features at world point (x, y). Masked
/// neighbours are dropped and the remaining weights renormalized. Points
/// inside the raster but outside the hull of cell centres clamp to the edge.
FeatureTriple features_at(const TerrainFeatures& features, double x, double y);

/// Bilinear sample of a single per-cell field with the same stencil and
/// masking rules as features_at.
double sample_bilinear(const RasterGrid& grid, const std::vector<std::uint8_t>& mask,
                       const std::vector<double>& field, double x, double y);

}  // namespace cldflood::terrain
