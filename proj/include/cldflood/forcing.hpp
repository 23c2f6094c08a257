#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cldflood/swe.hpp"
#include "cldflood/terrain.hpp"

namespace cldflood::forcing {

/// Spatially uniform rainfall rates (m/s), piecewise constant on intervals
/// of length dt_force starting at t = 0. Zero after the last interval.
struct Hyetograph {
    std::vector<double> rates;
    double dt_force = 3600.0;

    void validate() const;
    [[nodiscard]] double rate_at(double t) const noexcept;
    /// Rain depth (m) fallen on [0, t].
    [[nodiscard]] double depth_until(double t) const noexcept;
    /// Mean rate over [t0, t1].
    [[nodiscard]] double mean_rate(double t0, double t1) const noexcept;
};

struct Extent {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

/// Coarse rain raster sequence; pixel (ic, jc) covers
/// [x0 + ic*w, x0 + (ic+1)*w) x [y0 + jc*hgt, ...), jc grows northward.
struct RainField {
    int nx_c = 0;
    int ny_c = 0;
    std::vector<std::vector<double>> frames;  // each nx_c*ny_c, row-major
    double dt_force = 3600.0;
    Extent extent;

    void validate() const;
    [[nodiscard]] double pixel_width() const noexcept { return (extent.x1 - extent.x0) / nx_c; }
    [[nodiscard]] double pixel_height() const noexcept { return (extent.y1 - extent.y0) / ny_c; }
    [[nodiscard]] std::size_t frame_at(double t) const noexcept;
};

struct PulseOptions {
    double intensity_lo = 0.0;  // peak rate range, m/s
    double intensity_hi = 0.0;
    int max_pulses = 3;
};

/// count/2 random pulse hyetographs followed by their exact time reversals.
/// Throws ConfigError for odd or non-positive counts.
std::vector<Hyetograph> synth_ensemble(int count, double duration, double dt_force, std::uint64_t seed,
                                       const PulseOptions& options);

/// Moving Gaussian storm scaled by a hyetograph, on a coarse raster.
RainField synth_rain_field(const Hyetograph& intensity, int nx_c, int ny_c, const Extent& extent,
                           std::uint64_t seed);

/// Nearest-coarse-pixel assignment of one frame onto the fine grid. Throws
/// DomainError if the grid's cell-area box is not inside the field extent.
std::vector<double> resample_to_grid(const RainField& field, std::size_t frame, const terrain::RasterGrid& grid);

/// Fine-grid rates per frame, with the frame index -> coarse pixel map
/// computed once.
class FieldRain final : public swe::RainSource {
public:
    FieldRain(const RainField& field, const terrain::RasterGrid& grid);
    void rates_at(double t, std::vector<double>& out) const override;
    [[nodiscard]] double next_change(double t) const override;

private:
    const RainField* field_;
    std::vector<std::size_t> pixel_of_cell_;
};

class UniformRain final : public swe::RainSource {
public:
    UniformRain(const Hyetograph& hyeto, std::size_t cells) : hyeto_(&hyeto), cells_(cells) {}
    void rates_at(double t, std::vector<double>& out) const override;
    [[nodiscard]] double next_change(double t) const override;

private:
    const Hyetograph* hyeto_;
    std::size_t cells_;
};

/// Forcing seen by the surrogate at snapshot k: mean rate over the output
/// interval ending at t_k, and the instantaneous rate at t_0 for k = 0.
/// Result is n_snapshots rows of `dim` values (dim = 1 for a hyetograph,
/// nx_c*ny_c for a field).
struct ForcingSequence {
    std::size_t dim = 1;
    std::vector<double> values;  // n_snapshots * dim

    [[nodiscard]] std::size_t steps() const noexcept { return dim ? values.size() / dim : 0; }
    [[nodiscard]] const double* row(std::size_t k) const noexcept { return values.data() + k * dim; }
};

ForcingSequence snapshot_forcing(const Hyetograph& hyeto, double dt_out, std::size_t n_snapshots);
ForcingSequence snapshot_forcing(const RainField& field, double dt_out, std::size_t n_snapshots);

inline constexpr double kStdFloor = 1e-12;

/// Training-split rainfall statistics. Immutable once fitted.
class ForcingStats {
public:
    ForcingStats() = default;
    ForcingStats(std::vector<double> mean, std::vector<double> std, bool per_component);

    /// Fit over all rows of all training sequences. Global statistics pool
    /// every component; per-component statistics keep one pair per entry.
    static ForcingStats fit(const std::vector<ForcingSequence>& training, bool per_component = false);

    [[nodiscard]] ForcingSequence standardize(const ForcingSequence& raw) const;
    [[nodiscard]] ForcingSequence unstandardize(const ForcingSequence& z) const;
    [[nodiscard]] double standardize(double x, std::size_t component = 0) const;
    [[nodiscard]] double unstandardize(double z, std::size_t component = 0) const;

    [[nodiscard]] bool per_component() const noexcept { return per_component_; }
    [[nodiscard]] const std::vector<double>& mean() const noexcept { return mean_; }
    [[nodiscard]] const std::vector<double>& std() const noexcept { return std_; }

private:
    [[nodiscard]] std::size_t slot(std::size_t component) const noexcept { return per_component_ ? component : 0; }

    std::vector<double> mean_{0.0};
    std::vector<double> std_{1.0};
    bool per_component_ = false;
};

}  // namespace cldflood::forcing
