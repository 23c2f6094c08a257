#include "cldflood/forcing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cldflood/error.hpp"
#include "cldflood/rng.hpp"

namespace cldflood::forcing {

namespace {

std::size_t interval_index(double t, double dt) {
    // Landing times are computed as k*dt; nudge so they fall into interval k.
    return static_cast<std::size_t>(std::floor(t / dt + 1e-9));
}

}  // namespace

void Hyetograph::validate() const {
    if (rates.empty()) throw ConfigError("hyetograph has no rates");
    if (!(dt_force > 0.0)) throw ConfigError("hyetograph interval must be positive");
    for (double r : rates)
        if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("rainfall rates must be finite and non-negative");
}

double Hyetograph::rate_at(double t) const noexcept {
    if (t < 0.0) return 0.0;
    const std::size_t i = interval_index(t, dt_force);
    return i < rates.size() ? rates[i] : 0.0;
}

double Hyetograph::depth_until(double t) const noexcept {
    double depth = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        const double a = static_cast<double>(i) * dt_force;
        if (a >= t) break;
        const double b = std::min(t, static_cast<double>(i + 1) * dt_force);
        depth += rates[i] * (b - a);
    }
    return depth;
}

double Hyetograph::mean_rate(double t0, double t1) const noexcept {
    if (!(t1 > t0)) return rate_at(t0);
    return (depth_until(t1) - depth_until(t0)) / (t1 - t0);
}

void RainField::validate() const {
    if (nx_c < 1 || ny_c < 1) throw ConfigError("rain field needs at least one pixel");
    if (frames.empty()) throw ConfigError("rain field has no frames");
    if (!(dt_force > 0.0)) throw ConfigError("rain field interval must be positive");
    if (!(extent.x1 > extent.x0) || !(extent.y1 > extent.y0)) throw ConfigError("rain field extent is empty");
    const auto n = static_cast<std::size_t>(nx_c) * static_cast<std::size_t>(ny_c);
    for (const auto& f : frames) {
        if (f.size() != n) throw ConfigError("rain field frames have inconsistent shapes");
        for (double r : f)
            if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("rain field rates must be finite and non-negative");
    }
}

std::size_t RainField::frame_at(double t) const noexcept {
    if (t < 0.0) return frames.size();
    return interval_index(t, dt_force);
}

std::vector<Hyetograph> synth_ensemble(int count, double duration, double dt_force, std::uint64_t seed,
                                       const PulseOptions& options) {
    if (count <= 0 || count % 2 != 0) throw ConfigError("ensemble size must be a positive even number");
    if (!(duration > 0.0) || !(dt_force > 0.0)) throw ConfigError("duration and interval must be positive");
    if (options.intensity_lo < 0.0 || options.intensity_hi < options.intensity_lo)
        throw ConfigError("intensity range must satisfy 0 <= lo <= hi");
    if (options.max_pulses < 1) throw ConfigError("need at least one pulse");
    const auto n = static_cast<std::size_t>(std::llround(duration / dt_force));
    if (n == 0) throw ConfigError("duration shorter than one forcing interval");

    Rng rng(seed);
    std::vector<Hyetograph> out;
    out.reserve(static_cast<std::size_t>(count));
    const int half = count / 2;
    for (int e = 0; e < half; ++e) {
        Hyetograph h;
        h.dt_force = dt_force;
        h.rates.assign(n, 0.0);
        const int pulses = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(options.max_pulses)));
        const double peak = rng.uniform(options.intensity_lo, options.intensity_hi);
        for (int p = 0; p < pulses; ++p) {
            // Pulses start in the first 60% so rising limbs dominate; the
            // reversed copy supplies the recession-dominated shapes.
            const double centre = rng.uniform(0.05, 0.6) * duration;
            const double rise = rng.uniform(0.03, 0.15) * duration;
            const double fall = rng.uniform(0.05, 0.3) * duration;
            const double weight = rng.uniform(0.4, 1.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double t = (static_cast<double>(i) + 0.5) * dt_force;
                double v = 0.0;
                if (t <= centre && t > centre - rise) v = 1.0 - (centre - t) / rise;
                else if (t > centre && t < centre + fall) v = 1.0 - (t - centre) / fall;
                h.rates[i] += weight * v;
            }
        }
        const double top = *std::max_element(h.rates.begin(), h.rates.end());
        for (double& r : h.rates) r = top > 0.0 ? peak * (r / top) : 0.0;
        out.push_back(std::move(h));
    }
    for (int e = 0; e < half; ++e) {
        Hyetograph rev = out[static_cast<std::size_t>(e)];
        std::reverse(rev.rates.begin(), rev.rates.end());
        out.push_back(std::move(rev));
    }
    return out;
}

RainField synth_rain_field(const Hyetograph& intensity, int nx_c, int ny_c, const Extent& extent,
                           std::uint64_t seed) {
    intensity.validate();
    Rng rng(seed);
    RainField f;
    f.nx_c = nx_c;
    f.ny_c = ny_c;
    f.dt_force = intensity.dt_force;
    f.extent = extent;
    const double w = extent.x1 - extent.x0;
    const double hgt = extent.y1 - extent.y0;
    const double x_start = extent.x0 + rng.uniform(0.0, 1.0) * w;
    const double y_start = extent.y0 + rng.uniform(0.0, 1.0) * hgt;
    const double x_end = extent.x0 + rng.uniform(0.0, 1.0) * w;
    const double y_end = extent.y0 + rng.uniform(0.0, 1.0) * hgt;
    const double radius = rng.uniform(0.3, 0.7) * std::max(w, hgt);
    const std::size_t n = intensity.rates.size();
    for (std::size_t k = 0; k < n; ++k) {
        const double s = n > 1 ? static_cast<double>(k) / static_cast<double>(n - 1) : 0.0;
        const double cx = x_start + s * (x_end - x_start);
        const double cy = y_start + s * (y_end - y_start);
        std::vector<double> frame(static_cast<std::size_t>(nx_c * ny_c));
        for (int jc = 0; jc < ny_c; ++jc)
            for (int ic = 0; ic < nx_c; ++ic) {
                const double px = extent.x0 + (ic + 0.5) * f.pixel_width();
                const double py = extent.y0 + (jc + 0.5) * f.pixel_height();
                const double d2 = (px - cx) * (px - cx) + (py - cy) * (py - cy);
                frame[static_cast<std::size_t>(jc * nx_c + ic)] =
                    intensity.rates[k] * std::exp(-0.5 * d2 / (radius * radius));
            }
        f.frames.push_back(std::move(frame));
    }
    return f;
}

namespace {

std::vector<std::size_t> pixel_map(const RainField& field, const terrain::RasterGrid& grid) {
    const double tol = 1e-9 * grid.dx;
    if (grid.min_x() < field.extent.x0 - tol || grid.max_x() > field.extent.x1 + tol ||
        grid.min_y() < field.extent.y0 - tol || grid.max_y() > field.extent.y1 + tol)
        throw DomainError("rain field extent does not cover the computational grid");
    std::vector<std::size_t> map(grid.cell_count());
    const double pw = field.pixel_width();
    const double ph = field.pixel_height();
    for (int j = 0; j < grid.ny; ++j) {
        const int jc = std::clamp(static_cast<int>(std::floor((grid.center_y(j) - field.extent.y0) / ph)), 0,
                                  field.ny_c - 1);
        for (int i = 0; i < grid.nx; ++i) {
            const int ic = std::clamp(static_cast<int>(std::floor((grid.center_x(i) - field.extent.x0) / pw)), 0,
                                      field.nx_c - 1);
            map[grid.index(i, j)] = static_cast<std::size_t>(jc * field.nx_c + ic);
        }
    }
    return map;
}

}  // namespace

std::vector<double> resample_to_grid(const RainField& field, std::size_t frame, const terrain::RasterGrid& grid) {
    if (frame >= field.frames.size()) throw DomainError("rain field frame index out of range");
    const auto map = pixel_map(field, grid);
    std::vector<double> out(grid.cell_count());
    const auto& f = field.frames[frame];
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = f[map[c]];
    return out;
}

FieldRain::FieldRain(const RainField& field, const terrain::RasterGrid& grid)
    : field_(&field), pixel_of_cell_(pixel_map(field, grid)) {}

void FieldRain::rates_at(double t, std::vector<double>& out) const {
    out.resize(pixel_of_cell_.size());
    const std::size_t k = field_->frame_at(t);
    if (k >= field_->frames.size()) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    const auto& f = field_->frames[k];
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = f[pixel_of_cell_[c]];
}

double FieldRain::next_change(double t) const {
    const std::size_t k = field_->frame_at(t);
    if (k >= field_->frames.size()) return std::numeric_limits<double>::infinity();
    return static_cast<double>(k + 1) * field_->dt_force;
}

void UniformRain::rates_at(double t, std::vector<double>& out) const { out.assign(cells_, hyeto_->rate_at(t)); }

double UniformRain::next_change(double t) const {
    const std::size_t k = interval_index(std::max(t, 0.0), hyeto_->dt_force);
    if (k >= hyeto_->rates.size()) return std::numeric_limits<double>::infinity();
    return static_cast<double>(k + 1) * hyeto_->dt_force;
}

ForcingSequence snapshot_forcing(const Hyetograph& hyeto, double dt_out, std::size_t n_snapshots) {
    ForcingSequence s;
    s.dim = 1;
    s.values.resize(n_snapshots);
    for (std::size_t k = 0; k < n_snapshots; ++k) {
        const double t = static_cast<double>(k) * dt_out;
        s.values[k] = k == 0 ? hyeto.rate_at(0.0) : hyeto.mean_rate(t - dt_out, t);
    }
    return s;
}

ForcingSequence snapshot_forcing(const RainField& field, double dt_out, std::size_t n_snapshots) {
    ForcingSequence s;
    s.dim = static_cast<std::size_t>(field.nx_c * field.ny_c);
    s.values.assign(n_snapshots * s.dim, 0.0);
    for (std::size_t p = 0; p < s.dim; ++p) {
        Hyetograph pixel;
        pixel.dt_force = field.dt_force;
        pixel.rates.reserve(field.frames.size());
        for (const auto& f : field.frames) pixel.rates.push_back(f[p]);
        const ForcingSequence one = snapshot_forcing(pixel, dt_out, n_snapshots);
        for (std::size_t k = 0; k < n_snapshots; ++k) s.values[k * s.dim + p] = one.values[k];
    }
    return s;
}

ForcingStats::ForcingStats(std::vector<double> mean, std::vector<double> std, bool per_component)
    : mean_(std::move(mean)), std_(std::move(std)), per_component_(per_component) {
    if (mean_.empty() || mean_.size() != std_.size()) throw ConfigError("forcing statistics are malformed");
    for (double& s : std_) s = std::max(s, kStdFloor);
}

ForcingStats ForcingStats::fit(const std::vector<ForcingSequence>& training, bool per_component) {
    if (training.empty()) throw ConfigError("cannot fit forcing statistics without training data");
    const std::size_t dim = training.front().dim;
    for (const auto& s : training)
        if (s.dim != dim) throw ConfigError("training forcing sequences have different dimensions");
    const std::size_t slots = per_component ? dim : 1;
    std::vector<double> sum(slots, 0.0), count(slots, 0.0);
    for (const auto& s : training)
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            const std::size_t k = per_component ? i % dim : 0;
            sum[k] += s.values[i];
            count[k] += 1.0;
        }
    std::vector<double> mean(slots), var(slots, 0.0);
    for (std::size_t k = 0; k < slots; ++k) mean[k] = sum[k] / count[k];
    for (const auto& s : training)
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            const std::size_t k = per_component ? i % dim : 0;
            const double d = s.values[i] - mean[k];
            var[k] += d * d;
        }
    std::vector<double> sd(slots);
    for (std::size_t k = 0; k < slots; ++k) sd[k] = std::sqrt(var[k] / count[k]);
    return ForcingStats(std::move(mean), std::move(sd), per_component);
}

double ForcingStats::standardize(double x, std::size_t component) const {
    const std::size_t k = slot(component);
    return (x - mean_[k]) / std_[k];
}

double ForcingStats::unstandardize(double z, std::size_t component) const {
    const std::size_t k = slot(component);
    return z * std_[k] + mean_[k];
}

ForcingSequence ForcingStats::standardize(const ForcingSequence& raw) const {
    if (per_component_ && raw.dim != mean_.size()) throw ContractError("forcing dimension does not match statistics");
    ForcingSequence out = raw;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = standardize(raw.values[i], i % raw.dim);
    return out;
}

ForcingSequence ForcingStats::unstandardize(const ForcingSequence& z) const {
    if (per_component_ && z.dim != mean_.size()) throw ContractError("forcing dimension does not match statistics");
    ForcingSequence out = z;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = unstandardize(z.values[i], i % z.dim);
    return out;
}

}  // namespace cldflood::forcing
