#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cldflood/fields.hpp"
#include "cldflood/swe.hpp"
#include "cldflood/terrain.hpp"

namespace cldflood::metrics {

/// A score that may be undefined because of a degenerate denominator.
using Score = std::optional<double>;

/// Reference fields of a trajectory restricted to `cells`.
FieldStack restrict_to_cells(const swe::Trajectory& traj, const std::vector<std::size_t>& cells);

struct RrmseResult {
    Score h, hu, hv;
    Score pooled;        // all three variables in one ratio
    Score mean_of_vars;  // arithmetic mean of the defined per-variable values
};

/// rRMSE in percent over every snapshot and point of the stacks.
RrmseResult rrmse(const FieldStack& pred, const FieldStack& ref);

/// One-pass accumulator form of rrmse; fed trajectory by trajectory it pools
/// the test set.
class RrmseAccumulator {
public:
    void add(const FieldStack& pred, const FieldStack& ref);
    [[nodiscard]] RrmseResult result() const;

private:
    double err_[3] = {0, 0, 0};
    double ref_[3] = {0, 0, 0};
};

/// Nash-Sutcliffe efficiency. Undefined for fewer than two samples or zero
/// observed variance.
Score nse(std::span<const double> pred, std::span<const double> obs);
/// Kling-Gupta efficiency (2009 form). Undefined when mean(obs) = 0 or
/// either standard deviation is 0.
Score kge(std::span<const double> pred, std::span<const double> obs);
/// Peak-depth relative error in percent. Undefined when max(obs) <= 0.
Score peak_rel_err(std::span<const double> pred, std::span<const double> obs);

/// Welford-style one-pass versions of nse and kge.
class SeriesAccumulator {
public:
    void add(double pred, double obs) noexcept;
    [[nodiscard]] Score nse() const noexcept;
    [[nodiscard]] Score kge() const noexcept;
    [[nodiscard]] Score peak_rel_err() const noexcept;

private:
    std::size_t n_ = 0;
    double mean_p_ = 0, mean_o_ = 0, m2_p_ = 0, m2_o_ = 0, c_po_ = 0, sse_ = 0;
    double max_p_ = -1e300, max_o_ = -1e300;
};

struct Confusion {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

    Confusion& operator+=(const Confusion& o) noexcept {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
    [[nodiscard]] Score csi() const noexcept;
    [[nodiscard]] Score f1() const noexcept;
    [[nodiscard]] Score precision() const noexcept;
    [[nodiscard]] Score recall() const noexcept;
};

/// Counts of h > tau agreement between two depth series of equal length.
Confusion confusion(std::span<const double> pred_depth, std::span<const double> ref_depth, double tau);

struct ExtentScores {
    double tau = 0.0;
    Confusion counts;
    Score csi, f1, precision, recall;  // percent
    std::vector<Score> csi_per_step;   // percent
};

/// Flood-extent scores for the depth variable, pooled over time and points.
ExtentScores extent_metrics(const FieldStack& pred, const FieldStack& ref, double tau);

/// Adds per-step counts to a pooled test-set evaluation.
class ExtentAccumulator {
public:
    explicit ExtentAccumulator(double tau) : tau_(tau) {}
    void add(const FieldStack& pred, const FieldStack& ref);
    [[nodiscard]] ExtentScores result() const;

private:
    double tau_;
    Confusion total_;
    std::vector<Confusion> per_step_;
};

/// Time-stamped gauge record (depth or WSE) with its datum offset.
struct GaugeSeries {
    std::string name;
    double x = 0.0, y = 0.0;
    std::vector<double> times;
    std::vector<double> values;
    double datum = 0.0;

    void validate() const;
};

/// Shift `sim` so that its mean over the overlap of the two time ranges
/// equals the observed mean there. Throws DomainError if they do not overlap.
GaugeSeries recenter_wse(const GaugeSeries& sim, const GaugeSeries& obs);

/// max depth over the cross-section plus mean bed elevation along it.
double wse_from_cross_section(std::span<const double> depth, const terrain::TerrainField& terrain,
                              std::span<const std::size_t> cells);

struct GaugeScores {
    std::string name;
    double x = 0.0, y = 0.0;
    Score nse, kge, peak_rel_err;
};

struct MetricReport {
    std::string model_kind;
    std::size_t trajectories = 0;
    std::size_t eval_points = 0;
    RrmseResult rrmse;
    std::vector<GaugeScores> gauges;
    std::vector<ExtentScores> extents;
    double runtime_seconds = 0.0;
    bool include_runtime = true;  // false keeps reports byte-stable across runs
};

/// Aligned plain-text table.
std::string format_text(const MetricReport& report);
/// `key = value` lines; undefined scores are written as `undefined`.
std::string format_key_values(const MetricReport& report);

}  // namespace cldflood::metrics
