#include "cldflood/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cldflood/error.hpp"

namespace cldflood::metrics {

namespace {

Score ratio_percent(double err, double ref) {
    if (!(ref > 0.0)) return std::nullopt;
    return 100.0 * std::sqrt(err / ref);
}

Score percent_of(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return std::nullopt;
    return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

void check_shapes(const FieldStack& pred, const FieldStack& ref) {
    if (pred.steps != ref.steps || pred.points != ref.points || pred.values.size() != ref.values.size())
        throw ContractError("metrics: prediction and reference shapes differ");
    if (ref.points == 0) throw DomainError("metrics: empty evaluation set");
}

void check_series(std::span<const double> pred, std::span<const double> obs) {
    if (pred.size() != obs.size()) throw ContractError("metrics: series lengths differ");
}

double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

FieldStack restrict_to_cells(const swe::Trajectory& traj, const std::vector<std::size_t>& cells) {
    FieldStack out(traj.size(), cells.size());
    const std::size_t n = traj.grid.nx * traj.grid.ny;
    for (std::size_t c : cells)
        if (c >= n) throw DomainError("metrics: evaluation cell outside the grid");
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const auto& s = traj.snapshots[k];
        for (std::size_t p = 0; p < cells.size(); ++p) {
            out.at(k, 0, p) = s.h[cells[p]];
            out.at(k, 1, p) = s.hu[cells[p]];
            out.at(k, 2, p) = s.hv[cells[p]];
        }
    }
    return out;
}

RrmseResult rrmse(const FieldStack& pred, const FieldStack& ref) {
    RrmseAccumulator acc;
    acc.add(pred, ref);
    return acc.result();
}

void RrmseAccumulator::add(const FieldStack& pred, const FieldStack& ref) {
    check_shapes(pred, ref);
    for (std::size_t k = 0; k < ref.steps; ++k) {
        for (int v = 0; v < 3; ++v) {
            const double* a = pred.series(k, v);
            const double* b = ref.series(k, v);
            for (std::size_t p = 0; p < ref.points; ++p) {
                const double d = a[p] - b[p];
                err_[v] += d * d;
                ref_[v] += b[p] * b[p];
            }
        }
    }
}

RrmseResult RrmseAccumulator::result() const {
    RrmseResult r;
    r.h = ratio_percent(err_[0], ref_[0]);
    r.hu = ratio_percent(err_[1], ref_[1]);
    r.hv = ratio_percent(err_[2], ref_[2]);
    r.pooled = ratio_percent(err_[0] + err_[1] + err_[2], ref_[0] + ref_[1] + ref_[2]);
    double sum = 0.0;
    int count = 0;
    for (const Score& s : {r.h, r.hu, r.hv}) {
        if (s) {
            sum += *s;
            ++count;
        }
    }
    if (count > 0) r.mean_of_vars = sum / count;
    return r;
}

Score nse(std::span<const double> pred, std::span<const double> obs) {
    check_series(pred, obs);
    if (obs.size() < 2) return std::nullopt;
    const double mo = mean(obs);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        num += (pred[i] - obs[i]) * (pred[i] - obs[i]);
        den += (obs[i] - mo) * (obs[i] - mo);
    }
    if (!(den > 0.0)) return std::nullopt;
    return 1.0 - num / den;
}

Score kge(std::span<const double> pred, std::span<const double> obs) {
    check_series(pred, obs);
    if (obs.size() < 2) return std::nullopt;
    const double mp = mean(pred);
    const double mo = mean(obs);
    double spp = 0.0, soo = 0.0, spo = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        spp += (pred[i] - mp) * (pred[i] - mp);
        soo += (obs[i] - mo) * (obs[i] - mo);
        spo += (pred[i] - mp) * (obs[i] - mo);
    }
    if (mo == 0.0 || !(spp > 0.0) || !(soo > 0.0)) return std::nullopt;
    const double r = spo / std::sqrt(spp * soo);
    const double alpha = std::sqrt(spp / soo);
    const double beta = mp / mo;
    return 1.0 - std::sqrt((r - 1) * (r - 1) + (alpha - 1) * (alpha - 1) + (beta - 1) * (beta - 1));
}

Score peak_rel_err(std::span<const double> pred, std::span<const double> obs) {
    check_series(pred, obs);
    if (obs.empty()) return std::nullopt;
    const double po = *std::max_element(obs.begin(), obs.end());
    const double pp = *std::max_element(pred.begin(), pred.end());
    if (!(po > 0.0)) return std::nullopt;
    return 100.0 * std::abs(pp - po) / po;
}

void SeriesAccumulator::add(double pred, double obs) noexcept {
    ++n_;
    const double n = static_cast<double>(n_);
    const double dp = pred - mean_p_;
    const double dob = obs - mean_o_;
    mean_p_ += dp / n;
    mean_o_ += dob / n;
    m2_p_ += dp * (pred - mean_p_);
    m2_o_ += dob * (obs - mean_o_);
    c_po_ += dp * (obs - mean_o_);
    sse_ += (pred - obs) * (pred - obs);
    max_p_ = std::max(max_p_, pred);
    max_o_ = std::max(max_o_, obs);
}

Score SeriesAccumulator::nse() const noexcept {
    if (n_ < 2 || !(m2_o_ > 0.0)) return std::nullopt;
    return 1.0 - sse_ / m2_o_;
}

Score SeriesAccumulator::kge() const noexcept {
    if (n_ < 2 || mean_o_ == 0.0 || !(m2_p_ > 0.0) || !(m2_o_ > 0.0)) return std::nullopt;
    const double r = c_po_ / std::sqrt(m2_p_ * m2_o_);
    const double alpha = std::sqrt(m2_p_ / m2_o_);
    const double beta = mean_p_ / mean_o_;
    return 1.0 - std::sqrt((r - 1) * (r - 1) + (alpha - 1) * (alpha - 1) + (beta - 1) * (beta - 1));
}

Score SeriesAccumulator::peak_rel_err() const noexcept {
    if (n_ == 0 || !(max_o_ > 0.0)) return std::nullopt;
    return 100.0 * std::abs(max_p_ - max_o_) / max_o_;
}

Score Confusion::csi() const noexcept { return percent_of(tp, tp + fp + fn); }
Score Confusion::f1() const noexcept { return percent_of(2 * tp, 2 * tp + fp + fn); }
Score Confusion::precision() const noexcept { return percent_of(tp, tp + fp); }
Score Confusion::recall() const noexcept { return percent_of(tp, tp + fn); }

Confusion confusion(std::span<const double> pred_depth, std::span<const double> ref_depth, double tau) {
    check_series(pred_depth, ref_depth);
    Confusion c;
    for (std::size_t i = 0; i < ref_depth.size(); ++i) {
        const bool p = pred_depth[i] > tau;
        const bool r = ref_depth[i] > tau;
        if (p && r) ++c.tp;
        else if (p) ++c.fp;
        else if (r) ++c.fn;
        else ++c.tn;
    }
    return c;
}

ExtentScores extent_metrics(const FieldStack& pred, const FieldStack& ref, double tau) {
    ExtentAccumulator acc(tau);
    acc.add(pred, ref);
    return acc.result();
}

void ExtentAccumulator::add(const FieldStack& pred, const FieldStack& ref) {
    check_shapes(pred, ref);
    if (per_step_.size() < ref.steps) per_step_.resize(ref.steps);
    for (std::size_t k = 0; k < ref.steps; ++k) {
        const Confusion c = confusion({pred.series(k, 0), pred.points}, {ref.series(k, 0), ref.points}, tau_);
        per_step_[k] += c;
        total_ += c;
    }
}

ExtentScores ExtentAccumulator::result() const {
    ExtentScores s;
    s.tau = tau_;
    s.counts = total_;
    s.csi = total_.csi();
    s.f1 = total_.f1();
    s.precision = total_.precision();
    s.recall = total_.recall();
    s.csi_per_step.reserve(per_step_.size());
    for (const Confusion& c : per_step_) s.csi_per_step.push_back(c.csi());
    return s;
}

void GaugeSeries::validate() const {
    if (times.size() != values.size()) throw DomainError("gauge " + name + ": times and values differ in length");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw DomainError("gauge " + name + ": timestamps not strictly increasing");
}

GaugeSeries recenter_wse(const GaugeSeries& sim, const GaugeSeries& obs) {
    sim.validate();
    obs.validate();
    if (sim.times.empty() || obs.times.empty()) throw DomainError("recenter_wse: empty series");
    const double lo = std::max(sim.times.front(), obs.times.front());
    const double hi = std::min(sim.times.back(), obs.times.back());
    auto window_mean = [&](const GaugeSeries& g) -> std::optional<double> {
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < g.times.size(); ++i) {
            if (g.times[i] >= lo && g.times[i] <= hi) {
                s += g.values[i];
                ++n;
            }
        }
        if (n == 0) return std::nullopt;
        return s / static_cast<double>(n);
    };
    const auto ms = window_mean(sim);
    const auto mo = window_mean(obs);
    if (lo > hi || !ms || !mo) throw DomainError("recenter_wse: simulated and observed windows do not overlap");
    GaugeSeries out = sim;
    out.datum = obs.datum;
    for (double& v : out.values) v = v - *ms + *mo;
    return out;
}

double wse_from_cross_section(std::span<const double> depth, const terrain::TerrainField& terrain,
                              std::span<const std::size_t> cells) {
    if (cells.empty()) throw DomainError("cross-section is empty");
    if (depth.size() != terrain.bed.size()) throw ContractError("cross-section: depth field size mismatch");
    double hmax = 0.0;
    double bsum = 0.0;
    for (std::size_t c : cells) {
        if (c >= terrain.bed.size() || !terrain.mask[c]) throw DomainError("cross-section cell is not active");
        hmax = std::max(hmax, depth[c]);
        bsum += terrain.bed[c];
    }
    return hmax + bsum / static_cast<double>(cells.size());
}

namespace {

std::string show(const Score& s) {
    if (!s) return "undefined";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", *s);
    return buf;
}

std::string fixed(const Score& s, int prec) {
    if (!s) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", prec, *s);
    return buf;
}

std::string tau_tag(double tau) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", tau);
    return buf;
}

}  // namespace

std::string format_text(const MetricReport& r) {
    std::ostringstream os;
    char line[160];
    os << "model " << r.model_kind << ", " << r.trajectories << " trajectories, " << r.eval_points
       << " points per snapshot\n\n";
    std::snprintf(line, sizeof line, "%-10s %10s %10s %10s %10s %12s\n", "rRMSE %", "pooled", "h", "hu", "hv",
                  "mean(h,hu,hv)");
    os << line;
    std::snprintf(line, sizeof line, "%-10s %10s %10s %10s %10s %12s\n", "", fixed(r.rrmse.pooled, 2).c_str(),
                  fixed(r.rrmse.h, 2).c_str(), fixed(r.rrmse.hu, 2).c_str(), fixed(r.rrmse.hv, 2).c_str(),
                  fixed(r.rrmse.mean_of_vars, 2).c_str());
    os << line;
    if (!r.extents.empty()) {
        os << '\n';
        std::snprintf(line, sizeof line, "%-10s %10s %10s %10s %10s\n", "tau (m)", "CSI %", "F1 %", "prec %",
                      "recall %");
        os << line;
        for (const auto& e : r.extents) {
            std::snprintf(line, sizeof line, "%-10s %10s %10s %10s %10s\n", tau_tag(e.tau).c_str(),
                          fixed(e.csi, 2).c_str(), fixed(e.f1, 2).c_str(), fixed(e.precision, 2).c_str(),
                          fixed(e.recall, 2).c_str());
            os << line;
        }
    }
    if (!r.gauges.empty()) {
        os << '\n';
        std::snprintf(line, sizeof line, "%-16s %10s %10s %12s\n", "gauge", "NSE", "KGE", "peak err %");
        os << line;
        for (const auto& g : r.gauges) {
            std::snprintf(line, sizeof line, "%-16s %10s %10s %12s\n", g.name.c_str(), fixed(g.nse, 4).c_str(),
                          fixed(g.kge, 4).c_str(), fixed(g.peak_rel_err, 2).c_str());
            os << line;
        }
    }
    if (r.include_runtime) {
        std::snprintf(line, sizeof line, "\nruntime %.3f s\n", r.runtime_seconds);
        os << line;
    }
    return os.str();
}

std::string format_key_values(const MetricReport& r) {
    std::ostringstream os;
    os << "model_kind = " << r.model_kind << '\n';
    os << "trajectories = " << r.trajectories << '\n';
    os << "eval_points = " << r.eval_points << '\n';
    os << "rrmse_all = " << show(r.rrmse.pooled) << '\n';
    os << "rrmse_mean_of_vars = " << show(r.rrmse.mean_of_vars) << '\n';
    os << "rrmse_h = " << show(r.rrmse.h) << '\n';
    os << "rrmse_hu = " << show(r.rrmse.hu) << '\n';
    os << "rrmse_hv = " << show(r.rrmse.hv) << '\n';
    for (const auto& e : r.extents) {
        const std::string t = "extent." + tau_tag(e.tau) + ".";
        os << t << "csi = " << show(e.csi) << '\n';
        os << t << "f1 = " << show(e.f1) << '\n';
        os << t << "precision = " << show(e.precision) << '\n';
        os << t << "recall = " << show(e.recall) << '\n';
        os << t << "tp = " << e.counts.tp << '\n';
        os << t << "fp = " << e.counts.fp << '\n';
        os << t << "fn = " << e.counts.fn << '\n';
        os << t << "tn = " << e.counts.tn << '\n';
        os << t << "csi_per_step =";
        for (const auto& s : e.csi_per_step) os << ' ' << show(s);
        os << '\n';
    }
    for (const auto& g : r.gauges) {
        const std::string t = "gauge." + g.name + ".";
        os << t << "x = " << g.x << '\n';
        os << t << "y = " << g.y << '\n';
        os << t << "nse = " << show(g.nse) << '\n';
        os << t << "kge = " << show(g.kge) << '\n';
        os << t << "peak_rel_err = " << show(g.peak_rel_err) << '\n';
    }
    if (r.include_runtime) os << "runtime_seconds = " << r.runtime_seconds << '\n';
    return os.str();
}

}  // namespace cldflood::metrics
