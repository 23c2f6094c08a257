// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cldflood/commands.hpp"
#include "cldflood/rng.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cldflood;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Lake at rest over a fractal DEM.
Outcome lake_at_rest() {
    terrain::DemOptions o;
    o.style = terrain::DemStyle::fractal;
    const auto t = terrain::generate_dem({64, 64, 30.0}, 7, o);
    std::vector<double> sorted = t.bed;
    std::ranges::sort(sorted);
    const double level = sorted[sorted.size() / 2];
    const auto s0 = fixture::lake_at_rest(t, level);

    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    swe::SolverConfig c;
    c.boundary = swe::Boundary::closed;
    auto s = s0;
    const auto t0 = std::chrono::steady_clock::now();
    for (int k = 0; k < 1000; ++k) s = swe::step(s, t, {}, swe::cfl_timestep(s, c, t), c);
    const double elapsed = seconds_since(t0);
    omp_set_num_threads(saved);

    double worst = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!t.mask[i]) continue;
        if (s0.h[i] > 0.0)
            worst = std::max(worst, std::abs((s.h[i] + t.bed[i]) - (s0.h[i] + t.bed[i])));
        else
            worst = std::max(worst, s.h[i]);
    }
    return {worst < 1e-10 && elapsed < 30.0, fmt("max |eta - eta0| = %.3g m, %.2f s single-thread", worst, elapsed)};
}

// 2. Mass conservation on a closed domain.
Outcome mass_conservation() {
    terrain::DemOptions o;
    o.style = terrain::DemStyle::fractal;
    const auto t = terrain::generate_dem({32, 32, 50.0}, 12, o);
    forcing::PulseOptions p;
    p.intensity_lo = 20.0 / 3.6e6;
    p.intensity_hi = 100.0 / 3.6e6;
    const double horizon = 24 * 3600.0;
    const auto hy = forcing::synth_ensemble(2, horizon, 1800.0, 31, p);
    const forcing::UniformRain rain(hy[0], t.grid.cell_count());
    swe::SolverConfig c;
    c.boundary = swe::Boundary::closed;
    const auto tr = swe::simulate(t, &rain, c, horizon, 3600.0);
    std::size_t active = 0;
    for (auto m : t.mask) active += m ? 1 : 0;
    const double expected = hy[0].depth_until(horizon) * static_cast<double>(active) * t.grid.dx * t.grid.dx;
    const double v = swe::total_volume(tr.snapshots.back(), t);
    const double err = std::abs(v - expected) / expected;
    return {err < 1e-10, fmt("relative volume error %.3g (rain %.6g m3)", err, expected)};
}

// 3. Dam break against the analytic solution.
Outcome dam_break() {
    const auto e = fixture::dam_break(200, 0.25, 1.0, 0.1, 5.0);
    return {e.depth_l1 < 0.05 && e.momentum_l1 < 0.10,
            fmt("L1 depth error %.2f%%, momentum error %.2f%%", 100 * e.depth_l1, 100 * e.momentum_l1)};
}

// 4. BPTT gradients against central differences.
Outcome gradients() {
    terrain::DemOptions o;
    o.style = terrain::DemStyle::fractal;
    const auto t = terrain::generate_dem({4, 4, 20.0}, 6, o);
    const auto f = terrain::compute_features(t);
    Rng rng(77);
    swe::Trajectory ref;
    ref.grid = t.grid;
    ref.dt_out = 3600.0;
    for (int k = 0; k < 3; ++k) {
        auto s = swe::FlowState::dry(t.grid);
        s.time = k * 3600.0;
        for (std::size_t c = 0; c < s.size(); ++c) {
            s.h[c] = rng.uniform(0.0, 1.0);
            s.hu[c] = rng.uniform(-0.5, 0.5);
            s.hv[c] = rng.uniform(-0.5, 0.5);
        }
        ref.snapshots.push_back(std::move(s));
    }
    forcing::ForcingSequence fs;
    for (int k = 0; k < 3; ++k) fs.values.push_back(rng.uniform(0.0, 3e-5));

    cldnet::ModelConfig mc;
    mc.latent_dim = 3;
    mc.fourier_m = 2;
    mc.dyn_depth = 2;
    mc.dyn_width = 5;
    mc.rec_depth = 2;
    mc.rec_width = 6;
    mc.latent_dt = 0.7;
    mc.seed = 4;
    cldnet::Model model(mc, cldnet::CoordinateBox::of(t.grid), forcing::ForcingStats({1.5e-5}, {1e-5}, false));
    const training::Example ex{&ref, fs};
    const auto sample = training::make_sample(model, &f, t.grid, {1, 6, 11, 14});
    training::Gradients g(model);
    (void)training::compute_loss(model, ex, sample, &g);

    const std::size_t nd = model.dyn().param_count(), total = nd + model.rec().param_count();
    double worst = 0.0;
    const double h = 1e-6;
    for (int probe = 0; probe < 100; ++probe) {
        const auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(total));
        nn::Mlp& net = i < nd ? model.dyn() : model.rec();
        const std::size_t j = i < nd ? i : i - nd;
        const double grad = i < nd ? g.dyn[j] : g.rec[j];
        const double orig = net.params()[j];
        net.mutable_params()[j] = orig + h;
        const double lp = training::compute_loss(model, ex, sample, nullptr);
        net.mutable_params()[j] = orig - h;
        const double lm = training::compute_loss(model, ex, sample, nullptr);
        net.mutable_params()[j] = orig;
        const double fd = (lp - lm) / (2 * h);
        worst = std::max(worst, std::abs(fd - grad) / std::max({std::abs(fd), std::abs(grad), 1e-4}));
    }
    return {worst < 1e-5, fmt("worst relative error %.3g over 100 probes", worst)};
}

std::vector<double> random_series(Rng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// 7. Metrics against brute-force oracles.
Outcome metric_oracles() {
    Rng rng(2024);
    double worst = 0.0, worst_shift = 0.0;
    bool defined_match = true;
    bool counts_match = true;
    const auto diff = [&](const metrics::Score& a, const std::optional<double>& b) {
        if (a.has_value() != b.has_value()) {
            defined_match = false;
            return;
        }
        if (a) worst = std::max(worst, std::abs(*a - *b));
    };
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 30);
        const auto obs = random_series(rng, n, -2.0, 5.0);
        const auto pred = random_series(rng, n, -2.0, 5.0);
        diff(metrics::nse(pred, obs), oracle::nse(pred, obs));
        diff(metrics::kge(pred, obs), oracle::kge(pred, obs));
        FieldStack ps(1, n), os(1, n);
        std::ranges::copy(pred, ps.values.begin());
        std::ranges::copy(obs, os.values.begin());
        diff(metrics::rrmse(ps, os).pooled, oracle::rrmse(pred, obs));

        const double tau = rng.uniform(0.0, 2.0);
        const auto c = metrics::confusion(pred, obs, tau);
        const auto oc = oracle::confusion(pred, obs, tau);
        counts_match = counts_match && static_cast<long>(c.tp) == oc.tp && static_cast<long>(c.fp) == oc.fp &&
                       static_cast<long>(c.fn) == oc.fn && static_cast<long>(c.tn) == oc.tn;
        diff(c.csi(), oracle::csi(oc));
        diff(c.f1(), oracle::f1(oc));

        // Values on a 2^-30 grid and an integer shift keep the shifted
        // inputs exact, so only the metric's own arithmetic is compared.
        const double shift = std::round(rng.uniform(-250.0, 250.0));
        std::vector<double> qo, qp, so, sp;
        for (std::size_t i = 0; i < n; ++i) {
            qo.push_back(std::ldexp(std::round(std::ldexp(obs[i], 30)), -30));
            qp.push_back(std::ldexp(std::round(std::ldexp(pred[i], 30)), -30));
            so.push_back(qo[i] + shift);
            sp.push_back(qp[i] + shift);
        }
        const auto a = metrics::nse(qp, qo), b = metrics::nse(sp, so);
        if (a && b) worst_shift = std::max(worst_shift, std::abs(*a - *b));
    }
    return {defined_match && counts_match && worst < 1e-10 && worst_shift < 1e-12,
            fmt("worst oracle difference %.3g, NSE shift difference %.3g", worst, worst_shift)};
}

// Desk benchmark state shared by criteria 5, 6, 8 and 9.
struct Desk {
    commands::RunConfig config;
    fs::path dir;
    fs::path cldnet_ckp, ldnet_ckp;
    std::optional<metrics::MetricReport> cldnet_report, ldnet_report;
    training::TrainResult cldnet_train, ldnet_train;
    std::string error;
    double seconds = 0.0;
};

void run_desk(Desk& d, const fs::path& source_dir, const fs::path& work) {
    const auto t0 = std::chrono::steady_clock::now();
    d.config = commands::RunConfig::load(source_dir / "configs" / "desk.cfg");
    d.dir = work / "desk";
    fs::create_directories(d.dir);
    d.config.paths.dataset = d.dir / "dataset";
    d.cldnet_ckp = d.dir / "cldnet.ckp";
    d.ldnet_ckp = d.dir / "ldnet.ckp";
    commands::GlobalOptions g;
    g.deterministic = true;
    commands::gen_data(d.config, g);
    for (const char* kind : {"cldnet", "ldnet"}) {
        const bool cond = std::string(kind) == "cldnet";
        commands::TrainOptions to;
        to.kind = kind;
        to.output = cond ? d.cldnet_ckp : d.ldnet_ckp;
        (cond ? d.cldnet_train : d.ldnet_train) = commands::train(d.config, g, to);
        commands::EvaluateOptions eo;
        eo.model = to.output;
        eo.output = d.dir / (std::string("report_") + kind);
        (cond ? d.cldnet_report : d.ldnet_report) = commands::evaluate(d.config, g, eo);
    }
    d.seconds = seconds_since(t0);
}

const metrics::ExtentScores* extent_at(const metrics::MetricReport& r, double tau) {
    for (const auto& e : r.extents)
        if (e.tau == tau) return &e;
    return nullptr;
}

bool csi_f1_identity(const metrics::MetricReport& r, double& worst) {
    bool ok = true;
    for (const auto& e : r.extents) {
        if (e.csi.has_value() != e.f1.has_value()) return false;
        if (!e.csi) continue;
        const double f = *e.f1 / 100.0;
        const double diff = std::abs(*e.csi - 100.0 * f / (2.0 - f));
        worst = std::max(worst, diff);
        ok = ok && diff <= 1e-12;
    }
    return ok;
}

Outcome ablation(const Desk& d) {
    if (!d.error.empty()) return {false, "desk run failed: " + d.error};
    const auto c = d.cldnet_report->rrmse.pooled, l = d.ldnet_report->rrmse.pooled;
    if (!c || !l) return {false, "rRMSE undefined"};
    return {*c <= 0.8 * *l, fmt("CLDNet rRMSE %.2f%%, LDNet %.2f%%, ratio %.3f (desk run %.0f s)", *c, *l, *c / *l,
                                d.seconds)};
}

Outcome extent(const Desk& d, const std::vector<const metrics::MetricReport*>& extra) {
    if (!d.error.empty()) return {false, "desk run failed: " + d.error};
    const auto* c = extent_at(*d.cldnet_report, 0.1);
    const auto* l = extent_at(*d.ldnet_report, 0.1);
    if (!c || !l || !c->csi || !l->csi) return {false, "CSI at 0.1 m undefined"};
    double worst = 0.0;
    bool identity = csi_f1_identity(*d.cldnet_report, worst) && csi_f1_identity(*d.ldnet_report, worst);
    for (const auto* r : extra) identity = csi_f1_identity(*r, worst) && identity;
    return {*c->csi > *l->csi && identity,
            fmt("CSI(0.1 m) CLDNet %.2f%%, LDNet %.2f%%; worst |CSI - F1/(2-F1)| %.3g", *c->csi, *l->csi, worst)};
}

// 8. Off-grid queries at cell centres and memory for 10 points.
Outcome meshless(const Desk& d, const fs::path& source_dir) {
    auto config = d.error.empty() && !d.config.paths.dataset.empty()
                      ? d.config
                      : commands::RunConfig::load(source_dir / "configs" / "desk.cfg");
    const auto inputs = commands::build_inputs(config);
    const auto& t = inputs.terrain;
    const auto feat = terrain::compute_features(t);
    cldnet::Model model;
    if (fs::exists(d.cldnet_ckp)) {
        model = io::read_checkpoint(d.cldnet_ckp).model;
    } else {
        std::vector<forcing::ForcingSequence> fs{forcing::snapshot_forcing(inputs.hyetographs[0], 3600.0, 24)};
        model = cldnet::Model(config.model, cldnet::CoordinateBox::of(t.grid), forcing::ForcingStats::fit(fs));
    }
    const auto f = forcing::snapshot_forcing(inputs.hyetographs[0], config.dataset.dt_out, config.dataset.snapshots());
    cldnet::PredictMemory full_mem, few_mem;
    const auto full = cldnet::predict_field(model, f, cldnet::grid_queries(model, &feat, t.grid, t.mask), 512, &full_mem);

    std::vector<double> x, y;
    std::vector<std::size_t> slot;
    std::size_t k = 0;
    for (std::size_t c = 0; c < t.grid.cell_count(); ++c) {
        if (!t.mask[c]) continue;
        x.push_back(t.grid.center_x(static_cast<int>(c % t.grid.nx)));
        y.push_back(t.grid.center_y(static_cast<int>(c / t.grid.nx)));
        slot.push_back(k++);
    }
    // Query the centres in reverse order so point i is not grid slot i.
    std::ranges::reverse(x);
    std::ranges::reverse(y);
    const auto pts = cldnet::predict_field(model, f, cldnet::make_queries(model, &feat, x, y));
    std::size_t mismatches = 0;
    for (std::size_t s = 0; s < full.steps; ++s)
        for (int v = 0; v < 3; ++v)
            for (std::size_t p = 0; p < x.size(); ++p)
                if (pts.at(s, v, p) != full.at(s, v, slot[x.size() - 1 - p])) ++mismatches;

    std::vector<double> x10(x.begin(), x.begin() + 10), y10(y.begin(), y.begin() + 10);
    (void)cldnet::predict_field(model, f, cldnet::make_queries(model, &feat, x10, y10), 512, &few_mem);
    const std::size_t expect_out = full.steps * 3 * 10 * sizeof(double);
    const bool mem_ok = few_mem.output_bytes == expect_out &&
                        few_mem.output_bytes + few_mem.workspace_bytes < full_mem.output_bytes / 10;
    return {mismatches == 0 && mem_ok,
            fmt("%zu mismatches over %zu centres; 10 points: %zu output + %zu workspace bytes (full grid %zu + %zu)",
                mismatches, x.size(), few_mem.output_bytes, few_mem.workspace_bytes, full_mem.output_bytes,
                full_mem.workspace_bytes)};
}

Outcome speedup(const Desk& d) {
    if (!d.error.empty()) return {false, "desk run failed: " + d.error};
    commands::BenchOptions bo;
    bo.model = d.cldnet_ckp;
    bo.runs = 5;
    bo.output = d.dir / "bench";
    const auto r = commands::bench(d.config, {}, bo);
    return {r.ratio >= 10.0, fmt("solver %.4g s, surrogate %.4g s, speedup %.1fx", r.solver_median,
                                 r.surrogate_median, r.ratio)};
}

std::vector<fs::path> files_under(const fs::path& root) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
    std::ranges::sort(out);
    return out;
}

// 10. Re-runs produce byte-identical artifacts.
Outcome determinism(const fs::path& source_dir, const fs::path& work,
                    std::vector<metrics::MetricReport>& reports) {
    const auto base = commands::RunConfig::load(source_dir / "configs" / "smoke.cfg");
    commands::GlobalOptions g;
    g.deterministic = true;
    for (const char* run : {"a", "b"}) {
        auto c = base;
        const fs::path root = work / "determinism" / run;
        fs::remove_all(root);
        fs::create_directories(root);
        c.paths.dataset = root / "dataset";
        c.paths.model = root / "model.ckp";
        c.paths.output = root / "report";
        commands::gen_data(c, g);
        (void)commands::train(c, g, {});
        reports.push_back(commands::evaluate(c, g, {}));
    }
    const fs::path a = work / "determinism" / "a", b = work / "determinism" / "b";
    const auto fa = files_under(a), fb = files_under(b);
    if (fa != fb) return {false, "artifact file lists differ"};
    std::size_t differing = 0;
    std::string first;
    for (const auto& rel : fa)
        if (io::read_bytes(a / rel) != io::read_bytes(b / rel)) {
            if (differing++ == 0) first = rel.string();
        }
    return {differing == 0, differing == 0 ? fmt("%zu artifacts byte-identical", fa.size())
                                           : fmt("%zu of %zu artifacts differ, first %s", differing, fa.size(),
                                                 first.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cldflood acceptance checks"};
    std::string work = "acceptance_work";
    std::string source = CLDFLOOD_SOURCE_DIR;
    std::vector<int> only;
    app.add_option("--work", work, "Scratch directory");
    app.add_option("--source", source, "Source tree (for configs/)");
    app.add_option("--only", only, "Criteria to run")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    const fs::path work_dir = fs::absolute(work);
    fs::create_directories(work_dir);
    const auto wanted = [&](int n) { return only.empty() || std::ranges::find(only, n) != only.end(); };

    int failures = 0;
    const auto report = [&](int n, const std::function<Outcome()>& fn) {
        if (!wanted(n)) return;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("criterion %2d %s  %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    };

    report(1, lake_at_rest);
    report(2, mass_conservation);
    report(3, dam_break);
    report(4, gradients);

    std::vector<metrics::MetricReport> det_reports;
    report(10, [&] { return determinism(source, work_dir, det_reports); });

    Desk desk;
    if (wanted(5) || wanted(6) || wanted(9)) {
        try {
            run_desk(desk, source, work_dir);
        } catch (const std::exception& e) {
            desk.error = e.what();
        }
    } else {
        desk.error = "not run";
    }
    report(5, [&] { return ablation(desk); });
    report(6, [&] {
        std::vector<const metrics::MetricReport*> extra;
        for (const auto& r : det_reports) extra.push_back(&r);
        return extent(desk, extra);
    });
    report(7, metric_oracles);
    report(8, [&] { return meshless(desk, source); });
    report(9, [&] { return speedup(desk); });

    if (desk.error.empty()) {
        const auto& c = desk.cldnet_train.curve;
        const auto& l = desk.ldnet_train.curve;
        if (!c.empty() && !l.empty())
            std::printf("info  epoch-1 loss CLDNet %.5g, LDNet %.5g (%s)\n", c[0].val_loss, l[0].val_loss,
                        c[0].val_loss < l[0].val_loss ? "CLDNet lower" : "CLDNet not lower");
        if (c.size() >= 200)
            std::printf("info  CLDNet loss epoch 1 %.5g, epoch 200 %.5g\n", c[0].train_loss, c[199].train_loss);
        if (l.size() >= 200)
            std::printf("info  LDNet loss epoch 1 %.5g, epoch 200 %.5g\n", l[0].train_loss, l[199].train_loss);
    }
    std::printf("%s\n", failures == 0 ? "all criteria passed" : fmt("%d criteria failed", failures).c_str());
    return failures == 0 ? 0 : 1;
}
