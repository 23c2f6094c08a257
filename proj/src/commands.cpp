#include "cldflood/commands.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "cldflood/error.hpp"
#include "cldflood/rng.hpp"

namespace cldflood::commands {

namespace {

constexpr double kMmPerHour = 1.0 / 3.6e6;  // m/s per mm/h

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("expected a boolean, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& v) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) out.push_back(io::parse_double(item, "list item"));
    return out;
}

double num(const std::string& v) {
    try {
        return io::parse_double(v, "value");
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
}

long long integer(const std::string& v) {
    try {
        return io::parse_int(v, "value");
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
}

int int_of(const std::string& v) {
    const long long x = integer(v);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        throw ConfigError("integer out of range: " + v);
    return static_cast<int>(x);
}

std::uint64_t seed_of(const std::string& v) {
    const long long x = integer(v);
    if (x < 0) throw ConfigError("seeds must be non-negative");
    return static_cast<std::uint64_t>(x);
}

using Setter = std::function<void(RunConfig&, const std::string&, const fs::path&)>;

fs::path resolve(const fs::path& base, const std::string& v) {
    const fs::path p(v);
    return p.is_absolute() ? p : base / p;
}

const std::map<std::string, Setter>& registry() {
    static const std::map<std::string, Setter> table = {
        {"dataset.nx", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.grid.nx = int_of(v); }},
        {"dataset.ny", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.grid.ny = int_of(v); }},
        {"dataset.dx", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.grid.dx = num(v); }},
        {"dataset.origin_x", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.grid.origin_x = num(v); }},
        {"dataset.origin_y", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.grid.origin_y = num(v); }},
        {"dataset.dem_style",
         [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.dem.style = terrain::parse_dem_style(v); }},
        {"dataset.dem_seed", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.dem_seed = seed_of(v); }},
        {"dataset.relief", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.dem.relief = num(v); }},
        {"dataset.base_elevation",
         [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.dem.base_elevation = num(v); }},
        {"dataset.plane_gradient",
         [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.dem.plane_gradient = num(v); }},
        {"dataset.manning", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.dem.manning = num(v); }},
        {"dataset.channel_manning",
         [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.dem.channel_manning = num(v); }},
        {"dataset.floodplain_width",
         [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.dem.floodplain_width = num(v); }},
        {"dataset.floodplain_roughness",
         [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.dem.floodplain_roughness = num(v); }},
        {"dataset.bed_file",
         [](RunConfig& c, const std::string& v, const fs::path& b) { c.dataset.bed_file = resolve(b, v); }},
        {"dataset.manning_file",
         [](RunConfig& c, const std::string& v, const fs::path& b) { c.dataset.manning_file = resolve(b, v); }},
        {"dataset.events", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.events = int_of(v); }},
        {"dataset.train", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.train = int_of(v); }},
        {"dataset.val", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.val = int_of(v); }},
        {"dataset.test", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.test = int_of(v); }},
        {"dataset.seed", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.seed = seed_of(v); }},
        {"dataset.horizon", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.horizon = num(v); }},
        {"dataset.dt_out", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.dt_out = num(v); }},
        {"dataset.dt_force", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.dt_force = num(v); }},
        {"dataset.intensity_lo_mmh",
         [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.intensity_lo = num(v); }},
        {"dataset.intensity_hi_mmh",
         [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.intensity_hi = num(v); }},
        {"dataset.max_pulses", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.max_pulses = int_of(v); }},
        {"dataset.rain",
         [](RunConfig& c, const std::string& v, const fs::path&) {
             if (v == "uniform") c.dataset.rain = RainMode::uniform;
             else if (v == "field") c.dataset.rain = RainMode::field;
             else throw ConfigError("dataset.rain must be 'uniform' or 'field'");
         }},
        {"dataset.field_nx", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.field_nx = int_of(v); }},
        {"dataset.field_ny", [](RunConfig& c, const std::string& v, const fs::path&) { c.dataset.field_ny = int_of(v); }},

        {"solver.g", [](RunConfig& c, const std::string& v, const fs::path&) { c.solver.g = num(v); }},
        {"solver.cfl", [](RunConfig& c, const std::string& v, const fs::path&) { c.solver.cfl = num(v); }},
        {"solver.h_min", [](RunConfig& c, const std::string& v, const fs::path&) { c.solver.h_min = num(v); }},
        {"solver.max_dt", [](RunConfig& c, const std::string& v, const fs::path&) { c.solver.max_dt = num(v); }},
        {"solver.min_dt", [](RunConfig& c, const std::string& v, const fs::path&) { c.solver.min_dt = num(v); }},
        {"solver.boundary",
         [](RunConfig& c, const std::string& v, const fs::path&) { c.solver.boundary = swe::parse_boundary(v); }},

        {"model.kind",
         [](RunConfig& c, const std::string& v, const fs::path&) {
             if (v == "cldnet") c.model.conditioned = true;
             else if (v == "ldnet") c.model.conditioned = false;
             else throw ConfigError("model.kind must be 'cldnet' or 'ldnet'");
         }},
        {"model.latent_dim", [](RunConfig& c, const std::string& v, const fs::path&) { c.model.latent_dim = int_of(v); }},
        {"model.fourier_m", [](RunConfig& c, const std::string& v, const fs::path&) { c.model.fourier_m = int_of(v); }},
        {"model.fourier_scale", [](RunConfig& c, const std::string& v, const fs::path&) { c.model.fourier_scale = num(v); }},
        {"model.dyn_depth", [](RunConfig& c, const std::string& v, const fs::path&) { c.model.dyn_depth = int_of(v); }},
        {"model.dyn_width", [](RunConfig& c, const std::string& v, const fs::path&) { c.model.dyn_width = int_of(v); }},
        {"model.rec_depth", [](RunConfig& c, const std::string& v, const fs::path&) { c.model.rec_depth = int_of(v); }},
        {"model.rec_width", [](RunConfig& c, const std::string& v, const fs::path&) { c.model.rec_width = int_of(v); }},
        {"model.latent_dt", [](RunConfig& c, const std::string& v, const fs::path&) { c.model.latent_dt = num(v); }},
        {"model.seed", [](RunConfig& c, const std::string& v, const fs::path&) { c.model.seed = seed_of(v); }},

        {"training.points",
         [](RunConfig& c, const std::string& v, const fs::path&) { c.training.points = static_cast<std::size_t>(int_of(v)); }},
        {"training.val_points",
         [](RunConfig& c, const std::string& v, const fs::path&) {
             c.training.val_points = static_cast<std::size_t>(int_of(v));
         }},
        {"training.epochs", [](RunConfig& c, const std::string& v, const fs::path&) { c.training.epochs = int_of(v); }},
        {"training.seed", [](RunConfig& c, const std::string& v, const fs::path&) { c.training.seed = seed_of(v); }},
        {"training.shards", [](RunConfig& c, const std::string& v, const fs::path&) { c.training.shards = int_of(v); }},
        {"training.wet_threshold",
         [](RunConfig& c, const std::string& v, const fs::path&) { c.training.wet_threshold = num(v); }},
        {"training.base_lr", [](RunConfig& c, const std::string& v, const fs::path&) { c.training.adam.base_lr = num(v); }},
        {"training.final_lr", [](RunConfig& c, const std::string& v, const fs::path&) { c.training.adam.final_lr = num(v); }},
        {"training.clip_norm",
         [](RunConfig& c, const std::string& v, const fs::path&) { c.training.adam.clip_norm = num(v); }},
        {"training.forcing_stats",
         [](RunConfig& c, const std::string& v, const fs::path&) {
             if (v == "global") c.per_component_forcing = false;
             else if (v == "per_component") c.per_component_forcing = true;
             else throw ConfigError("training.forcing_stats must be 'global' or 'per_component'");
         }},
        {"training.verbose", [](RunConfig& c, const std::string& v, const fs::path&) { c.training.verbose = parse_bool(v); }},

        {"evaluation.thresholds",
         [](RunConfig& c, const std::string& v, const fs::path&) { c.evaluation.thresholds = parse_list(v); }},
        {"evaluation.eval_set",
         [](RunConfig& c, const std::string& v, const fs::path&) {
             if (v == "wet_union") c.evaluation.eval_set = EvalSet::wet_union;
             else if (v == "domain") c.evaluation.eval_set = EvalSet::domain;
             else throw ConfigError("evaluation.eval_set must be 'wet_union' or 'domain'");
         }},
        {"evaluation.gauges",
         [](RunConfig& c, const std::string& v, const fs::path& b) { c.evaluation.gauges = resolve(b, v); }},
        {"evaluation.cross_sections",
         [](RunConfig& c, const std::string& v, const fs::path& b) { c.evaluation.cross_sections = resolve(b, v); }},

        {"bench.runs", [](RunConfig& c, const std::string& v, const fs::path&) { c.bench.runs = int_of(v); }},
        {"bench.event", [](RunConfig& c, const std::string& v, const fs::path&) { c.bench.event = int_of(v); }},

        {"paths.dataset", [](RunConfig& c, const std::string& v, const fs::path& b) { c.paths.dataset = resolve(b, v); }},
        {"paths.model", [](RunConfig& c, const std::string& v, const fs::path& b) { c.paths.model = resolve(b, v); }},
        {"paths.output", [](RunConfig& c, const std::string& v, const fs::path& b) { c.paths.output = resolve(b, v); }},
    };
    return table;
}

std::string event_name(int id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "event_%03d", id);
    return buf;
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(v[i]);
    }
    return out.empty() ? "-" : out;
}

std::vector<int> parse_ints(const std::string& s) {
    std::vector<int> out;
    if (s == "-") return out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(static_cast<int>(io::parse_int(tok, "event id")));
    return out;
}

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (auto b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void apply_threads(const GlobalOptions& g) {
    if (g.threads < 0) throw ConfigError("--threads must be non-negative");
    if (g.threads > 0) omp_set_num_threads(g.threads);
    if (g.deterministic) omp_set_dynamic(0);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void log(const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); }

forcing::ForcingSequence event_forcing(const forcing::Hyetograph& hyeto, const std::optional<forcing::RainField>& field,
                                       double dt_out, std::size_t snapshots) {
    return field ? forcing::snapshot_forcing(*field, dt_out, snapshots)
                 : forcing::snapshot_forcing(hyeto, dt_out, snapshots);
}

forcing::Extent extent_of(const terrain::RasterGrid& g) { return {g.min_x(), g.min_y(), g.max_x(), g.max_y()}; }

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

std::size_t DatasetConfig::snapshots() const {
    return static_cast<std::size_t>(std::llround(horizon / dt_out)) + 1;
}

RunConfig RunConfig::parse(std::string_view text, const fs::path& base_dir) {
    RunConfig c;
    bool max_dt_given = false;
    for (const io::ConfigEntry& e : io::parse_key_values(text)) {
        if (e.key == "solver.max_dt") max_dt_given = true;
        const auto it = registry().find(e.key);
        if (it == registry().end())
            throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
        try {
            it->second(c, e.value, base_dir);
        } catch (const ConfigError& err) {
            throw ConfigError("line " + std::to_string(e.line) + " (" + e.key + "): " + err.what());
        }
    }
    if (!max_dt_given) c.solver.max_dt = c.dataset.dt_out;
    c.model.forcing_dim = c.dataset.rain == RainMode::field ? c.dataset.field_nx * c.dataset.field_ny : 1;
    c.validate();
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    std::string text;
    try {
        text = io::read_text(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    try {
        return parse(text, path.parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void RunConfig::validate() const {
    const DatasetConfig& d = dataset;
    d.grid.validate();
    if (d.bed_file.has_value() != d.manning_file.has_value())
        throw ConfigError("dataset.bed_file and dataset.manning_file must be given together");
    if (d.events < 2 || d.events % 2 != 0) throw ConfigError("dataset.events must be even and at least 2");
    if (d.train < 1 || d.val < 0 || d.test < 0 || d.train + d.val + d.test != d.events)
        throw ConfigError("dataset.train + dataset.val + dataset.test must equal dataset.events (train >= 1)");
    if (!(d.dt_out > 0.0) || !(d.horizon > 0.0)) throw ConfigError("dataset.horizon and dataset.dt_out must be positive");
    const double ratio = d.horizon / d.dt_out;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
        throw ConfigError("dataset.horizon must be a multiple of dataset.dt_out");
    if (!(d.dt_force > 0.0)) throw ConfigError("dataset.dt_force must be positive");
    if (!(d.intensity_lo >= 0.0) || !(d.intensity_hi >= d.intensity_lo))
        throw ConfigError("dataset intensities must satisfy 0 <= lo <= hi");
    if (d.max_pulses < 1) throw ConfigError("dataset.max_pulses must be >= 1");
    if (d.rain == RainMode::field && (d.field_nx < 1 || d.field_ny < 1))
        throw ConfigError("dataset.field_nx and dataset.field_ny must be >= 1");
    if (!(solver.cfl > 0.0 && solver.cfl <= 1.0)) throw ConfigError("solver.cfl must be in (0, 1]");
    if (!(solver.h_min > 0.0)) throw ConfigError("solver.h_min must be positive");
    if (!(solver.g > 0.0)) throw ConfigError("solver.g must be positive");
    if (!(solver.min_dt > 0.0) || !(solver.max_dt >= solver.min_dt))
        throw ConfigError("solver.min_dt and solver.max_dt must satisfy 0 < min_dt <= max_dt");
    model.validate();
    training.validate();
    for (double t : evaluation.thresholds)
        if (!(t >= 0.0)) throw ConfigError("evaluation.thresholds must be non-negative");
    if (bench.runs < 1) throw ConfigError("bench.runs must be >= 1");
}

// ---------------------------------------------------------------------------
// Dataset

const Event& Dataset::event(int id) const {
    for (const Event& e : events)
        if (e.id == id) return e;
    throw ConfigError("no event " + std::to_string(id) + " in the dataset");
}

void split_events(int events, int train, int val, int test, std::uint64_t seed, std::vector<int>& out_train,
                  std::vector<int>& out_val, std::vector<int>& out_test) {
    if (train + val + test != events) throw ConfigError("split sizes do not add up to the event count");
    std::vector<int> ids(static_cast<std::size_t>(events));
    for (int i = 0; i < events; ++i) ids[static_cast<std::size_t>(i)] = i;
    Rng rng(seed);
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
    const auto take = [&](std::size_t from, int n) {
        std::vector<int> part(ids.begin() + static_cast<std::ptrdiff_t>(from),
                              ids.begin() + static_cast<std::ptrdiff_t>(from) + n);
        std::sort(part.begin(), part.end());
        return part;
    };
    out_train = take(0, train);
    out_val = take(static_cast<std::size_t>(train), val);
    out_test = take(static_cast<std::size_t>(train + val), test);
}

TerrainAndForcing build_inputs(const RunConfig& config) {
    const DatasetConfig& d = config.dataset;
    TerrainAndForcing out;
    if (d.bed_file) {
        out.terrain = io::read_terrain(*d.bed_file, *d.manning_file);
    } else {
        out.terrain = terrain::generate_dem(d.grid, d.dem_seed, d.dem);
    }
    forcing::PulseOptions pulses;
    pulses.intensity_lo = d.intensity_lo * kMmPerHour;
    pulses.intensity_hi = d.intensity_hi * kMmPerHour;
    pulses.max_pulses = d.max_pulses;
    out.hyetographs = forcing::synth_ensemble(d.events, d.horizon, d.dt_force, derive_seed(d.seed, 1), pulses);
    out.fields.resize(out.hyetographs.size());
    if (d.rain == RainMode::field) {
        const forcing::Extent ext = extent_of(out.terrain.grid);
        const int half = d.events / 2;
        for (int i = 0; i < d.events; ++i) {
            // A reversed event replays its original storm track backwards in
            // time, so it shares the original's spatial seed.
            const int source = i < half ? i : i - half;
            auto field = forcing::synth_rain_field(out.hyetographs[static_cast<std::size_t>(source)], d.field_nx,
                                                   d.field_ny, ext, derive_seed(d.seed, 100 + source));
            if (i >= half) std::reverse(field.frames.begin(), field.frames.end());
            out.fields[static_cast<std::size_t>(i)] = std::move(field);
        }
    }
    return out;
}

namespace {

io::FieldFile rain_field_to_fld1(const forcing::RainField& f) {
    io::FieldFile out;
    out.nx = static_cast<std::uint32_t>(f.nx_c);
    out.ny = static_cast<std::uint32_t>(f.ny_c);
    out.n_snapshots = static_cast<std::uint32_t>(f.frames.size());
    out.n_vars = 1;
    for (const auto& frame : f.frames) out.values.insert(out.values.end(), frame.begin(), frame.end());
    return out;
}

forcing::RainField rain_field_from_fld1(const io::FieldFile& f, double dt_force, const forcing::Extent& extent) {
    if (f.n_vars != 1) throw IoError("rain field FLD1 must have one variable");
    forcing::RainField out;
    out.nx_c = static_cast<int>(f.nx);
    out.ny_c = static_cast<int>(f.ny);
    out.dt_force = dt_force;
    out.extent = extent;
    for (std::size_t k = 0; k < f.n_snapshots; ++k)
        out.frames.emplace_back(f.values.begin() + static_cast<std::ptrdiff_t>(k * f.cells()),
                                f.values.begin() + static_cast<std::ptrdiff_t>((k + 1) * f.cells()));
    out.validate();
    return out;
}

swe::Trajectory run_event(const terrain::TerrainField& terrain, const forcing::Hyetograph& hyeto,
                          const std::optional<forcing::RainField>& field, const swe::SolverConfig& solver,
                          double horizon, double dt_out, swe::SimulationStats* stats) {
    if (field) {
        forcing::FieldRain rain(*field, terrain.grid);
        return swe::simulate(terrain, &rain, solver, horizon, dt_out, nullptr, stats);
    }
    forcing::UniformRain rain(hyeto, terrain.grid.cell_count());
    return swe::simulate(terrain, &rain, solver, horizon, dt_out, nullptr, stats);
}

}  // namespace

void gen_data(const RunConfig& config, const GlobalOptions& global) {
    apply_threads(global);
    RunConfig c = config;
    if (global.seed) c.dataset.seed = *global.seed;
    const DatasetConfig& d = c.dataset;
    const fs::path dir = c.paths.dataset;
    const auto t0 = std::chrono::steady_clock::now();

    TerrainAndForcing inputs = build_inputs(c);
    const terrain::TerrainField& terrain = inputs.terrain;
    std::vector<int> train, val, test;
    split_events(d.events, d.train, d.val, d.test, derive_seed(d.seed, 2), train, val, test);

    fs::create_directories(dir / "forcing");
    fs::create_directories(dir / "trajectories");
    io::write_terrain(dir / "terrain_bed.asc", dir / "terrain_manning.asc", terrain);

    std::string manifest;
    const auto kv = [&](const std::string& k, const std::string& v) { manifest += k + " = " + v + "\n"; };
    manifest += "# dataset manifest written by gen-data\n";
    kv("dataset.format", "1");
    kv("grid.nx", std::to_string(terrain.grid.nx));
    kv("grid.ny", std::to_string(terrain.grid.ny));
    kv("grid.dx", io::format_double(terrain.grid.dx));
    kv("grid.origin_x", io::format_double(terrain.grid.origin_x));
    kv("grid.origin_y", io::format_double(terrain.grid.origin_y));
    kv("terrain.source", d.bed_file ? "file" : "generated");
    kv("terrain.dem_style", std::string(terrain::to_string(d.dem.style)));
    kv("terrain.dem_seed", std::to_string(d.dem_seed));
    kv("terrain.mean_slope", io::format_double(terrain::mean_slope(terrain)));
    kv("terrain.active_cells", std::to_string(terrain.active_count()));
    kv("seeds.base", std::to_string(d.seed));
    kv("seeds.ensemble", std::to_string(derive_seed(d.seed, 1)));
    kv("seeds.split", std::to_string(derive_seed(d.seed, 2)));
    kv("time.horizon", io::format_double(d.horizon));
    kv("time.dt_out", io::format_double(d.dt_out));
    kv("time.dt_force", io::format_double(d.dt_force));
    kv("time.snapshots", std::to_string(d.snapshots()));
    kv("rain.mode", d.rain == RainMode::field ? "field" : "uniform");
    kv("rain.field_nx", std::to_string(d.field_nx));
    kv("rain.field_ny", std::to_string(d.field_ny));
    kv("events.count", std::to_string(d.events));
    kv("split.train", join_ints(train));
    kv("split.val", join_ints(val));
    kv("split.test", join_ints(test));

    const int half = d.events / 2;
    for (int i = 0; i < d.events; ++i) {
        const auto& hyeto = inputs.hyetographs[static_cast<std::size_t>(i)];
        const auto& field = inputs.fields[static_cast<std::size_t>(i)];
        const std::string name = event_name(i);
        const fs::path forcing_rel = fs::path("forcing") / (name + ".csv");
        io::write_text(dir / forcing_rel, io::format_hyetograph(hyeto));
        if (field) io::write_fld1(dir / "forcing" / (name + "_field.fld1"), rain_field_to_fld1(*field));

        swe::SimulationStats stats;
        swe::Trajectory traj;
        try {
            traj = run_event(terrain, hyeto, field, c.solver, d.horizon, d.dt_out, &stats);
        } catch (const NumericError& e) {
            throw NumericError("event " + std::to_string(i) + ": " + e.what());
        }
        const auto bytes = io::encode_fld1(io::trajectory_to_fld1(traj, terrain.mask));
        const fs::path traj_rel = fs::path("trajectories") / (name + ".fld1");
        io::write_bytes(dir / traj_rel, bytes);

        const std::string p = "event." + std::to_string(i) + ".";
        kv(p + "reverse_of", std::to_string(i < half ? -1 : i - half));
        kv(p + "forcing", forcing_rel.generic_string());
        kv(p + "trajectory", traj_rel.generic_string());
        kv(p + "fnv1a", hex(fnv1a(bytes)));
        kv(p + "rain_volume", io::format_double(stats.rain_volume));
        kv(p + "outflow_volume", io::format_double(stats.outflow_volume));
        if (!global.deterministic) kv(p + "steps", std::to_string(stats.steps));
        log("gen-data: " + name + " simulated, " + std::to_string(stats.steps) + " steps");
    }
    io::write_text(dir / "manifest.txt", manifest);
    log("gen-data: wrote " + std::to_string(d.events) + " events to " + dir.string() + " in " +
        io::format_double(std::round(seconds_since(t0) * 10) / 10) + " s");
}

Dataset load_dataset(const fs::path& dir, bool with_trajectories) {
    std::map<std::string, std::string> m;
    try {
        for (auto& e : io::parse_key_values(io::read_text(dir / "manifest.txt"))) m[e.key] = e.value;
    } catch (const ConfigError& e) {
        throw IoError((dir / "manifest.txt").string() + ": " + e.what());
    }
    const auto get = [&](const std::string& k) {
        auto it = m.find(k);
        if (it == m.end()) throw IoError("dataset manifest: missing '" + k + "'");
        return it->second;
    };
    if (get("dataset.format") != "1") throw IoError("dataset manifest: unsupported format");
    Dataset ds;
    ds.terrain = io::read_terrain(dir / "terrain_bed.asc", dir / "terrain_manning.asc");
    ds.features = terrain::compute_features(ds.terrain);
    ds.dt_out = io::parse_double(get("time.dt_out"), "time.dt_out");
    const double dt_force = io::parse_double(get("time.dt_force"), "time.dt_force");
    const auto snapshots = static_cast<std::size_t>(io::parse_int(get("time.snapshots"), "time.snapshots"));
    const bool field_mode = get("rain.mode") == "field";
    const int count = static_cast<int>(io::parse_int(get("events.count"), "events.count"));
    ds.train = parse_ints(get("split.train"));
    ds.val = parse_ints(get("split.val"));
    ds.test = parse_ints(get("split.test"));
    for (int i = 0; i < count; ++i) {
        const std::string p = "event." + std::to_string(i) + ".";
        Event e;
        e.id = i;
        e.reverse_of = static_cast<int>(io::parse_int(get(p + "reverse_of"), "reverse_of"));
        e.hyetograph = io::parse_hyetograph(io::read_csv(dir / get(p + "forcing")));
        if (std::abs(e.hyetograph.dt_force - dt_force) > 1e-9 * dt_force)
            throw IoError("event " + std::to_string(i) + ": forcing interval differs from the manifest");
        if (field_mode)
            e.field = rain_field_from_fld1(io::read_fld1(dir / "forcing" / (event_name(i) + "_field.fld1")), dt_force,
                                           extent_of(ds.terrain.grid));
        e.forcing = event_forcing(e.hyetograph, e.field, ds.dt_out, snapshots);
        if (with_trajectories) {
            e.trajectory = io::trajectory_from_fld1(io::read_fld1(dir / get(p + "trajectory")), ds.terrain.grid, ds.dt_out);
            if (e.trajectory.size() != snapshots)
                throw IoError("event " + std::to_string(i) + ": snapshot count differs from the manifest");
        }
        ds.events.push_back(std::move(e));
    }
    for (const auto* split : {&ds.train, &ds.val, &ds.test})
        for (int id : *split)
            if (id < 0 || id >= count) throw IoError("dataset manifest: split refers to a missing event");
    return ds;
}

// ---------------------------------------------------------------------------
// simulate

void simulate(const RunConfig& config, const GlobalOptions& global, const SimulateOptions& options) {
    apply_threads(global);
    if (options.event.has_value() == options.hyetograph.has_value())
        throw ConfigError("simulate needs exactly one of --event or --hyetograph");
    const DatasetConfig& d = config.dataset;
    terrain::TerrainField terrain;
    forcing::Hyetograph hyeto;
    std::optional<forcing::RainField> field;
    if (options.event) {
        Dataset ds = load_dataset(config.paths.dataset, false);
        const Event& e = ds.event(*options.event);
        terrain = ds.terrain;
        hyeto = e.hyetograph;
        field = e.field;
    } else {
        terrain = build_inputs(config).terrain;
        hyeto = io::parse_hyetograph(io::read_csv(*options.hyetograph));
    }
    swe::SimulationStats stats;
    const auto t0 = std::chrono::steady_clock::now();
    const swe::Trajectory traj = run_event(terrain, hyeto, field, config.solver, d.horizon, d.dt_out, &stats);
    const double secs = seconds_since(t0);
    io::write_fld1(options.output, io::trajectory_to_fld1(traj, terrain.mask));
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "simulate: %zu snapshots, %llu steps, rain %.6g m3, outflow %.6g m3, clipped %.3g m3, %.2f s",
                  traj.size(), static_cast<unsigned long long>(stats.steps), stats.rain_volume, stats.outflow_volume,
                  stats.clipped_volume, secs);
    log(buf);
}

// ---------------------------------------------------------------------------
// train

training::TrainResult train(const RunConfig& config, const GlobalOptions& global, const TrainOptions& options) {
    apply_threads(global);
    RunConfig c = config;
    if (options.kind) {
        if (*options.kind == "cldnet") c.model.conditioned = true;
        else if (*options.kind == "ldnet") c.model.conditioned = false;
        else throw ConfigError("--kind must be 'cldnet' or 'ldnet'");
    }
    if (options.epochs) c.training.epochs = *options.epochs;
    if (global.seed) {
        c.training.seed = *global.seed;
        c.model.seed = derive_seed(*global.seed, 7);
    }
    if (!global.deterministic) c.training.shards = std::max(1, omp_get_max_threads());
    c.validate();

    const Dataset ds = load_dataset(c.paths.dataset);
    std::vector<training::Example> train_ex, val_ex;
    std::vector<forcing::ForcingSequence> train_forcing;
    std::vector<const swe::Trajectory*> train_traj;
    for (int id : ds.train) {
        const Event& e = ds.event(id);
        train_ex.push_back({&e.trajectory, e.forcing});
        train_forcing.push_back(e.forcing);
        train_traj.push_back(&e.trajectory);
    }
    for (int id : ds.val) {
        const Event& e = ds.event(id);
        val_ex.push_back({&e.trajectory, e.forcing});
    }
    c.model.forcing_dim = static_cast<int>(train_forcing.front().dim);
    const training::WetUnionMask mask = training::build_wet_union(train_traj, ds.terrain, c.training.wet_threshold);
    cldnet::Model model(c.model, cldnet::CoordinateBox::of(ds.terrain.grid),
                        forcing::ForcingStats::fit(train_forcing, c.per_component_forcing));

    log("train: " + std::string(model.kind()) + ", " + std::to_string(train_ex.size()) + " training events, wet union " +
        std::to_string(mask.population()) + " cells, " + std::to_string(c.training.epochs) + " epochs");
    const auto t0 = std::chrono::steady_clock::now();
    training::TrainResult result = training::train(
        model, train_ex, val_ex, ds.terrain, ds.features, mask, c.training, [&](const training::EpochRecord& r) {
            if (c.training.verbose || r.epoch == 1 || r.epoch % 25 == 0 || r.epoch == c.training.epochs) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "train: epoch %d loss %.6g val %.6g", r.epoch, r.train_loss, r.val_loss);
                log(buf);
            }
        });
    if (result.diverged) throw NumericError("training diverged (non-finite loss)");

    io::Checkpoint ckp;
    ckp.model = model;
    ckp.optimizer = result.optimizer;
    ckp.train_seed = c.training.seed;
    ckp.epochs_done = c.training.epochs;
    ckp.best_epoch = result.best_epoch;
    ckp.dt_out = ds.dt_out;
    ckp.grid = ds.terrain.grid;
    ckp.wet_union = mask;
    const fs::path out = options.output.value_or(c.paths.model);
    io::write_checkpoint(out, ckp);
    fs::path curve = out;
    curve.replace_extension(".loss.csv");
    io::write_text(curve, io::format_loss_curve(result.curve));
    char buf[200];
    std::snprintf(buf, sizeof buf, "train: best epoch %d, val loss %.6g", result.best_epoch, result.best_val_loss);
    log(buf);
    if (!global.deterministic) log("train: " + io::format_double(std::round(seconds_since(t0) * 10) / 10) + " s");
    return result;
}

// ---------------------------------------------------------------------------
// predict

void predict(const RunConfig& config, const GlobalOptions& global, const PredictOptions& options) {
    apply_threads(global);
    if (options.full_grid == options.points.has_value())
        throw ConfigError("predict needs exactly one of --points or --full-grid");
    if (options.event.has_value() == options.hyetograph.has_value())
        throw ConfigError("predict needs exactly one of --event or --hyetograph");
    const io::Checkpoint ckp = io::read_checkpoint(options.model.value_or(config.paths.model));
    const cldnet::Model& model = ckp.model;
    Dataset ds = load_dataset(config.paths.dataset, false);
    if (!(ds.terrain.grid == ckp.grid)) throw ConfigError("the model was trained on a different grid");

    forcing::ForcingSequence raw;
    const std::size_t snapshots = config.dataset.snapshots();
    if (options.event) {
        raw = ds.event(*options.event).forcing;
    } else {
        if (model.config().forcing_dim != 1)
            throw ConfigError("--hyetograph needs a model trained on spatially uniform rain");
        raw = forcing::snapshot_forcing(io::parse_hyetograph(io::read_csv(*options.hyetograph)), ckp.dt_out,
                                        snapshots);
    }
    const terrain::TerrainFeatures* feat = model.conditioned() ? &ds.features : nullptr;
    if (options.points) {
        const auto pts = io::parse_points(io::read_csv(*options.points));
        std::vector<double> x, y;
        for (const auto& p : pts) {
            x.push_back(p.x);
            y.push_back(p.y);
        }
        const cldnet::QuerySet q = cldnet::make_queries(model, feat, x, y);
        const FieldStack pred = cldnet::predict_field(model, raw, q);
        io::write_text(options.output, io::format_prediction(pred, x, y, ckp.dt_out));
        log("predict: " + std::to_string(pts.size()) + " points, " + std::to_string(pred.steps) + " snapshots");
        return;
    }
    const auto& grid = ds.terrain.grid;
    const cldnet::QuerySet q = cldnet::grid_queries(model, feat, grid, ds.terrain.mask);
    const FieldStack pred = cldnet::predict_field(model, raw, q);
    io::FieldFile f;
    f.nx = static_cast<std::uint32_t>(grid.nx);
    f.ny = static_cast<std::uint32_t>(grid.ny);
    f.n_snapshots = static_cast<std::uint32_t>(pred.steps);
    f.n_vars = 3;
    const std::size_t n = grid.cell_count();
    f.values.assign(pred.steps * 3 * n, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::size_t> cells;
    for (std::size_t cidx = 0; cidx < n; ++cidx)
        if (ds.terrain.mask[cidx]) cells.push_back(cidx);
    for (std::size_t k = 0; k < pred.steps; ++k)
        for (int v = 0; v < 3; ++v)
            for (std::size_t p = 0; p < cells.size(); ++p)
                f.values[(k * 3 + static_cast<std::size_t>(v)) * n + cells[p]] = pred.at(k, v, p);
    if (cells.size() != n) f.mask = ds.terrain.mask;
    io::write_fld1(options.output, f);
    log("predict: full grid, " + std::to_string(cells.size()) + " cells, " + std::to_string(pred.steps) + " snapshots");
}

// ---------------------------------------------------------------------------
// evaluate

namespace {

std::vector<std::size_t> eval_cells(const EvalConfig& eval, const training::WetUnionMask& wet,
                                    const terrain::TerrainField& terrain) {
    if (eval.eval_set == EvalSet::wet_union) return wet.cells;
    std::vector<std::size_t> cells;
    for (std::size_t c = 0; c < terrain.mask.size(); ++c)
        if (terrain.mask[c]) cells.push_back(c);
    return cells;
}

std::size_t nearest_cell(const terrain::RasterGrid& g, double x, double y) {
    if (x < g.min_x() || x > g.max_x() || y < g.min_y() || y > g.max_y())
        throw DomainError("gauge point outside the raster");
    const int i = std::clamp(static_cast<int>(std::floor((x - g.min_x()) / g.dx)), 0, g.nx - 1);
    const int j = std::clamp(static_cast<int>(std::floor((y - g.min_y()) / g.dx)), 0, g.ny - 1);
    return g.index(i, j);
}

}  // namespace

metrics::MetricReport evaluate_fields(const FieldStack& pred, const FieldStack& ref, const EvalConfig& eval) {
    metrics::MetricReport report;
    report.model_kind = "fields";
    report.trajectories = 1;
    report.eval_points = ref.points;
    report.rrmse = metrics::rrmse(pred, ref);
    for (double tau : eval.thresholds) report.extents.push_back(metrics::extent_metrics(pred, ref, tau));
    return report;
}

metrics::MetricReport evaluate_model(const io::Checkpoint& ckp, const Dataset& data, const EvalConfig& eval) {
    const cldnet::Model& model = ckp.model;
    if (!(data.terrain.grid == ckp.grid)) throw ConfigError("the model was trained on a different grid");
    if (data.test.empty()) throw ConfigError("the dataset has no test events");
    const std::vector<std::size_t> cells = eval_cells(eval, ckp.wet_union, data.terrain);
    if (cells.empty()) throw DomainError("empty evaluation set");
    std::vector<std::uint8_t> mask(data.terrain.grid.cell_count(), 0);
    for (std::size_t c : cells) mask[c] = 1;
    const terrain::TerrainFeatures* feat = model.conditioned() ? &data.features : nullptr;
    const cldnet::QuerySet q = cldnet::grid_queries(model, feat, data.terrain.grid, mask);

    struct GaugeAcc {
        std::string name;
        double x, y;
        std::size_t cell;
        metrics::SeriesAccumulator acc;
    };
    std::vector<GaugeAcc> gauges;
    cldnet::QuerySet gq;
    if (eval.gauges) {
        std::vector<double> gx, gy;
        for (const auto& p : io::parse_points(io::read_csv(*eval.gauges))) {
            gauges.push_back({p.name, p.x, p.y, nearest_cell(data.terrain.grid, p.x, p.y), {}});
            gx.push_back(p.x);
            gy.push_back(p.y);
        }
        gq = cldnet::make_queries(model, feat, gx, gy);
    }
    std::vector<io::CrossSection> sections;
    if (eval.cross_sections) sections = io::parse_cross_sections(io::read_csv(*eval.cross_sections), data.terrain.grid);
    struct SectionAcc {
        std::vector<double> pred_wse, ref_wse, pred_h, ref_h;
    };
    std::vector<SectionAcc> section_acc(sections.size());
    std::vector<std::uint8_t> all_active = data.terrain.mask;
    const cldnet::QuerySet full = sections.empty() ? cldnet::QuerySet{}
                                                   : cldnet::grid_queries(model, feat, data.terrain.grid, all_active);
    std::vector<std::size_t> active_cells;
    for (std::size_t c = 0; c < all_active.size(); ++c)
        if (all_active[c]) active_cells.push_back(c);

    metrics::RrmseAccumulator rr;
    std::vector<metrics::ExtentAccumulator> extents;
    for (double tau : eval.thresholds) extents.emplace_back(tau);
    const auto t0 = std::chrono::steady_clock::now();
    for (int id : data.test) {
        const Event& e = data.event(id);
        const FieldStack pred = cldnet::predict_field(model, e.forcing, q);
        const FieldStack ref = metrics::restrict_to_cells(e.trajectory, cells);
        rr.add(pred, ref);
        for (auto& ex : extents) ex.add(pred, ref);
        if (!gauges.empty()) {
            const FieldStack gp = cldnet::predict_field(model, e.forcing, gq);
            for (std::size_t g = 0; g < gauges.size(); ++g)
                for (std::size_t k = 0; k < gp.steps; ++k)
                    gauges[g].acc.add(gp.at(k, 0, g), e.trajectory.snapshots[k].h[gauges[g].cell]);
        }
        if (!sections.empty()) {
            const FieldStack fp = cldnet::predict_field(model, e.forcing, full);
            std::vector<double> depth(data.terrain.grid.cell_count(), 0.0);
            for (std::size_t k = 0; k < fp.steps; ++k) {
                for (std::size_t p = 0; p < active_cells.size(); ++p) depth[active_cells[p]] = fp.at(k, 0, p);
                for (std::size_t s = 0; s < sections.size(); ++s) {
                    const auto& cs = sections[s].cells;
                    const auto& refh = e.trajectory.snapshots[k].h;
                    section_acc[s].pred_wse.push_back(metrics::wse_from_cross_section(depth, data.terrain, cs));
                    section_acc[s].ref_wse.push_back(metrics::wse_from_cross_section(refh, data.terrain, cs));
                    double hp = 0.0, hr = 0.0;
                    for (std::size_t c : cs) {
                        hp = std::max(hp, depth[c]);
                        hr = std::max(hr, refh[c]);
                    }
                    section_acc[s].pred_h.push_back(hp);
                    section_acc[s].ref_h.push_back(hr);
                }
            }
        }
    }
    metrics::MetricReport report;
    report.model_kind = std::string(model.kind());
    report.trajectories = data.test.size();
    report.eval_points = cells.size();
    report.rrmse = rr.result();
    for (const auto& ex : extents) report.extents.push_back(ex.result());
    for (const auto& g : gauges) report.gauges.push_back({g.name, g.x, g.y, g.acc.nse(), g.acc.kge(), g.acc.peak_rel_err()});
    for (std::size_t s = 0; s < sections.size(); ++s) {
        // WSE series are compared after mean recentering over the common
        // window; KGE and peak error use the section's maximum depth.
        const SectionAcc& a = section_acc[s];
        metrics::GaugeSeries sim, obs;
        for (std::size_t k = 0; k < a.pred_wse.size(); ++k) {
            sim.times.push_back(static_cast<double>(k));
            obs.times.push_back(static_cast<double>(k));
        }
        sim.values = a.pred_wse;
        obs.values = a.ref_wse;
        const metrics::GaugeSeries shifted = metrics::recenter_wse(sim, obs);
        report.gauges.push_back({"xs:" + sections[s].name, 0.0, 0.0, metrics::nse(shifted.values, obs.values),
                                 metrics::kge(a.pred_h, a.ref_h), metrics::peak_rel_err(a.pred_h, a.ref_h)});
    }
    report.runtime_seconds = seconds_since(t0);
    return report;
}

metrics::MetricReport evaluate(const RunConfig& config, const GlobalOptions& global, const EvaluateOptions& options) {
    apply_threads(global);
    metrics::MetricReport report;
    if (options.prediction || options.reference) {
        if (!options.prediction || !options.reference)
            throw ConfigError("--prediction and --reference must be given together");
        const io::FieldFile p = io::read_fld1(*options.prediction);
        const io::FieldFile r = io::read_fld1(*options.reference);
        if (p.nx != r.nx || p.ny != r.ny || p.n_snapshots != r.n_snapshots || p.n_vars != 3 || r.n_vars != 3)
            throw ConfigError("prediction and reference files have different shapes");
        std::vector<std::size_t> cells;
        for (std::size_t c = 0; c < r.cells(); ++c) {
            const bool pm = p.mask.empty() || p.mask[c];
            const bool rm = r.mask.empty() || r.mask[c];
            if (pm && rm) cells.push_back(c);
        }
        const auto stack = [&](const io::FieldFile& f) {
            FieldStack s(f.n_snapshots, cells.size());
            for (std::size_t k = 0; k < f.n_snapshots; ++k)
                for (int v = 0; v < 3; ++v)
                    for (std::size_t i = 0; i < cells.size(); ++i)
                        s.at(k, v, i) = f.values[(k * 3 + static_cast<std::size_t>(v)) * f.cells() + cells[i]];
            return s;
        };
        const auto t0 = std::chrono::steady_clock::now();
        report = evaluate_fields(stack(p), stack(r), config.evaluation);
        report.runtime_seconds = seconds_since(t0);
    } else {
        const io::Checkpoint ckp = io::read_checkpoint(options.model.value_or(config.paths.model));
        const Dataset ds = load_dataset(config.paths.dataset);
        report = evaluate_model(ckp, ds, config.evaluation);
    }
    report.include_runtime = !global.deterministic;
    const fs::path out = options.output.value_or(config.paths.output);
    io::write_text(out / "report.txt", metrics::format_text(report));
    io::write_text(out / "report.kv", metrics::format_key_values(report));
    std::string curve = "step";
    for (const auto& e : report.extents) curve += ",csi_" + io::format_double(e.tau);
    curve += "\n";
    const std::size_t steps = report.extents.empty() ? 0 : report.extents.front().csi_per_step.size();
    for (std::size_t k = 0; k < steps; ++k) {
        curve += std::to_string(k);
        for (const auto& e : report.extents)
            curve += "," + (e.csi_per_step[k] ? io::format_double(*e.csi_per_step[k]) : std::string("undefined"));
        curve += "\n";
    }
    io::write_text(out / "csi_per_step.csv", curve);
    log("evaluate: rRMSE " + (report.rrmse.pooled ? io::format_double(*report.rrmse.pooled) : "undefined") +
        " %, report in " + out.string());
    return report;
}

// ---------------------------------------------------------------------------
// bench

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string BenchReport::format() const {
    std::string out;
    char buf[200];
    std::snprintf(buf, sizeof buf, "cells = %zu\nsnapshots = %zu\nruns = %zu\n", cells, snapshots,
                  solver_seconds.size());
    out += buf;
    std::snprintf(buf, sizeof buf, "solver_seconds_median = %.6g\nsurrogate_seconds_median = %.6g\nspeedup = %.6g\n",
                  solver_median, surrogate_median, ratio);
    out += buf;
    std::snprintf(buf, sizeof buf, "solver_cell_updates_per_second = %.6g\n", cell_updates_per_second);
    out += buf;
    out += "solver_seconds =";
    for (double s : solver_seconds) out += " " + io::format_double(s);
    out += "\nsurrogate_seconds =";
    for (double s : surrogate_seconds) out += " " + io::format_double(s);
    out += "\n";
    return out;
}

BenchReport bench(const RunConfig& config, const GlobalOptions& global, const BenchOptions& options) {
    apply_threads(global);
    const int runs = options.runs.value_or(config.bench.runs);
    if (runs < 1) throw ConfigError("--runs must be >= 1");
    const io::Checkpoint ckp = io::read_checkpoint(options.model.value_or(config.paths.model));
    const Dataset ds = load_dataset(config.paths.dataset, false);
    if (!(ds.terrain.grid == ckp.grid)) throw ConfigError("the model was trained on a different grid");
    int id = config.bench.event;
    if (id < 0) {
        if (ds.test.empty()) throw ConfigError("bench needs a test event or bench.event");
        id = ds.test.front();
    }
    const Event& e = ds.event(id);
    const cldnet::Model& model = ckp.model;
    const terrain::TerrainFeatures* feat = model.conditioned() ? &ds.features : nullptr;
    const double horizon = static_cast<double>(e.forcing.steps() - 1) * ds.dt_out;

    BenchReport rep;
    rep.cells = ds.terrain.active_count();
    rep.snapshots = e.forcing.steps();
    std::uint64_t updates = 0;
    for (int r = 0; r < runs; ++r) {
        swe::SimulationStats stats;
        const auto t0 = std::chrono::steady_clock::now();
        const auto traj = run_event(ds.terrain, e.hyetograph, e.field, config.solver, horizon, ds.dt_out, &stats);
        rep.solver_seconds.push_back(seconds_since(t0));
        updates = stats.cell_updates;
    }
    for (int r = 0; r < runs; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const cldnet::QuerySet q = cldnet::grid_queries(model, feat, ds.terrain.grid, ds.terrain.mask);
        const FieldStack pred = cldnet::predict_field(model, e.forcing, q);
        rep.surrogate_seconds.push_back(seconds_since(t0));
        if (pred.steps != rep.snapshots) throw ContractError("bench: prediction length mismatch");
    }
    rep.solver_median = median(rep.solver_seconds);
    rep.surrogate_median = median(rep.surrogate_seconds);
    rep.ratio = rep.solver_median / rep.surrogate_median;
    rep.cell_updates_per_second = static_cast<double>(updates) / rep.solver_median;
    const fs::path out = options.output.value_or(config.paths.output);
    io::write_text(out / "bench.txt", rep.format());
    char buf[200];
    std::snprintf(buf, sizeof buf, "bench: solver %.4g s, surrogate %.4g s, speedup %.1fx", rep.solver_median,
                  rep.surrogate_median, rep.ratio);
    log(buf);
    return rep;
}

}  // namespace cldflood::commands
