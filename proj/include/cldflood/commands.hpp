#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cldflood/cldnet.hpp"
#include "cldflood/forcing.hpp"
#include "cldflood/io.hpp"
#include "cldflood/metrics.hpp"
#include "cldflood/swe.hpp"
#include "cldflood/terrain.hpp"
#include "cldflood/training.hpp"

namespace cldflood::commands {

namespace fs = std::filesystem;

enum class RainMode { uniform, field };
enum class EvalSet { wet_union, domain };

struct DatasetConfig {
    terrain::RasterGrid grid{64, 64, 100.0, 0.0, 0.0};
    terrain::DemOptions dem;
    std::uint64_t dem_seed = 3;
    // Optional ESRI ASCII rasters used instead of the generator.
    std::optional<fs::path> bed_file;
    std::optional<fs::path> manning_file;

    int events = 36;
    int train = 30;
    int val = 0;
    int test = 6;
    std::uint64_t seed = 1;
    double horizon = 23 * 3600.0;
    double dt_out = 3600.0;
    double dt_force = 1800.0;
    double intensity_lo = 40.0;   // mm/h
    double intensity_hi = 120.0;  // mm/h
    int max_pulses = 3;
    RainMode rain = RainMode::uniform;
    int field_nx = 4;
    int field_ny = 4;

    [[nodiscard]] std::size_t snapshots() const;
};

struct EvalConfig {
    std::vector<double> thresholds{0.1, 0.5};
    EvalSet eval_set = EvalSet::wet_union;
    std::optional<fs::path> gauges;          // points CSV (name, x, y)
    std::optional<fs::path> cross_sections;  // name, i, j
};

struct BenchConfig {
    int runs = 5;
    int event = -1;  // -1: first test event
};

struct Paths {
    fs::path dataset = "dataset";
    fs::path model = "model.ckp";
    fs::path output = "out";
};

struct RunConfig {
    DatasetConfig dataset;
    swe::SolverConfig solver;
    cldnet::ModelConfig model;
    training::TrainConfig training;
    bool per_component_forcing = false;
    EvalConfig evaluation;
    BenchConfig bench;
    Paths paths;

    /// Relative paths in the text are resolved against `base_dir`. Throws
    /// ConfigError on unknown keys, bad values or failed validation.
    static RunConfig parse(std::string_view text, const fs::path& base_dir);
    static RunConfig load(const fs::path& path);
    void validate() const;
};

/// Settings shared by every command.
struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    bool deterministic = false;
    int threads = 0;  // 0: leave the OpenMP default
};

// ---------------------------------------------------------------------------
// Dataset directory

struct Event {
    int id = 0;
    std::uint64_t seed = 0;
    int reverse_of = -1;
    forcing::Hyetograph hyetograph;
    std::optional<forcing::RainField> field;
    forcing::ForcingSequence forcing;  // raw snapshot forcing
    swe::Trajectory trajectory;
};

struct Dataset {
    terrain::TerrainField terrain;
    terrain::TerrainFeatures features;
    double dt_out = 0.0;
    std::vector<Event> events;
    std::vector<int> train, val, test;

    [[nodiscard]] const Event& event(int id) const;
};

/// Reads a dataset written by gen_data. With `with_trajectories` false only
/// terrain and forcing are loaded.
Dataset load_dataset(const fs::path& dir, bool with_trajectories = true);

struct TerrainAndForcing {
    terrain::TerrainField terrain;
    std::vector<forcing::Hyetograph> hyetographs;
    std::vector<std::optional<forcing::RainField>> fields;
};

/// Deterministic inputs of the dataset for a configuration.
TerrainAndForcing build_inputs(const RunConfig& config);

/// Seeded permutation of event ids into train/val/test.
void split_events(int events, int train, int val, int test, std::uint64_t seed, std::vector<int>& out_train,
                  std::vector<int>& out_val, std::vector<int>& out_test);

// ---------------------------------------------------------------------------
// Commands. Each returns normally or throws a cldflood error.

void gen_data(const RunConfig& config, const GlobalOptions& global);

struct SimulateOptions {
    std::optional<int> event;
    std::optional<fs::path> hyetograph;
    fs::path output;
};
void simulate(const RunConfig& config, const GlobalOptions& global, const SimulateOptions& options);

struct TrainOptions {
    std::optional<std::string> kind;   // cldnet | ldnet
    std::optional<fs::path> output;    // checkpoint path
    std::optional<int> epochs;
};
training::TrainResult train(const RunConfig& config, const GlobalOptions& global, const TrainOptions& options);

struct PredictOptions {
    std::optional<fs::path> model;
    std::optional<int> event;
    std::optional<fs::path> hyetograph;
    std::optional<fs::path> points;
    bool full_grid = false;
    fs::path output;
};
void predict(const RunConfig& config, const GlobalOptions& global, const PredictOptions& options);

struct EvaluateOptions {
    std::optional<fs::path> model;
    std::optional<fs::path> prediction;  // FLD1, compared with `reference`
    std::optional<fs::path> reference;
    std::optional<fs::path> output;      // directory
};
metrics::MetricReport evaluate(const RunConfig& config, const GlobalOptions& global, const EvaluateOptions& options);

/// Surrogate evaluation of a checkpoint on the test split of a dataset.
metrics::MetricReport evaluate_model(const io::Checkpoint& ckp, const Dataset& data, const EvalConfig& eval);

/// Report comparing two field stacks directly.
metrics::MetricReport evaluate_fields(const FieldStack& pred, const FieldStack& ref, const EvalConfig& eval);

struct BenchReport {
    std::vector<double> solver_seconds;
    std::vector<double> surrogate_seconds;
    double solver_median = 0.0;
    double surrogate_median = 0.0;
    double ratio = 0.0;
    double cell_updates_per_second = 0.0;
    std::size_t cells = 0;
    std::size_t snapshots = 0;

    [[nodiscard]] std::string format() const;
};

struct BenchOptions {
    std::optional<fs::path> model;
    std::optional<int> runs;
    std::optional<fs::path> output;
};
BenchReport bench(const RunConfig& config, const GlobalOptions& global, const BenchOptions& options);

/// Command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace cldflood::commands
