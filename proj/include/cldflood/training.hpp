#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "cldflood/cldnet.hpp"
#include "cldflood/forcing.hpp"
#include "cldflood/nn.hpp"
#include "cldflood/rng.hpp"
#include "cldflood/swe.hpp"
#include "cldflood/terrain.hpp"

namespace cldflood::training {

/// Cells whose peak training depth exceeds the threshold.
struct WetUnionMask {
    std::vector<std::uint8_t> mask;
    std::vector<std::size_t> cells;  // indices of set cells, ascending
    double threshold = 0.1;
    std::uint64_t source_hash = 0;   // hash of the training depths it was built from

    [[nodiscard]] std::size_t population() const noexcept { return cells.size(); }
};

/// Throws ConfigError when no trajectory is given or the mask is empty.
WetUnionMask build_wet_union(const std::vector<const swe::Trajectory*>& training, const terrain::TerrainField& terrain,
                             double threshold = 0.1);

/// M distinct cells drawn uniformly without replacement (partial
/// Fisher-Yates). Throws ConfigError when M exceeds the population.
std::vector<std::size_t> sample_query_points(const WetUnionMask& mask, std::size_t count, Rng& rng);

/// One training trajectory: reference fields plus raw snapshot forcing.
struct Example {
    const swe::Trajectory* reference = nullptr;
    forcing::ForcingSequence forcing;  // raw physical units
};

/// Parameter gradients of both networks.
struct Gradients {
    std::vector<double> dyn;
    std::vector<double> rec;

    explicit Gradients(const cldnet::Model& model)
        : dyn(model.dyn().param_count(), 0.0), rec(model.rec().param_count(), 0.0) {}
    void clear() {
        std::fill(dyn.begin(), dyn.end(), 0.0);
        std::fill(rec.begin(), rec.end(), 0.0);
    }
};

/// Sampled points with their decoder inputs and reference values.
struct PointSample {
    std::vector<std::size_t> cells;
    cldnet::QuerySet queries;
};

PointSample make_sample(const cldnet::Model& model, const terrain::TerrainFeatures* features,
                        const terrain::RasterGrid& grid, std::vector<std::size_t> cells);

/// Subsampled trajectory MSE, (1/(N_T M)) sum_k sum_m |q~ - q|^2, and
/// (when `grads` is non-null) its exact gradient through the decoder and
/// every Euler step of the rollout. Points are split into `shards`
/// contiguous groups whose gradients are summed in shard order.
double compute_loss(const cldnet::Model& model, const Example& example, const PointSample& sample,
                    Gradients* grads, int shards = 1);

struct TrainConfig {
    std::size_t points = 256;
    int epochs = 10;
    std::uint64_t seed = 0;
    int shards = 1;
    std::size_t val_points = 256;
    double wet_threshold = 0.1;
    nn::AdamConfig adam;  // total_steps is filled in by train()
    bool verbose = false;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> curve;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    bool diverged = false;
    nn::AdamState optimizer;
};

/// Batch-of-one Adam training over the training examples in a seeded
/// shuffled order per epoch. Validation uses a frozen point set per
/// validation example (the training examples when `validation` is empty).
/// On return `model` holds the parameters with the best validation loss.
TrainResult train(cldnet::Model& model, const std::vector<Example>& training, const std::vector<Example>& validation,
                  const terrain::TerrainField& terrain, const terrain::TerrainFeatures& features,
                  const WetUnionMask& mask, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace cldflood::training
