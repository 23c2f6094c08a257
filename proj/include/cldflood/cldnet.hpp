#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "cldflood/fields.hpp"
#include "cldflood/forcing.hpp"
#include "cldflood/nn.hpp"
#include "cldflood/terrain.hpp"

namespace cldflood::cldnet {

/// Architecture and time-stepping settings. Depth counts hidden layers.
struct ModelConfig {
    int latent_dim = 16;
    int fourier_m = 8;
    double fourier_scale = 1.0;
    int dyn_depth = 4;
    int dyn_width = 32;
    int rec_depth = 5;
    int rec_width = 64;
    bool conditioned = true;
    double latent_dt = 1.0;
    int forcing_dim = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

inline constexpr int kTerrainFeatureCount = 3;
inline constexpr int kOutputCount = 3;

/// Axis-aligned box used to map world coordinates onto [0,1]^2.
struct CoordinateBox {
    double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

    static CoordinateBox of(const terrain::RasterGrid& grid) {
        return {grid.min_x(), grid.min_y(), grid.max_x(), grid.max_y()};
    }
    [[nodiscard]] std::array<double, 2> normalize(double x, double y) const noexcept {
        return {(x - x0) / (x1 - x0), (y - y0) / (y1 - y0)};
    }
};

class Model {
public:
    Model() = default;
    /// Glorot-initialized networks and a seeded Fourier embedding.
    Model(const ModelConfig& config, const CoordinateBox& box, forcing::ForcingStats stats);
    /// Assemble from parts (checkpoint loading); checks every width.
    Model(const ModelConfig& config, const CoordinateBox& box, forcing::ForcingStats stats, nn::Mlp dyn, nn::Mlp rec,
          nn::FourierEmbedding embedding);

    [[nodiscard]] const ModelConfig& config() const noexcept { return config_; }
    [[nodiscard]] int latent_dim() const noexcept { return config_.latent_dim; }
    [[nodiscard]] bool conditioned() const noexcept { return config_.conditioned; }
    [[nodiscard]] double latent_dt() const noexcept { return config_.latent_dt; }
    [[nodiscard]] std::string_view kind() const noexcept { return config_.conditioned ? "cldnet" : "ldnet"; }
    [[nodiscard]] const CoordinateBox& box() const noexcept { return box_; }
    [[nodiscard]] const forcing::ForcingStats& forcing_stats() const noexcept { return stats_; }
    [[nodiscard]] const nn::FourierEmbedding& embedding() const noexcept { return embedding_; }
    [[nodiscard]] const nn::Mlp& dyn() const noexcept { return dyn_; }
    [[nodiscard]] const nn::Mlp& rec() const noexcept { return rec_; }
    [[nodiscard]] nn::Mlp& dyn() noexcept { return dyn_; }
    [[nodiscard]] nn::Mlp& rec() noexcept { return rec_; }

    /// Width of the per-point part of the decoder input: 2m (+3).
    [[nodiscard]] int spatial_width() const noexcept {
        return embedding_.output_size() + (config_.conditioned ? kTerrainFeatureCount : 0);
    }

private:
    void check_shapes() const;

    ModelConfig config_;
    CoordinateBox box_;
    forcing::ForcingStats stats_;
    nn::Mlp dyn_;
    nn::Mlp rec_;
    nn::FourierEmbedding embedding_;
};

/// Latent states s_{t_0} ... s_{t_{N-1}}; s_{t_{-1}} = 0 is implicit.
struct LatentTrajectory {
    int dim = 0;
    std::vector<double> states;  // steps * dim

    [[nodiscard]] std::size_t steps() const noexcept { return dim ? states.size() / static_cast<std::size_t>(dim) : 0; }
    [[nodiscard]] const double* state(std::size_t k) const noexcept { return states.data() + k * static_cast<std::size_t>(dim); }
};

/// Forward-Euler latent rollout driven by already standardized forcing.
/// Throws NumericError naming the step on a non-finite latent.
LatentTrajectory rollout_latent(const Model& model, const forcing::ForcingSequence& standardized);

/// Rollout plus the per-step dynamics caches needed for backpropagation.
struct RolloutCache {
    LatentTrajectory latent;
    std::vector<nn::ForwardCache> steps;
};
RolloutCache rollout_latent_cached(const Model& model, const forcing::ForcingSequence& standardized);

using Output = std::array<double, kOutputCount>;  // (h, hu, hv)

/// Decode one point. `xi` is the normalized coordinate; `phi` must be
/// present exactly when the model is conditioned (ContractError otherwise).
Output decode_point(const Model& model, const double* latent, std::array<double, 2> xi,
                    const std::optional<terrain::FeatureTriple>& phi);

/// Query points with their decoder inputs precomputed.
struct QuerySet {
    std::vector<double> x, y;                    // world metres
    std::vector<std::array<double, 2>> xi;       // normalized coordinates
    std::vector<terrain::FeatureTriple> phi;     // empty for unconditioned models
    nn::Batch spatial;                           // spatial_width() x n decoder inputs

    [[nodiscard]] std::size_t size() const noexcept { return x.size(); }
};

/// Points given in world coordinates. Terrain features are interpolated
/// when the model is conditioned; `features` may be null otherwise.
QuerySet make_queries(const Model& model, const terrain::TerrainFeatures* features, const std::vector<double>& x,
                      const std::vector<double>& y);

/// Every active cell centre, in row-major cell order.
QuerySet grid_queries(const Model& model, const terrain::TerrainFeatures* features, const terrain::RasterGrid& grid,
                      const std::vector<std::uint8_t>& mask);

/// Subset of a query set.
QuerySet select_queries(const QuerySet& all, const std::vector<std::size_t>& indices);

/// Decoder input for one latent state and a block of queries [begin, end).
void assemble_decoder_input(const Model& model, const double* latent, const QuerySet& q, std::size_t begin,
                            std::size_t end, nn::Batch& input);

/// Per-snapshot predictions at the query points.
using Prediction = FieldStack;

/// Bytes held by buffers allocated inside predict_field, peak over the call.
struct PredictMemory {
    std::size_t output_bytes = 0;
    std::size_t workspace_bytes = 0;
};

/// One rollout, then chunked decoding of every (t_k, point) pair; chunks run
/// in parallel with OpenMP. `raw_forcing` is in physical units and is
/// standardized with the model's statistics.
Prediction predict_field(const Model& model, const forcing::ForcingSequence& raw_forcing, const QuerySet& queries,
                         std::size_t chunk = 512, PredictMemory* memory = nullptr);

namespace reference {
/// Point-at-a-time serial decoding through decode_point; oracle for the
/// chunked kernel.
Prediction predict_field(const Model& model, const forcing::ForcingSequence& raw_forcing, const QuerySet& queries);
}  // namespace reference

}  // namespace cldflood::cldnet
