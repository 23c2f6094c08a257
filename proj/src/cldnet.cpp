#include "cldflood/cldnet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cldflood/error.hpp"
#include "cldflood/rng.hpp"

namespace cldflood::cldnet {

void ModelConfig::validate() const {
    if (latent_dim < 1) throw ConfigError("latent dimension must be positive");
    if (fourier_m < 1) throw ConfigError("Fourier frequency count must be positive");
    if (!(fourier_scale > 0.0)) throw ConfigError("Fourier scale must be positive");
    if (dyn_depth < 0 || rec_depth < 0) throw ConfigError("network depth must be non-negative");
    if (dyn_width < 1 || rec_width < 1) throw ConfigError("network width must be positive");
    if (!(latent_dt > 0.0)) throw ConfigError("latent time step must be positive");
    if (forcing_dim < 1) throw ConfigError("forcing dimension must be positive");
}

namespace {

std::vector<int> widths(int in, int depth, int width, int out) {
    std::vector<int> w{in};
    for (int i = 0; i < depth; ++i) w.push_back(width);
    w.push_back(out);
    return w;
}

}  // namespace

Model::Model(const ModelConfig& config, const CoordinateBox& box, forcing::ForcingStats stats)
    : config_(config), box_(box), stats_(std::move(stats)) {
    config_.validate();
    const int spatial = 2 * config_.fourier_m + (config_.conditioned ? kTerrainFeatureCount : 0);
    dyn_ = nn::Mlp::glorot(widths(config_.latent_dim + config_.forcing_dim, config_.dyn_depth, config_.dyn_width,
                                  config_.latent_dim),
                           derive_seed(config_.seed, 1));
    rec_ = nn::Mlp::glorot(widths(config_.latent_dim + spatial, config_.rec_depth, config_.rec_width, kOutputCount),
                           derive_seed(config_.seed, 2));
    embedding_ = nn::FourierEmbedding(config_.fourier_m, config_.fourier_scale, derive_seed(config_.seed, 3));
    check_shapes();
}

Model::Model(const ModelConfig& config, const CoordinateBox& box, forcing::ForcingStats stats, nn::Mlp dyn,
             nn::Mlp rec, nn::FourierEmbedding embedding)
    : config_(config), box_(box), stats_(std::move(stats)), dyn_(std::move(dyn)), rec_(std::move(rec)),
      embedding_(std::move(embedding)) {
    config_.validate();
    check_shapes();
}

void Model::check_shapes() const {
    if (embedding_.frequency_count() != config_.fourier_m) throw ContractError("embedding size disagrees with config");
    if (dyn_.input_size() != config_.latent_dim + config_.forcing_dim || dyn_.output_size() != config_.latent_dim)
        throw ContractError("dynamics network widths disagree with config");
    if (rec_.input_size() != config_.latent_dim + spatial_width() || rec_.output_size() != kOutputCount)
        throw ContractError("reconstruction network widths disagree with config");
    if (stats_.per_component() && stats_.mean().size() != static_cast<std::size_t>(config_.forcing_dim))
        throw ContractError("forcing statistics disagree with forcing dimension");
}

namespace {

void check_forcing(const Model& model, const forcing::ForcingSequence& f) {
    if (f.dim != static_cast<std::size_t>(model.config().forcing_dim))
        throw ContractError("forcing dimension does not match the model");
    if (f.steps() < 1) throw ContractError("forcing sequence is empty");
}

template <typename OnStep>
LatentTrajectory rollout_impl(const Model& model, const forcing::ForcingSequence& z, OnStep&& on_step) {
    check_forcing(model, z);
    const int d = model.latent_dim();
    const auto fd = static_cast<int>(z.dim);
    const std::size_t steps = z.steps();
    LatentTrajectory out;
    out.dim = d;
    out.states.assign(steps * static_cast<std::size_t>(d), 0.0);
    std::vector<double> prev(static_cast<std::size_t>(d), 0.0);
    nn::Batch in(d + fd, 1);
    for (std::size_t k = 0; k < steps; ++k) {
        for (int i = 0; i < d; ++i) in.at(i, 0) = prev[static_cast<std::size_t>(i)];
        for (int i = 0; i < fd; ++i) in.at(d + i, 0) = z.row(k)[i];
        const nn::Batch& rhs = on_step(in);
        double* s = out.states.data() + k * static_cast<std::size_t>(d);
        for (int i = 0; i < d; ++i) {
            s[i] = prev[static_cast<std::size_t>(i)] + model.latent_dt() * rhs.at(i, 0);
            if (!std::isfinite(s[i])) throw NumericError("non-finite latent state at step " + std::to_string(k));
        }
        std::copy(s, s + d, prev.begin());
    }
    return out;
}

}  // namespace

LatentTrajectory rollout_latent(const Model& model, const forcing::ForcingSequence& standardized) {
    nn::Batch rhs;
    return rollout_impl(model, standardized, [&](const nn::Batch& in) -> const nn::Batch& {
        rhs = model.dyn().forward(in);
        return rhs;
    });
}

RolloutCache rollout_latent_cached(const Model& model, const forcing::ForcingSequence& standardized) {
    RolloutCache cache;
    cache.steps.reserve(standardized.steps());
    cache.latent = rollout_impl(model, standardized, [&](const nn::Batch& in) -> const nn::Batch& {
        cache.steps.emplace_back();
        model.dyn().forward(in, cache.steps.back());
        return cache.steps.back().output();
    });
    return cache;
}

Output decode_point(const Model& model, const double* latent, std::array<double, 2> xi,
                    const std::optional<terrain::FeatureTriple>& phi) {
    if (model.conditioned() != phi.has_value())
        throw ContractError(model.conditioned() ? "conditioned decoder needs terrain features"
                                                : "unconditioned decoder takes no terrain features");
    const int d = model.latent_dim();
    std::vector<double> in(static_cast<std::size_t>(d + model.spatial_width()));
    std::copy(latent, latent + d, in.begin());
    model.embedding().embed(xi[0], xi[1], in.data() + d);
    if (phi) std::copy(phi->begin(), phi->end(), in.begin() + d + model.embedding().output_size());
    const auto y = model.rec().forward(std::span<const double>(in));
    return {y[0], y[1], y[2]};
}

namespace {

void fill_spatial(const Model& model, QuerySet& q) {
    const std::size_t n = q.size();
    const int m2 = model.embedding().output_size();
    q.spatial.resize(model.spatial_width(), static_cast<int>(n));
    std::vector<double> emb(static_cast<std::size_t>(m2));
    for (std::size_t p = 0; p < n; ++p) {
        model.embedding().embed(q.xi[p][0], q.xi[p][1], emb.data());
        for (int r = 0; r < m2; ++r) q.spatial.at(r, static_cast<int>(p)) = emb[static_cast<std::size_t>(r)];
        if (model.conditioned())
            for (int r = 0; r < kTerrainFeatureCount; ++r) q.spatial.at(m2 + r, static_cast<int>(p)) = q.phi[p][r];
    }
}

}  // namespace

QuerySet make_queries(const Model& model, const terrain::TerrainFeatures* features, const std::vector<double>& x,
                      const std::vector<double>& y) {
    if (x.size() != y.size()) throw ContractError("query coordinate arrays differ in length");
    if (model.conditioned() && !features) throw ContractError("conditioned model needs terrain features");
    QuerySet q;
    q.x = x;
    q.y = y;
    q.xi.reserve(x.size());
    for (std::size_t p = 0; p < x.size(); ++p) {
        q.xi.push_back(model.box().normalize(x[p], y[p]));
        if (model.conditioned()) q.phi.push_back(terrain::features_at(*features, x[p], y[p]));
    }
    fill_spatial(model, q);
    return q;
}

QuerySet grid_queries(const Model& model, const terrain::TerrainFeatures* features, const terrain::RasterGrid& grid,
                      const std::vector<std::uint8_t>& mask) {
    std::vector<double> x, y;
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            if (!mask[grid.index(i, j)]) continue;
            x.push_back(grid.center_x(i));
            y.push_back(grid.center_y(j));
        }
    return make_queries(model, features, x, y);
}

QuerySet select_queries(const QuerySet& all, const std::vector<std::size_t>& indices) {
    QuerySet q;
    q.x.reserve(indices.size());
    q.spatial.resize(all.spatial.rows, static_cast<int>(indices.size()));
    for (std::size_t n = 0; n < indices.size(); ++n) {
        const std::size_t p = indices[n];
        q.x.push_back(all.x[p]);
        q.y.push_back(all.y[p]);
        q.xi.push_back(all.xi[p]);
        if (!all.phi.empty()) q.phi.push_back(all.phi[p]);
        for (int r = 0; r < all.spatial.rows; ++r) q.spatial.at(r, static_cast<int>(n)) = all.spatial.at(r, static_cast<int>(p));
    }
    return q;
}

void assemble_decoder_input(const Model& model, const double* latent, const QuerySet& q, std::size_t begin,
                            std::size_t end, nn::Batch& input) {
    const int d = model.latent_dim();
    const int cols = static_cast<int>(end - begin);
    const int sw = q.spatial.rows;
    if (input.rows != d + sw || input.cols != cols) input.resize(d + sw, cols);
    for (int i = 0; i < d; ++i) std::fill(input.row(i), input.row(i) + cols, latent[i]);
    for (int r = 0; r < sw; ++r) {
        const double* src = q.spatial.row(r) + begin;
        std::copy(src, src + cols, input.row(d + r));
    }
}

Prediction predict_field(const Model& model, const forcing::ForcingSequence& raw_forcing, const QuerySet& queries,
                         std::size_t chunk, PredictMemory* memory) {
    if (chunk == 0) throw ContractError("decode chunk size must be positive");
    if (queries.spatial.rows != model.spatial_width()) throw ContractError("query set built for a different model");
    const LatentTrajectory latent = rollout_latent(model, model.forcing_stats().standardize(raw_forcing));
    Prediction out(latent.steps(), queries.size());

    const std::size_t n = out.points;
    const std::size_t chunk_count = (n + chunk - 1) / chunk;
    std::size_t workspace = 0;
#pragma omp parallel reduction(max : workspace)
    {
        nn::Batch input;
        nn::ForwardCache cache;
        std::size_t local = 0;
#pragma omp for schedule(static)
        for (std::size_t c = 0; c < chunk_count; ++c) {
            const std::size_t begin = c * chunk;
            const std::size_t end = std::min(n, begin + chunk);
            for (std::size_t k = 0; k < out.steps; ++k) {
                assemble_decoder_input(model, latent.state(k), queries, begin, end, input);
                model.rec().forward(input, cache);
                const nn::Batch& y = cache.output();
                for (int v = 0; v < kOutputCount; ++v)
                    std::copy(y.row(v), y.row(v) + (end - begin),
                              out.values.begin() + static_cast<std::ptrdiff_t>((k * kOutputCount + v) * n + begin));
            }
            std::size_t bytes = input.data.capacity() * sizeof(double);
            for (const auto& a : cache.activations) bytes += a.data.capacity() * sizeof(double);
            local = std::max(local, bytes);
        }
        workspace = std::max(workspace, local);
    }
    if (memory) {
        memory->output_bytes = out.values.capacity() * sizeof(double);
        memory->workspace_bytes = workspace + latent.states.capacity() * sizeof(double);
    }
    return out;
}

namespace reference {

Prediction predict_field(const Model& model, const forcing::ForcingSequence& raw_forcing, const QuerySet& queries) {
    const LatentTrajectory latent = rollout_latent(model, model.forcing_stats().standardize(raw_forcing));
    Prediction out(latent.steps(), queries.size());
    for (std::size_t k = 0; k < out.steps; ++k)
        for (std::size_t p = 0; p < out.points; ++p) {
            std::optional<terrain::FeatureTriple> phi;
            if (model.conditioned()) phi = queries.phi[p];
            const Output y = decode_point(model, latent.state(k), queries.xi[p], phi);
            for (int v = 0; v < kOutputCount; ++v)
                out.values[(k * kOutputCount + static_cast<std::size_t>(v)) * out.points + p] = y[static_cast<std::size_t>(v)];
        }
    return out;
}

}  // namespace reference
}  // namespace cldflood::cldnet
