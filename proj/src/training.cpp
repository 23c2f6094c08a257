#include "cldflood/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numeric>

#include "cldflood/error.hpp"

namespace cldflood::training {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace

WetUnionMask build_wet_union(const std::vector<const swe::Trajectory*>& training, const terrain::TerrainField& terrain,
                             double threshold) {
    if (training.empty()) throw ConfigError("wet-union mask needs at least one training trajectory");
    const std::size_t n = terrain.grid.cell_count();
    std::vector<double> peak(n, 0.0);
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    for (const auto* traj : training) {
        for (const auto& snap : traj->snapshots) {
            if (snap.h.size() != n) throw ContractError("trajectory does not match the terrain grid");
            for (std::size_t c = 0; c < n; ++c) peak[c] = std::max(peak[c], snap.h[c]);
            hash = fnv1a(hash, snap.h.data(), n * sizeof(double));
        }
    }
    WetUnionMask m;
    m.threshold = threshold;
    m.source_hash = hash;
    m.mask.assign(n, 0);
    for (std::size_t c = 0; c < n; ++c) {
        if (terrain.mask[c] && peak[c] > threshold) {
            m.mask[c] = 1;
            m.cells.push_back(c);
        }
    }
    if (m.cells.empty()) throw ConfigError("wet-union mask is empty; lower the depth threshold");
    return m;
}

std::vector<std::size_t> sample_query_points(const WetUnionMask& mask, std::size_t count, Rng& rng) {
    if (count < 1) throw ConfigError("need at least one query point per step");
    if (count > mask.population()) throw ConfigError("more query points requested than wet-union cells");
    std::vector<std::size_t> pool = mask.cells;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

PointSample make_sample(const cldnet::Model& model, const terrain::TerrainFeatures* features,
                        const terrain::RasterGrid& grid, std::vector<std::size_t> cells) {
    std::vector<double> x, y;
    x.reserve(cells.size());
    y.reserve(cells.size());
    for (std::size_t c : cells) {
        x.push_back(grid.center_x(static_cast<int>(c % static_cast<std::size_t>(grid.nx))));
        y.push_back(grid.center_y(static_cast<int>(c / static_cast<std::size_t>(grid.nx))));
    }
    PointSample s;
    s.queries = cldnet::make_queries(model, features, x, y);
    s.cells = std::move(cells);
    return s;
}

double compute_loss(const cldnet::Model& model, const Example& example, const PointSample& sample, Gradients* grads,
                    int shards) {
    if (!example.reference) throw ContractError("training example has no reference trajectory");
    const swe::Trajectory& ref = *example.reference;
    const std::size_t steps = ref.size();
    if (example.forcing.steps() != steps) throw ContractError("forcing and trajectory lengths differ");
    const std::size_t m = sample.cells.size();
    if (m == 0) throw ContractError("empty point sample");
    if (shards < 1) throw ContractError("shard count must be positive");
    const auto s_count = static_cast<std::size_t>(shards);

    const forcing::ForcingSequence z = model.forcing_stats().standardize(example.forcing);
    cldnet::RolloutCache roll;
    if (grads) {
        roll = cldnet::rollout_latent_cached(model, z);
    } else {
        roll.latent = cldnet::rollout_latent(model, z);
    }
    const int d = model.latent_dim();
    const double scale = 1.0 / (static_cast<double>(steps) * static_cast<double>(m));

    struct ShardResult {
        double sq = 0.0;
        std::vector<double> rec;
        std::vector<double> dlatent;
    };
    std::vector<ShardResult> parts(s_count);

#pragma omp parallel for schedule(static)
    for (std::size_t s = 0; s < s_count; ++s) {
        ShardResult& part = parts[s];
        const std::size_t begin = s * m / s_count;
        const std::size_t end = (s + 1) * m / s_count;
        if (begin == end) continue;
        const int cols = static_cast<int>(end - begin);
        if (grads) {
            part.rec.assign(model.rec().param_count(), 0.0);
            part.dlatent.assign(steps * static_cast<std::size_t>(d), 0.0);
        }
        nn::Batch input;
        nn::Batch out_grad(cldnet::kOutputCount, cols);
        nn::Batch in_grad;
        nn::ForwardCache cache;
        for (std::size_t k = 0; k < steps; ++k) {
            cldnet::assemble_decoder_input(model, roll.latent.state(k), sample.queries, begin, end, input);
            model.rec().forward(input, cache);
            const nn::Batch& y = cache.output();
            const swe::FlowState& snap = ref.snapshots[k];
            const std::vector<double>* fields[3] = {&snap.h, &snap.hu, &snap.hv};
            for (int v = 0; v < cldnet::kOutputCount; ++v) {
                const double* yv = y.row(v);
                double* gv = out_grad.row(v);
                for (int p = 0; p < cols; ++p) {
                    const double r = yv[p] - (*fields[v])[sample.cells[begin + static_cast<std::size_t>(p)]];
                    part.sq += r * r;
                    gv[p] = 2.0 * scale * r;
                }
            }
            if (!grads) continue;
            model.rec().backward(cache, out_grad, part.rec, &in_grad);
            double* dl = part.dlatent.data() + k * static_cast<std::size_t>(d);
            for (int i = 0; i < d; ++i) {
                const double* row = in_grad.row(i);
                double acc = 0.0;
                for (int p = 0; p < cols; ++p) acc += row[p];
                dl[i] += acc;
            }
        }
    }

    double sq = 0.0;
    for (const auto& part : parts) sq += part.sq;
    const double loss = scale * sq;
    if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
    if (!grads) return loss;

    std::vector<double> dlatent(steps * static_cast<std::size_t>(d), 0.0);
    for (const auto& part : parts) {
        if (part.rec.empty()) continue;
        for (std::size_t i = 0; i < part.rec.size(); ++i) grads->rec[i] += part.rec[i];
        for (std::size_t i = 0; i < dlatent.size(); ++i) dlatent[i] += part.dlatent[i];
    }

    // Backpropagation through the Euler rollout s_k = s_{k-1} + dt F(s_{k-1}, r_k).
    std::vector<double> g(static_cast<std::size_t>(d), 0.0);
    nn::Batch dyn_out(d, 1);
    nn::Batch dyn_in;
    for (std::size_t k = steps; k-- > 0;) {
        for (int i = 0; i < d; ++i) g[static_cast<std::size_t>(i)] += dlatent[k * static_cast<std::size_t>(d) + i];
        for (int i = 0; i < d; ++i) dyn_out.at(i, 0) = model.latent_dt() * g[static_cast<std::size_t>(i)];
        model.dyn().backward(roll.steps[k], dyn_out, grads->dyn, &dyn_in);
        for (int i = 0; i < d; ++i) g[static_cast<std::size_t>(i)] += dyn_in.at(i, 0);
    }
    return loss;
}

void TrainConfig::validate() const {
    if (points < 1) throw ConfigError("training needs at least one query point per step");
    if (epochs < 0) throw ConfigError("epoch count must be non-negative");
    if (shards < 1) throw ConfigError("shard count must be positive");
    if (val_points < 1) throw ConfigError("validation needs at least one point");
    if (!(adam.base_lr > 0.0) || !(adam.final_lr >= 0.0)) throw ConfigError("learning rates must be positive");
    if (!(adam.clip_norm > 0.0)) throw ConfigError("gradient clip norm must be positive");
}

TrainResult train(cldnet::Model& model, const std::vector<Example>& training, const std::vector<Example>& validation,
                  const terrain::TerrainField& terrain, const terrain::TerrainFeatures& features,
                  const WetUnionMask& mask, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
    config.validate();
    if (training.empty()) throw ConfigError("no training trajectories");
    if (config.points > mask.population())
        throw ConfigError("training.points exceeds the wet-union population (" + std::to_string(mask.population()) + ")");
    const terrain::TerrainFeatures* feats = model.conditioned() ? &features : nullptr;
    const auto& grid = terrain.grid;

    TrainResult result;
    nn::AdamConfig adam = config.adam;
    adam.total_steps = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(config.epochs) * training.size());
    result.optimizer = nn::AdamState(adam, model.dyn().param_count() + model.rec().param_count());
    if (config.epochs == 0) return result;

    const std::vector<Example>& val_set = validation.empty() ? training : validation;
    std::vector<PointSample> val_samples;
    {
        const std::size_t vm = std::min(config.val_points, mask.population());
        for (std::size_t i = 0; i < val_set.size(); ++i) {
            Rng vr(derive_seed(config.seed, 0x5A17 + i));
            val_samples.push_back(make_sample(model, feats, grid, sample_query_points(mask, vm, vr)));
        }
    }
    const auto validation_loss = [&] {
        double total = 0.0;
        for (std::size_t i = 0; i < val_set.size(); ++i)
            total += compute_loss(model, val_set[i], val_samples[i], nullptr, config.shards);
        return total / static_cast<double>(val_set.size());
    };

    Rng rng(derive_seed(config.seed, 0x7EA1));
    std::vector<std::size_t> order(training.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Gradients grads(model);
    std::vector<double> best_dyn(model.dyn().params().begin(), model.dyn().params().end());
    std::vector<double> best_rec(model.rec().params().begin(), model.rec().params().end());
    result.best_val_loss = std::numeric_limits<double>::infinity();

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        double epoch_loss = 0.0;
        try {
            for (std::size_t idx : order) {
                const PointSample sample =
                    make_sample(model, feats, grid, sample_query_points(mask, config.points, rng));
                grads.clear();
                epoch_loss += compute_loss(model, training[idx], sample, &grads, config.shards);
                const std::span<double> params[2] = {model.dyn().mutable_params(), model.rec().mutable_params()};
                const std::span<const double> gspans[2] = {grads.dyn, grads.rec};
                nn::adam_step(params, gspans, result.optimizer);
            }
        } catch (const NumericError&) {
            epoch_loss = std::numeric_limits<double>::quiet_NaN();
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / static_cast<double>(order.size());
        double vl;
        try {
            vl = validation_loss();
        } catch (const NumericError&) {
            vl = std::numeric_limits<double>::quiet_NaN();
        }
        rec.val_loss = vl;
        result.curve.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (config.verbose)
            std::fprintf(stderr, "[%s] epoch %d train %.6g val %.6g lr %.3g\n", std::string(model.kind()).c_str(),
                         epoch, rec.train_loss, rec.val_loss, result.optimizer.learning_rate());
        if (!std::isfinite(vl) || !std::isfinite(rec.train_loss)) {
            result.diverged = true;
            break;
        }
        if (vl < result.best_val_loss) {
            result.best_val_loss = vl;
            result.best_epoch = epoch;
            best_dyn.assign(model.dyn().params().begin(), model.dyn().params().end());
            best_rec.assign(model.rec().params().begin(), model.rec().params().end());
        }
    }
    std::ranges::copy(best_dyn, model.dyn().mutable_params().begin());
    std::ranges::copy(best_rec, model.rec().mutable_params().begin());
    return result;
}

}  // namespace cldflood::training
