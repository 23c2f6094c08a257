#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cldflood::nn {

/// Dense matrix stored feature-major: element (row r, sample c) lives at
/// data[r * cols + c]. Samples are contiguous so the kernels vectorize over
/// the batch.
struct Batch {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Batch() = default;
    Batch(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

    void resize(int r, int c) {
        rows = r;
        cols = c;
        data.assign(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0);
    }
    [[nodiscard]] double* row(int r) noexcept { return data.data() + static_cast<std::size_t>(r) * cols; }
    [[nodiscard]] const double* row(int r) const noexcept { return data.data() + static_cast<std::size_t>(r) * cols; }
    [[nodiscard]] double& at(int r, int c) noexcept { return data[static_cast<std::size_t>(r) * cols + c]; }
    [[nodiscard]] double at(int r, int c) const noexcept { return data[static_cast<std::size_t>(r) * cols + c]; }
};

class Mlp;

/// Activations recorded by a forward pass, consumed by backward.
struct ForwardCache {
    std::vector<Batch> activations;  // [0] = input, [L] = output
    const Mlp* net = nullptr;
    std::uint64_t version = 0;

    [[nodiscard]] const Batch& output() const { return activations.back(); }
};

/// Elementwise tanh used by the hidden layers; within a few ulp of std::tanh.
void tanh_inplace(std::span<double> v) noexcept;

/// Fully connected network, tanh on hidden layers, identity output. All
/// parameters live in one flat vector: for each layer the row-major weight
/// matrix (out x in) followed by its bias.
class Mlp {
public:
    Mlp() = default;
    /// Zero-initialized network with the given layer widths (>= 2 entries).
    explicit Mlp(std::vector<int> widths);
    /// Glorot-uniform weights, zero biases.
    static Mlp glorot(std::vector<int> widths, std::uint64_t seed);

    [[nodiscard]] const std::vector<int>& widths() const noexcept { return widths_; }
    [[nodiscard]] int input_size() const noexcept { return widths_.front(); }
    [[nodiscard]] int output_size() const noexcept { return widths_.back(); }
    [[nodiscard]] std::size_t layer_count() const noexcept { return widths_.size() - 1; }
    [[nodiscard]] std::size_t param_count() const noexcept { return params_.size(); }

    [[nodiscard]] std::span<const double> params() const noexcept { return params_; }
    /// Mutable access invalidates every outstanding ForwardCache.
    [[nodiscard]] std::span<double> mutable_params() noexcept {
        bump_version();
        return params_;
    }
    [[nodiscard]] std::uint64_t version() const noexcept { return version_; }

    [[nodiscard]] const double* weight(std::size_t layer) const noexcept { return params_.data() + offsets_[layer]; }
    [[nodiscard]] const double* bias(std::size_t layer) const noexcept {
        return weight(layer) + static_cast<std::size_t>(widths_[layer]) * widths_[layer + 1];
    }
    [[nodiscard]] std::size_t weight_offset(std::size_t layer) const noexcept { return offsets_[layer]; }

    /// Batched forward pass; `x` has input_size() rows.
    void forward(const Batch& x, ForwardCache& cache) const;
    [[nodiscard]] Batch forward(const Batch& x) const;
    [[nodiscard]] std::vector<double> forward(std::span<const double> x) const;

    /// Reverse-mode pass. Parameter gradients are accumulated (added) into
    /// `param_grad` (param_count() entries); the input gradient is written
    /// to `input_grad` when non-null. Throws ContractError on a stale or
    /// foreign cache.
    void backward(const ForwardCache& cache, const Batch& out_grad, std::span<double> param_grad,
                  Batch* input_grad) const;

private:
    void bump_version() noexcept;

    std::vector<int> widths_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
    std::uint64_t version_ = 0;
};

/// Random Fourier features of a 2-D coordinate: [sin(2 pi B xi), cos(2 pi B xi)].
class FourierEmbedding {
public:
    FourierEmbedding() = default;
    /// B entries drawn from N(0, scale^2).
    FourierEmbedding(int m, double scale, std::uint64_t seed);
    /// Explicit frequency matrix, m x 2 row-major.
    FourierEmbedding(std::vector<double> frequencies, double scale);

    [[nodiscard]] int frequency_count() const noexcept { return static_cast<int>(freq_.size() / 2); }
    [[nodiscard]] int output_size() const noexcept { return static_cast<int>(freq_.size()); }
    [[nodiscard]] double scale() const noexcept { return scale_; }
    [[nodiscard]] const std::vector<double>& frequencies() const noexcept { return freq_; }

    /// Writes output_size() values to `out`.
    void embed(double xi0, double xi1, double* out) const noexcept;
    [[nodiscard]] std::vector<double> embed(double xi0, double xi1) const;

private:
    std::vector<double> freq_;  // m x 2
    double scale_ = 1.0;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double base_lr = 1e-3;
    double final_lr = 1e-6;
    double clip_norm = 1.0;
    std::uint64_t total_steps = 1;
};

/// Cosine-decayed learning rate at step t of `total`.
[[nodiscard]] double cosine_lr(double base, double final_lr, std::uint64_t t, std::uint64_t total) noexcept;

struct AdamState {
    AdamConfig config;
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    AdamState() = default;
    AdamState(const AdamConfig& cfg, std::size_t n) : config(cfg), m(n, 0.0), v(n, 0.0) {}

    [[nodiscard]] double learning_rate() const noexcept {
        return cosine_lr(config.base_lr, config.final_lr, step, config.total_steps);
    }
};

/// Global L2 norm over every gradient group.
[[nodiscard]] double global_norm(std::span<const std::span<const double>> grads) noexcept;

/// Clip to config.clip_norm, update moments, apply the Adam step at the
/// scheduled rate and advance the counter. Parameter groups are laid out
/// back to back in the moment vectors. Returns the pre-clip norm. Throws
/// NumericError on non-finite gradients, ContractError when the schedule is
/// exhausted or shapes disagree.
double adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
                 AdamState& state);

}  // namespace cldflood::nn
