#include "cldflood/nn.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <numbers>

#include "cldflood/error.hpp"
#include "cldflood/rng.hpp"

namespace cldflood::nn {

namespace {

std::atomic<std::uint64_t> g_version{1};

// Reductions over the sample axis use eight interleaved partial sums combined
// in a fixed tree, so the result depends only on the input length.
double combine(const double* acc) noexcept {
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

double lane_dot(const double* a, const double* b, int n) noexcept {
    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int p = 0;
    for (; p + 8 <= n; p += 8)
        for (int j = 0; j < 8; ++j) acc[j] += a[p + j] * b[p + j];
    double s = combine(acc);
    for (; p < n; ++p) s += a[p] * b[p];
    return s;
}

double lane_sum(const double* a, int n) noexcept {
    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int p = 0;
    for (; p + 8 <= n; p += 8)
        for (int j = 0; j < 8; ++j) acc[j] += a[p + j];
    double s = combine(acc);
    for (; p < n; ++p) s += a[p];
    return s;
}

inline std::uint64_t bits_of(double x) noexcept { return std::bit_cast<std::uint64_t>(x); }
inline double from_bits(std::uint64_t u) noexcept { return std::bit_cast<double>(u); }

// tanh written so the loop vectorizes. Rational approximation for
// |x| < 0.625, 1 - 2/(exp(2|x|) + 1) above it, with exp by range reduction
// to [-ln2/2, ln2/2] and a Pade form. Both branches are computed.
inline double tanh_one(double x) noexcept {
    const std::uint64_t sign = bits_of(x) & 0x8000000000000000ull;
    const double a = std::min(from_bits(bits_of(x) ^ sign), 22.0);

    const double z = a * a;
    const double p = (-9.64399179425052238628e-1 * z - 9.92877231001918586564e1) * z - 1.61468768441708447952e3;
    const double q = ((z + 1.12811678491632931402e2) * z + 2.23548839060100448583e3) * z + 4.84406305325125486048e3;
    const double small = a + a * z * (p / q);

    // Adding 1.5 * 2^52 rounds to an integer held in the low mantissa bits.
    const double t = 2.0 * a;
    const double shifted = 1.4426950408889634073599 * t + 0x1.8p52;
    const double n = shifted - 0x1.8p52;
    double r = t - n * 6.93145751953125e-1;
    r = r - n * 1.42860682030941723212e-6;
    const double rr = r * r;
    const double ep = r * ((1.26177193074810590878e-4 * rr + 3.02994407707441961300e-2) * rr + 9.99999999999999999910e-1);
    const double eq = ((3.00198505138664455042e-6 * rr + 2.52448340349684104192e-3) * rr + 2.27265548208155028766e-1) * rr +
                      2.00000000000000000009e0;
    const double scale = from_bits((bits_of(shifted) + 1023) << 52);
    const double e = (1.0 + 2.0 * (ep / (eq - ep))) * scale;
    const double large = 1.0 - 2.0 / (e + 1.0);

    return from_bits(bits_of(a < 0.625 ? small : large) | sign);
}

// z[o][p] = b[o] + sum_k w[o][k] * x[k][p], accumulated in increasing k for
// every element regardless of batch width. Tiles of 4 outputs x 16 columns
// stay in registers across the k loop.
void affine(const double* w, const double* b, int n_out, int n_in, const Batch& x, Batch& z) {
    const int cols = x.cols;
    constexpr int R = 4, C = 16;
    int o = 0;
    for (; o + R <= n_out; o += R) {
        const double* wr = w + static_cast<std::size_t>(o) * n_in;
        int p = 0;
        for (; p + C <= cols; p += C) {
            double a0[C], a1[C], a2[C], a3[C];
            for (int j = 0; j < C; ++j) {
                a0[j] = b[o];
                a1[j] = b[o + 1];
                a2[j] = b[o + 2];
                a3[j] = b[o + 3];
            }
            const double* w0 = wr;
            const double* w1 = w0 + n_in;
            const double* w2 = w1 + n_in;
            const double* w3 = w2 + n_in;
            for (int k = 0; k < n_in; ++k) {
                const double* xk = x.row(k) + p;
                const double c0 = w0[k], c1 = w1[k], c2 = w2[k], c3 = w3[k];
#pragma omp simd
                for (int j = 0; j < C; ++j) {
                    const double xv = xk[j];
                    a0[j] += c0 * xv;
                    a1[j] += c1 * xv;
                    a2[j] += c2 * xv;
                    a3[j] += c3 * xv;
                }
            }
            std::copy(a0, a0 + C, z.row(o) + p);
            std::copy(a1, a1 + C, z.row(o + 1) + p);
            std::copy(a2, a2 + C, z.row(o + 2) + p);
            std::copy(a3, a3 + C, z.row(o + 3) + p);
        }
        for (int r = 0; r < R; ++r) {
            const double* wo = wr + static_cast<std::size_t>(r) * n_in;
            double* zo = z.row(o + r);
            for (int q = p; q < cols; ++q) {
                double s = b[o + r];
                for (int k = 0; k < n_in; ++k) s += wo[k] * x.row(k)[q];
                zo[q] = s;
            }
        }
    }
    for (; o < n_out; ++o) {
        double* zo = z.row(o);
        std::fill(zo, zo + cols, b[o]);
        const double* wo = w + static_cast<std::size_t>(o) * n_in;
        for (int k = 0; k < n_in; ++k) {
            const double* xk = x.row(k);
            const double a = wo[k];
            for (int p = 0; p < cols; ++p) zo[p] += a * xk[p];
        }
    }
}

}  // namespace

void tanh_inplace(std::span<double> v) noexcept {
    double* d = v.data();
    const std::size_t n = v.size();
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) d[i] = tanh_one(d[i]);
}

Mlp::Mlp(std::vector<int> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw ContractError("an MLP needs at least input and output widths");
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        if (widths_[l] < 1 || widths_[l + 1] < 1) throw ContractError("MLP layer widths must be positive");
        offsets_.push_back(total);
        total += static_cast<std::size_t>(widths_[l]) * widths_[l + 1] + widths_[l + 1];
    }
    params_.assign(total, 0.0);
    bump_version();
}

Mlp Mlp::glorot(std::vector<int> widths, std::uint64_t seed) {
    Mlp net(std::move(widths));
    Rng rng(seed);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const int n_in = net.widths_[l];
        const int n_out = net.widths_[l + 1];
        const double limit = std::sqrt(6.0 / (n_in + n_out));
        double* w = net.params_.data() + net.offsets_[l];
        for (std::size_t i = 0; i < static_cast<std::size_t>(n_in) * n_out; ++i) w[i] = rng.uniform(-limit, limit);
    }
    net.bump_version();
    return net;
}

void Mlp::bump_version() noexcept { version_ = g_version.fetch_add(1, std::memory_order_relaxed); }

void Mlp::forward(const Batch& x, ForwardCache& cache) const {
    if (x.rows != input_size()) throw ContractError("MLP input width mismatch");
    const std::size_t layers = layer_count();
    cache.activations.resize(layers + 1);
    cache.activations[0] = x;
    for (std::size_t l = 0; l < layers; ++l) {
        const int n_in = widths_[l];
        const int n_out = widths_[l + 1];
        Batch& z = cache.activations[l + 1];
        if (z.rows != n_out || z.cols != x.cols) z.resize(n_out, x.cols);
        affine(weight(l), bias(l), n_out, n_in, cache.activations[l], z);
        if (l + 1 < layers)
            tanh_inplace(z.data);
    }
    cache.net = this;
    cache.version = version_;
}

Batch Mlp::forward(const Batch& x) const {
    ForwardCache cache;
    forward(x, cache);
    return std::move(cache.activations.back());
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
    Batch in(static_cast<int>(x.size()), 1);
    std::copy(x.begin(), x.end(), in.data.begin());
    return forward(in).data;
}

void Mlp::backward(const ForwardCache& cache, const Batch& out_grad, std::span<double> param_grad,
                   Batch* input_grad) const {
    if (cache.net != this || cache.version != version_) throw ContractError("stale MLP forward cache");
    const std::size_t layers = layer_count();
    const int cols = cache.activations[0].cols;
    if (out_grad.rows != output_size() || out_grad.cols != cols) throw ContractError("MLP output gradient shape mismatch");
    if (param_grad.size() != params_.size()) throw ContractError("MLP parameter gradient size mismatch");

    Batch delta = out_grad;  // gradient w.r.t. the pre-activation of layer l+1
    Batch next;
    for (std::size_t l = layers; l-- > 0;) {
        const int n_in = widths_[l];
        const int n_out = widths_[l + 1];
        const Batch& a_in = cache.activations[l];
        double* gw = param_grad.data() + offsets_[l];
        double* gb = gw + static_cast<std::size_t>(n_in) * n_out;
        for (int o = 0; o < n_out; ++o) {
            const double* d = delta.row(o);
            gb[o] += lane_sum(d, cols);
            double* gwo = gw + static_cast<std::size_t>(o) * n_in;
            for (int k = 0; k < n_in; ++k) gwo[k] += lane_dot(d, a_in.row(k), cols);
        }
        if (l == 0 && input_grad == nullptr) break;
        next.resize(n_in, cols);
        const double* w = weight(l);
        for (int o = 0; o < n_out; ++o) {
            const double* d = delta.row(o);
            const double* wo = w + static_cast<std::size_t>(o) * n_in;
            for (int k = 0; k < n_in; ++k) {
                const double c = wo[k];
                double* nk = next.row(k);
                for (int p = 0; p < cols; ++p) nk[p] += c * d[p];
            }
        }
        if (l > 0) {
            // Through tanh: d/dz tanh(z) = 1 - tanh(z)^2.
            for (std::size_t i = 0; i < next.data.size(); ++i) {
                const double a = a_in.data[i];
                next.data[i] *= 1.0 - a * a;
            }
        }
        std::swap(delta, next);
    }
    if (input_grad) *input_grad = std::move(delta);
}

FourierEmbedding::FourierEmbedding(int m, double scale, std::uint64_t seed) : scale_(scale) {
    if (m < 1) throw ContractError("Fourier embedding needs at least one frequency");
    Rng rng(seed);
    freq_.resize(static_cast<std::size_t>(2 * m));
    for (double& f : freq_) f = scale * rng.normal();
}

FourierEmbedding::FourierEmbedding(std::vector<double> frequencies, double scale)
    : freq_(std::move(frequencies)), scale_(scale) {
    if (freq_.empty() || freq_.size() % 2 != 0) throw ContractError("Fourier frequency matrix must be m x 2");
}

void FourierEmbedding::embed(double xi0, double xi1, double* out) const noexcept {
    const int m = frequency_count();
    for (int i = 0; i < m; ++i) {
        const double arg = 2.0 * std::numbers::pi * (freq_[2 * i] * xi0 + freq_[2 * i + 1] * xi1);
        out[i] = std::sin(arg);
        out[m + i] = std::cos(arg);
    }
}

std::vector<double> FourierEmbedding::embed(double xi0, double xi1) const {
    std::vector<double> out(freq_.size());
    embed(xi0, xi1, out.data());
    return out;
}

double cosine_lr(double base, double final_lr, std::uint64_t t, std::uint64_t total) noexcept {
    if (total == 0) return final_lr;
    const double frac = std::min(1.0, static_cast<double>(t) / static_cast<double>(total));
    return final_lr + (base - final_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

double global_norm(std::span<const std::span<const double>> grads) noexcept {
    double ss = 0.0;
    for (const auto& g : grads)
        for (double v : g) ss += v * v;
    return std::sqrt(ss);
}

double adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
                 AdamState& state) {
    if (params.size() != grads.size()) throw ContractError("parameter and gradient groups differ");
    std::size_t total = 0;
    for (std::size_t gi = 0; gi < params.size(); ++gi) {
        if (params[gi].size() != grads[gi].size()) throw ContractError("parameter and gradient sizes differ");
        total += params[gi].size();
    }
    if (state.m.size() != total || state.v.size() != total) throw ContractError("optimizer state shape mismatch");
    if (state.step >= state.config.total_steps) throw ContractError("learning-rate schedule exhausted");
    for (const auto& g : grads)
        for (double v : g)
            if (!std::isfinite(v)) throw NumericError("non-finite gradient");

    const double norm = global_norm(grads);
    const double clip = norm > state.config.clip_norm ? state.config.clip_norm / norm : 1.0;
    const double lr = state.learning_rate();
    const auto& c = state.config;
    const double t = static_cast<double>(state.step + 1);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    std::size_t k = 0;
    for (std::size_t gi = 0; gi < params.size(); ++gi) {
        const auto p = params[gi];
        const auto g = grads[gi];
        for (std::size_t i = 0; i < p.size(); ++i, ++k) {
            const double gv = g[i] * clip;
            state.m[k] = c.beta1 * state.m[k] + (1.0 - c.beta1) * gv;
            state.v[k] = c.beta2 * state.v[k] + (1.0 - c.beta2) * gv * gv;
            const double mhat = state.m[k] / bc1;
            const double vhat = state.v[k] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + c.eps);
        }
    }
    ++state.step;
    return norm;
}

}  // namespace cldflood::nn
