#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "cldflood/error.hpp"
#include "cldflood/nn.hpp"
#include "cldflood/rng.hpp"
#include "doctest.h"

using namespace cldflood;
using namespace cldflood::nn;

namespace {

// Straightforward per-sample forward pass over the flat parameter layout.
std::vector<double> naive_forward(const Mlp& net, std::vector<double> x) {
    const auto& w = net.widths();
    const auto p = net.params();
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
        const int in = w[l], out = w[l + 1];
        std::vector<double> y(static_cast<std::size_t>(out));
        for (int o = 0; o < out; ++o) {
            double s = p[off + static_cast<std::size_t>(in) * out + o];
            for (int k = 0; k < in; ++k) s += p[off + static_cast<std::size_t>(o) * in + k] * x[k];
            y[o] = l + 2 < w.size() ? std::tanh(s) : s;
        }
        off += static_cast<std::size_t>(in) * out + out;
        x = std::move(y);
    }
    return x;
}

Batch random_batch(int rows, int cols, Rng& rng) {
    Batch b(rows, cols);
    for (double& v : b.data) v = rng.uniform(-1.0, 1.0);
    return b;
}

// Scalar objective sum(out * weights) so out_grad = weights.
double objective(const Mlp& net, const Batch& x, const Batch& wts) {
    const Batch y = net.forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * wts.data[i];
    return s;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4}); }

}  // namespace

TEST_CASE("zero network outputs zero") {
    const Mlp net({3, 5, 2});
    for (double v : net.forward(std::vector<double>{0.3, -2.0, 7.0})) CHECK(v == 0.0);
    CHECK(net.param_count() == 3u * 5 + 5 + 5 * 2 + 2);
}

TEST_CASE("single linear layer by hand") {
    Mlp net({2, 2});
    auto p = net.mutable_params();
    // W = [[1, 2], [3, 4]], b = [0.5, -1]
    const double vals[] = {1, 2, 3, 4, 0.5, -1};
    std::copy(std::begin(vals), std::end(vals), p.begin());
    const auto y = net.forward(std::vector<double>{1.0, -1.0});
    CHECK(y[0] == 1 - 2 + 0.5);
    CHECK(y[1] == 3 - 4 - 1);
}

TEST_CASE("forward matches a naive re-implementation") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const Mlp net = Mlp::glorot({3, 7, 5, 2}, 100 + trial);
        const Batch x = random_batch(3, 13, rng);
        const Batch y = net.forward(x);
        for (int c = 0; c < x.cols; ++c) {
            const auto ref = naive_forward(net, {x.at(0, c), x.at(1, c), x.at(2, c)});
            for (int o = 0; o < 2; ++o) CHECK(std::abs(y.at(o, c) - ref[o]) <= 1e-14);
        }
    }
}

TEST_CASE("batch width does not change per-sample results") {
    const Mlp net = Mlp::glorot({4, 16, 16, 3}, 9);
    Rng rng(2);
    const Batch x = random_batch(4, 37, rng);
    const Batch y = net.forward(x);
    for (int c = 0; c < x.cols; ++c) {
        const auto one = net.forward(std::vector<double>{x.at(0, c), x.at(1, c), x.at(2, c), x.at(3, c)});
        for (int o = 0; o < 3; ++o) CHECK(one[o] == y.at(o, c));
    }
}

TEST_CASE("input shape mismatch") {
    const Mlp net = Mlp::glorot({3, 4, 1}, 1);
    CHECK_THROWS_AS(net.forward(Batch(2, 5)), ContractError);
    CHECK_THROWS_AS(Mlp({3}), ContractError);
    CHECK_THROWS_AS(Mlp({3, 0, 2}), ContractError);
}

TEST_CASE("glorot init is seeded") {
    const Mlp a = Mlp::glorot({5, 8, 2}, 7), b = Mlp::glorot({5, 8, 2}, 7), c = Mlp::glorot({5, 8, 2}, 8);
    CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
    CHECK(!std::equal(a.params().begin(), a.params().end(), c.params().begin()));
    const double lim = std::sqrt(6.0 / (5 + 8));
    for (std::size_t i = 0; i < 5 * 8; ++i) CHECK(std::abs(a.params()[i]) <= lim);
    for (std::size_t i = 5 * 8; i < 5 * 8 + 8; ++i) CHECK(a.params()[i] == 0.0);
}

TEST_CASE("linear layer weight gradient is the outer product") {
    Mlp net = Mlp::glorot({3, 2}, 5);
    Batch x(3, 1);
    x.data = {0.5, -1.0, 2.0};
    ForwardCache cache;
    net.forward(x, cache);
    Batch g(2, 1);
    g.data = {1.5, -0.25};
    std::vector<double> pg(net.param_count(), 0.0);
    net.backward(cache, g, pg, nullptr);
    for (int o = 0; o < 2; ++o) {
        for (int k = 0; k < 3; ++k) CHECK(pg[o * 3 + k] == g.data[o] * x.data[k]);
        CHECK(pg[6 + o] == g.data[o]);
    }
}

TEST_CASE("backward accumulates") {
    const Mlp net = Mlp::glorot({2, 6, 1}, 3);
    Rng rng(1);
    const Batch x = random_batch(2, 4, rng);
    ForwardCache cache;
    net.forward(x, cache);
    const Batch g = random_batch(1, 4, rng);
    std::vector<double> once(net.param_count(), 0.0), twice(net.param_count(), 0.0);
    net.backward(cache, g, once, nullptr);
    net.backward(cache, g, twice, nullptr);
    net.backward(cache, g, twice, nullptr);
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-15));
}

TEST_CASE("parameter and input gradients match central differences") {
    Rng rng(11);
    const std::vector<std::vector<int>> shapes{{2, 8, 1}, {5, 16, 16, 3}, {4, 32, 32, 32, 32, 2}};
    int probes = 0;
    double worst = 0.0;
    for (std::size_t s = 0; s < shapes.size(); ++s) {
        Mlp net = Mlp::glorot(shapes[s], 20 + s);
        const Batch x = random_batch(net.input_size(), 6, rng);
        const Batch wts = random_batch(net.output_size(), 6, rng);
        ForwardCache cache;
        net.forward(x, cache);
        std::vector<double> pg(net.param_count(), 0.0);
        Batch ig;
        net.backward(cache, wts, pg, &ig);

        const double h = 1e-6;
        for (int k = 0; k < 40; ++k, ++probes) {
            const std::size_t i = static_cast<std::size_t>(rng.uniform() * net.param_count());
            const double orig = net.params()[i];
            net.mutable_params()[i] = orig + h;
            const double fp = objective(net, x, wts);
            net.mutable_params()[i] = orig - h;
            const double fm = objective(net, x, wts);
            net.mutable_params()[i] = orig;
            const double fd = (fp - fm) / (2 * h);
            worst = std::max(worst, rel_err(pg[i], fd));
        }
        for (int r = 0; r < x.rows; ++r)
            for (int c = 0; c < x.cols; ++c) {
                Batch xp = x, xm = x;
                xp.at(r, c) += h;
                xm.at(r, c) -= h;
                const double fd = (objective(net, xp, wts) - objective(net, xm, wts)) / (2 * h);
                CHECK(rel_err(ig.at(r, c), fd) < 1e-5);
            }
    }
    MESSAGE("parameter probes " << probes << ", worst relative error " << worst);
    CHECK(worst < 1e-5);
}

TEST_CASE("stale or foreign caches are rejected") {
    Mlp net = Mlp::glorot({2, 3, 1}, 1);
    const Mlp other = Mlp::glorot({2, 3, 1}, 2);
    Batch x(2, 1);
    ForwardCache cache;
    net.forward(x, cache);
    std::vector<double> pg(net.param_count(), 0.0);
    Batch g(1, 1);
    CHECK_NOTHROW(net.backward(cache, g, pg, nullptr));
    CHECK_THROWS_AS(other.backward(cache, g, pg, nullptr), ContractError);
    net.mutable_params()[0] += 1.0;
    CHECK_THROWS_AS(net.backward(cache, g, pg, nullptr), ContractError);
}

TEST_CASE("Fourier embedding") {
    const FourierEmbedding e(10, 1.0, 3);
    CHECK(e.output_size() == 20);
    const auto z = e.embed(0.0, 0.0);
    for (int i = 0; i < 10; ++i) {
        CHECK(z[i] == 0.0);
        CHECK(z[10 + i] == 1.0);
    }
    const FourierEmbedding same(10, 1.0, 3);
    CHECK(same.frequencies() == e.frequencies());

    const FourierEmbedding integer({1, 0, 0, 2, -3, 1, 2, 5}, 1.0);
    Rng rng(6);
    for (int k = 0; k < 200; ++k) {
        const double a = rng.uniform(), b = rng.uniform();
        const auto base = integer.embed(a, b);
        const auto sx = integer.embed(a + 1.0, b);
        const auto sy = integer.embed(a, b - 1.0);
        for (std::size_t i = 0; i < base.size(); ++i) {
            CHECK(std::abs(sx[i] - base[i]) < 1e-12);
            CHECK(std::abs(sy[i] - base[i]) < 1e-12);
        }
    }
    CHECK_THROWS_AS(FourierEmbedding(std::vector<double>{1, 2, 3}, 1.0), ContractError);
}

TEST_CASE("cosine schedule") {
    CHECK(cosine_lr(1e-3, 1e-6, 0, 100) == 1e-3);
    CHECK(cosine_lr(1e-3, 1e-6, 100, 100) == doctest::Approx(1e-6).epsilon(1e-12));
    CHECK(cosine_lr(1e-3, 1e-6, 50, 100) == doctest::Approx(0.5 * (1e-3 + 1e-6)));
    double prev = 1.0;
    for (std::uint64_t t = 0; t <= 1000; ++t) {
        const double lr = cosine_lr(1e-3, 1e-6, t, 1000);
        CHECK(lr <= prev);
        prev = lr;
    }
}

TEST_CASE("Adam: zero gradients leave parameters alone") {
    std::vector<double> p{1.0, -2.0, 3.0}, g(3, 0.0);
    AdamState st(AdamConfig{}, 3);
    st.config.total_steps = 10;
    std::span<double> ps[] = {p};
    std::span<const double> gs[] = {g};
    CHECK(adam_step(ps, gs, st) == 0.0);
    CHECK(p == std::vector<double>{1.0, -2.0, 3.0});
    CHECK(st.step == 1u);

    // With moments left over, a zero gradient only decays them.
    st.m = {0.1, 0.2, -0.3};
    st.v = {0.01, 0.04, 0.09};
    const auto before = p;
    (void)adam_step(ps, gs, st);
    CHECK(st.m[0] == doctest::Approx(0.09));
    CHECK(st.v[0] == doctest::Approx(0.01 * 0.999));
    CHECK(p != before);
}

TEST_CASE("Adam: clipping to norm 1") {
    std::vector<double> a(3, 0.0), b(2, 0.0);
    const std::vector<double> ga{6.0, 0.0, 0.0}, gb{0.0, 8.0};  // norm 10
    AdamState st(AdamConfig{}, 5);
    st.config.total_steps = 5;
    std::span<double> ps[] = {a, b};
    std::span<const double> gs[] = {ga, gb};
    CHECK(adam_step(ps, gs, st) == doctest::Approx(10.0));
    double n2 = 0.0;
    for (double m : st.m) n2 += (m / (1 - st.config.beta1)) * (m / (1 - st.config.beta1));
    CHECK(std::abs(std::sqrt(n2) - 1.0) < 1e-12);

    // Below the threshold nothing is scaled.
    AdamState s2(AdamConfig{}, 5);
    s2.config.total_steps = 5;
    const std::vector<double> sa{0.3, 0.0, 0.0}, sb{0.0, 0.4};
    std::span<const double> small[] = {sa, sb};
    (void)adam_step(ps, small, s2);
    CHECK(s2.m[0] == doctest::Approx(0.1 * 0.3).epsilon(1e-14));
}

TEST_CASE("Adam: errors") {
    std::vector<double> p(2, 0.0), g{1.0, std::nan("")};
    AdamState st(AdamConfig{}, 2);
    st.config.total_steps = 1;
    std::span<double> ps[] = {p};
    std::span<const double> gs[] = {g};
    CHECK_THROWS_AS(adam_step(ps, gs, st), NumericError);
    g[1] = 0.0;
    CHECK_NOTHROW(adam_step(ps, gs, st));
    CHECK_THROWS_AS(adam_step(ps, gs, st), ContractError);
    AdamState wrong(AdamConfig{}, 3);
    wrong.config.total_steps = 5;
    CHECK_THROWS_AS(adam_step(ps, gs, wrong), ContractError);
}

TEST_CASE("tanh kernel against std::tanh") {
    std::vector<double> x;
    for (int i = -400000; i <= 400000; ++i) x.push_back(i * 6e-5);
    for (double v : {1e-300, -1e-300, 1e-8, 0.6249999999, 0.625, 0.6250000001, 19.0, 21.9, 22.0, 30.0, 1e300})
        x.push_back(v);
    std::vector<double> y = x;
    tanh_inplace(y);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double ref = std::tanh(x[i]);
        if (ref != 0.0) worst = std::max(worst, std::abs(y[i] - ref) / std::abs(ref));
    }
    MESSAGE("worst relative error " << worst);
    CHECK(worst < 5e-16);

    std::vector<double> special{0.0, -0.0, INFINITY, -INFINITY, NAN};
    tanh_inplace(special);
    CHECK(special[0] == 0.0);
    CHECK(std::signbit(special[1]));
    CHECK(special[2] == 1.0);
    CHECK(special[3] == -1.0);
    CHECK(std::isnan(special[4]));
}
