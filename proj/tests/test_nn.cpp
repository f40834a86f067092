#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fsrlab/checkpoint.hpp"
#include "fsrlab/nn.hpp"
#include "oracles.hpp"

using namespace fsrlab;

namespace {

Mlp zero_model(std::size_t d, std::size_t k) {
    Mlp m;
    DenseLayer head;
    head.weight = Tensor::zeros({k, d});
    head.bias = Tensor::zeros({k});
    m.heads.push_back(head);
    m.version = 1;
    return m;
}

Mlp seeded_model(std::size_t d, const std::vector<std::size_t>& hidden, std::size_t k,
                 std::uint64_t seed) {
    return build_mlp<float>(d, hidden, {k}, Activation::LeakyRelu, 0.2f, Rng(seed));
}

Tensor random_batch(std::size_t n, std::size_t d, std::uint64_t seed) {
    Tensor x = Tensor::zeros({n, d});
    Rng rng(seed);
    for (auto& v : x.data) v = float(rng.uniform());
    return x;
}

} // namespace

TEST_CASE("forward: zero model maps anything to zero logits") {
    auto m = zero_model(4, 3);
    auto [logits, cache] = forward(m, random_batch(5, 4, 1), 0);
    for (float v : logits.data) CHECK(v == 0.0f);
}

TEST_CASE("forward: identity trunk and head reproduce the input") {
    Mlp m;
    DenseLayer id;
    id.weight = Tensor::zeros({3, 3});
    for (int i = 0; i < 3; ++i) id.weight.at(std::size_t(i), std::size_t(i)) = 1.0f;
    id.bias = Tensor::zeros({3});
    id.act = Activation::Identity;
    m.trunk.push_back(id);
    m.heads.push_back(id);
    m.version = 1;
    const Tensor x = random_batch(4, 3, 2);
    auto [logits, cache] = forward(m, x, 0);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        CHECK(logits.data[i] == doctest::Approx(x.data[i]).epsilon(1e-7));
}

TEST_CASE("forward: seeded 2-layer model matches the naive matrix oracle") {
    auto m = seeded_model(6, {5}, 4, 42);
    const Tensor x = random_batch(7, 6, 3);
    auto [logits, cache] = forward(m, x, 0);
    const auto md = oracle::to_double(m);
    const auto ref = oracle::naive_forward(md, tensor_cast<double>(x), 0);
    for (std::size_t i = 0; i < logits.data.size(); ++i)
        CHECK(double(logits.data[i]) == doctest::Approx(ref.data[i]).epsilon(1e-6));
}

TEST_CASE("forward: shape errors name the layer and widths") {
    auto m = seeded_model(6, {5}, 4, 1);
    CHECK_THROWS_WITH_AS(forward(m, random_batch(2, 7, 1), 0),
                         doctest::Contains("input width 7"), Error);
    CHECK_THROWS_AS(forward(m, random_batch(2, 6, 1), 3), Error);
}

TEST_CASE("backward: zero grad_logits give zero gradients") {
    auto m = seeded_model(6, {5}, 4, 7);
    auto [logits, cache] = forward(m, random_batch(3, 6, 4), 0);
    auto grads = backward(m, cache, Tensor::zeros({3, 4}));
    for (const auto& g : grads.g)
        for (float v : g.data) CHECK(v == 0.0f);
}

TEST_CASE("backward: 1-layer linear squared loss matches X^T(XW-Y)/B") {
    const std::size_t d = 5, k = 3, B = 8;
    Mlp m = zero_model(d, k);
    Rng rng(11);
    for (auto& v : m.heads[0].weight.data) v = float(rng.normal());
    const Tensor x = random_batch(B, d, 5);
    Tensor y = Tensor::zeros({B, k});
    for (auto& v : y.data) v = float(rng.uniform());

    auto [logits, cache] = forward(m, x, 0);
    // loss = 1/(2B) sum ||logits - y||^2, d loss/d logits = (logits - y)/B
    Tensor dlogits = Tensor::zeros({B, k});
    for (std::size_t i = 0; i < dlogits.data.size(); ++i)
        dlogits.data[i] = (logits.data[i] - y.data[i]) / float(B);
    auto grads = backward(m, cache, dlogits);

    for (std::size_t o = 0; o < k; ++o)
        for (std::size_t i = 0; i < d; ++i) {
            double want = 0.0;
            for (std::size_t b = 0; b < B; ++b)
                want += double(logits.at(b, o) - y.at(b, o)) * double(x.at(b, i)) / double(B);
            CHECK(double(grads.g[0].at(o, i)) == doctest::Approx(want).epsilon(1e-5));
        }
}

TEST_CASE("backward: stale cache is rejected") {
    auto m = seeded_model(4, {4}, 2, 9);
    auto [logits, cache] = forward(m, random_batch(2, 4, 6), 0);
    ++m.version; // parameters notionally updated
    CHECK_THROWS_WITH_AS(backward(m, cache, Tensor::zeros({2, 2})),
                         doctest::Contains("stale"), Error);
}

TEST_CASE("backward: only trunk and active head receive gradients") {
    auto m = build_mlp<float>(4, {6}, {3, 2}, Activation::LeakyRelu, 0.2f, Rng(3));
    auto [logits, cache] = forward(m, random_batch(2, 4, 7), 1);
    Tensor d = Tensor::zeros({2, 2});
    for (auto& v : d.data) v = 1.0f;
    auto grads = backward(m, cache, d);
    CHECK(grads.active[0]);       // trunk weight
    CHECK(grads.active[1]);       // trunk bias
    CHECK_FALSE(grads.active[2]); // head 0 weight
    CHECK_FALSE(grads.active[3]); // head 0 bias
    CHECK(grads.active[4]);       // head 1 weight
    for (float v : grads.g[2].data) CHECK(v == 0.0f);
    bool any = false;
    for (float v : grads.g[4].data) any = any || v != 0.0f;
    CHECK(any);
}

// --- losses ---------------------------------------------------------------

TEST_CASE("softmax: constant logits give the uniform distribution") {
    Tensor z({4}, {2.5f, 2.5f, 2.5f, 2.5f});
    const auto p = softmax(z, 1.0);
    for (float v : p.data) CHECK(double(v) == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("softmax: invariant to constant shifts up to 1e-9") {
    Rng rng(13);
    for (double c : {-100.0, -3.0, 0.5, 41.0, 100.0}) {
        TensorT<double> z = TensorT<double>::zeros({6});
        for (auto& v : z.data) v = rng.normal() * 5.0;
        TensorT<double> zs = z;
        for (auto& v : zs.data) v += c;
        const auto p1 = softmax(z, 1.0), p2 = softmax(zs, 1.0);
        for (std::size_t i = 0; i < p1.data.size(); ++i)
            CHECK(std::abs(p1.data[i] - p2.data[i]) < 1e-9);
    }
}

TEST_CASE("softmax: [0, ln 3] gives [0.25, 0.75]") {
    Tensor z({2}, {0.0f, float(std::log(3.0))});
    const auto p = softmax(z, 1.0);
    CHECK(double(p.data[0]) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(double(p.data[1]) == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("softmax: rejects non-finite input and non-positive temperature") {
    Tensor z({2}, {0.0f, std::numeric_limits<float>::infinity()});
    CHECK_THROWS_AS(softmax(z, 1.0), Error);
    Tensor ok({2}, {0.0f, 1.0f});
    CHECK_THROWS_AS(softmax(ok, 0.0), Error);
}

TEST_CASE("cross_entropy: peaked logits give near-zero loss") {
    Tensor z = Tensor::zeros({1, 3});
    z.at(0, 0) = 10.0f;
    const auto lg = cross_entropy(z, {0});
    CHECK(lg.loss < 1e-4);
    // and the loss keeps shrinking as the margin grows
    z.at(0, 0) = 20.0f;
    CHECK(cross_entropy(z, {0}).loss < lg.loss);
}

TEST_CASE("cross_entropy: uniform logits give ln K") {
    for (std::size_t K : {std::size_t(2), std::size_t(10), std::size_t(31)}) {
        Tensor z = Tensor::zeros({3, K});
        const auto lg = cross_entropy(z, {0, int(K) - 1, int(K / 2)});
        CHECK(lg.loss == doctest::Approx(std::log(double(K))).epsilon(1e-6));
    }
}

TEST_CASE("cross_entropy: seeded batch matches the direct-summation oracle") {
    Rng rng(17);
    const std::size_t B = 6, K = 4;
    TensorT<double> z = TensorT<double>::zeros({B, K});
    for (auto& v : z.data) v = rng.normal() * 3.0;
    std::vector<int> y;
    for (std::size_t i = 0; i < B; ++i) y.push_back(int(rng.below(K)));

    double want = 0.0;
    for (std::size_t r = 0; r < B; ++r) {
        double denom = 0.0;
        for (std::size_t c = 0; c < K; ++c) denom += std::exp(z.at(r, c));
        want -= std::log(std::exp(z.at(r, std::size_t(y[r]))) / denom);
    }
    want /= double(B);
    const auto lg = cross_entropy(z, y);
    CHECK(lg.loss == doctest::Approx(want).epsilon(1e-6));
    for (std::size_t r = 0; r < B; ++r) {
        double denom = 0.0;
        for (std::size_t c = 0; c < K; ++c) denom += std::exp(z.at(r, c));
        for (std::size_t c = 0; c < K; ++c) {
            const double p = std::exp(z.at(r, c)) / denom;
            const double g = (p - (int(c) == y[r] ? 1.0 : 0.0)) / double(B);
            CHECK(lg.grad.at(r, c) == doctest::Approx(g).epsilon(1e-6));
        }
    }
}

TEST_CASE("cross_entropy: label out of range is an error") {
    Tensor z = Tensor::zeros({1, 3});
    CHECK_THROWS_AS(cross_entropy(z, {3}), Error);
    CHECK_THROWS_AS(cross_entropy(z, {-1}), Error);
}

TEST_CASE("kl_distill: equal and shifted logits give zero") {
    Tensor z({3}, {1.0f, -2.0f, 0.5f});
    CHECK(kl_distill(z, z, 2.0).loss == doctest::Approx(0.0));
    Tensor zs = z;
    for (auto& v : zs.data) v += 7.5f;
    CHECK(kl_distill(z, zs, 2.0).loss == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("kl_distill: direct-summation value for [1,0] vs [0,1] at tau 2") {
    TensorT<double> zt({2}, {1.0, 0.0}), zs({2}, {0.0, 1.0});
    const double tau = 2.0;
    double pt[2], ps[2];
    double st = 0.0, ss = 0.0;
    for (int i = 0; i < 2; ++i) {
        pt[i] = std::exp(zt.data[std::size_t(i)] / tau);
        ps[i] = std::exp(zs.data[std::size_t(i)] / tau);
        st += pt[i];
        ss += ps[i];
    }
    double want = 0.0;
    for (int i = 0; i < 2; ++i)
        want += pt[i] / st * (std::log(pt[i] / st) - std::log(ps[i] / ss));
    const auto lg = kl_distill(zt, zs, tau);
    CHECK(lg.loss == doctest::Approx(want).epsilon(1e-9));
    CHECK(lg.loss > 0.0);
}

TEST_CASE("logit matching is the stronger requirement: shifts change it") {
    // kl_distill(z, z + c) = 0 while logit_match(z + c, z) = K c^2
    Rng rng(23);
    for (double c : {0.5, -1.25, 3.0}) {
        TensorT<double> z = TensorT<double>::zeros({5});
        for (auto& v : z.data) v = rng.normal();
        TensorT<double> zs = z;
        for (auto& v : zs.data) v += c;
        CHECK(kl_distill(z, zs, 2.0).loss == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(logit_match(zs, z).loss == doctest::Approx(5.0 * c * c).epsilon(1e-9));
    }
    Tensor a({2}, {0.0f, 0.0f}), b({2}, {1.0f, 1.0f});
    CHECK(logit_match(a, b).loss == doctest::Approx(2.0));
}

TEST_CASE("logit_match: arithmetic example and gradient") {
    Tensor z({2}, {1.0f, 2.0f}), zr({2}, {0.0f, 0.0f});
    const auto lg = logit_match(z, zr);
    CHECK(lg.loss == doctest::Approx(5.0));
    CHECK(lg.grad.data[0] == doctest::Approx(2.0));
    CHECK(lg.grad.data[1] == doctest::Approx(4.0));
    CHECK(logit_match(z, z).loss == doctest::Approx(0.0));
    Tensor bad({3}, {0, 0, 0});
    CHECK_THROWS_AS(logit_match(z, bad), Error);
}

TEST_CASE("sigmoid_ce: minimum at z == z_ref is the reference entropy, grad 0") {
    TensorT<double> z({3}, {0.7, -1.2, 4.0});
    const auto lg = sigmoid_ce(z, z);
    double want = 0.0;
    for (double v : z.data) {
        const double p = 1.0 / (1.0 + std::exp(-v));
        want += -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
    }
    CHECK(lg.loss == doctest::Approx(want).epsilon(1e-9));
    for (double g : lg.grad.data) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("sigmoid_ce: z = z_ref = 0 gives ln 2") {
    TensorT<double> z({1}, {0.0});
    CHECK(sigmoid_ce(z, z).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("sigmoid_ce: saturation hides a logit gap of 5") {
    TensorT<double> z({1}, {5.0}), zr({1}, {10.0});
    const auto lg = sigmoid_ce(z, zr);
    const double g5 = 1.0 / (1.0 + std::exp(-5.0));
    const double g10 = 1.0 / (1.0 + std::exp(-10.0));
    CHECK(lg.grad.data[0] == doctest::Approx(g5 - g10).epsilon(1e-9));
    CHECK(std::abs(lg.grad.data[0]) < 0.007);
    // while the logit-matching gradient for the same pair is -10
    CHECK(logit_match(z, zr).grad.data[0] == doctest::Approx(-10.0));
}

TEST_CASE("sigmoid_ce: analytic gradient equals g(z) - g(z_ref) elementwise") {
    Rng rng(31);
    TensorT<double> z = TensorT<double>::zeros({64}), zr = TensorT<double>::zeros({64});
    for (auto& v : z.data) v = rng.normal() * 4.0;
    for (auto& v : zr.data) v = rng.normal() * 4.0;
    const auto lg = sigmoid_ce(z, zr);
    for (std::size_t i = 0; i < z.data.size(); ++i) {
        const double want =
            1.0 / (1.0 + std::exp(-z.data[i])) - 1.0 / (1.0 + std::exp(-zr.data[i]));
        CHECK(std::abs(lg.grad.data[i] - want) < 1e-9);
    }
}

// --- gradient checks through the model -------------------------------------

namespace {

std::pair<double, GradientsT<double>> model_loss(MultiHeadMlpT<double>& m,
                                                 const TensorT<double>& x,
                                                 const std::vector<int>& y, int which) {
    auto [logits, cache] = forward(m, x, 0);
    const std::size_t B = x.rows(), K = logits.cols();
    double loss = 0.0;
    TensorT<double> dlogits = TensorT<double>::zeros(logits.shape);
    if (which == 0) {
        auto lg = cross_entropy(logits, y);
        loss = lg.loss;
        dlogits = lg.grad;
    } else {
        for (std::size_t r = 0; r < B; ++r) {
            TensorT<double> zr = TensorT<double>::zeros({K});
            TensorT<double> ref = TensorT<double>::zeros({K});
            for (std::size_t c = 0; c < K; ++c) {
                zr.data[c] = logits.at(r, c);
                ref.data[c] = 0.3 * double(c) - 0.5; // fixed teacher logits
            }
            LossGradT<double> lg;
            if (which == 1) lg = kl_distill(ref, zr, 2.0);
            if (which == 2) lg = logit_match(zr, ref);
            if (which == 3) lg = sigmoid_ce(zr, ref);
            loss += lg.loss / double(B);
            for (std::size_t c = 0; c < K; ++c) dlogits.at(r, c) += lg.grad.data[c] / double(B);
        }
    }
    auto grads = backward(m, cache, dlogits);
    return {loss, grads};
}

} // namespace

TEST_CASE("gradient check: every loss through a 3-layer model vs central differences") {
    auto mf = seeded_model(7, {6, 5}, 4, 99);
    auto m = oracle::to_double(mf);
    const auto x = tensor_cast<double>(random_batch(5, 7, 21));
    const std::vector<int> y = {0, 3, 1, 2, 0};
    for (int which : {0, 1, 2, 3}) {
        Rng pick(1000 + std::uint64_t(which));
        const double worst = oracle::gradient_check(
            m, [&](MultiHeadMlpT<double>& mm) { return model_loss(mm, x, y, which); }, 100,
            pick);
        INFO("loss kind ", which);
        CHECK(worst < 1e-4);
    }
}

// --- optimizers -------------------------------------------------------------

TEST_CASE("sgd_step: spec arithmetic") {
    auto m = zero_model(1, 1);
    m.heads[0].weight.data[0] = 1.0f;
    auto grads = zero_gradients(m, 0);

    OptimizerConfig cfg;
    cfg.kind = OptKind::Sgd;
    cfg.lr = 1e-3f;
    cfg.weight_decay = 0.0f;
    auto st = OptimizerState::make(cfg, m);

    SUBCASE("g=0, wd=0 leaves parameters untouched") {
        sgd_step(m, grads, st);
        CHECK(m.heads[0].weight.data[0] == 1.0f);
    }
    SUBCASE("theta=1, g=1 -> 0.999") {
        grads.g[0].data[0] = 1.0f;
        sgd_step(m, grads, st);
        CHECK(m.heads[0].weight.data[0] == doctest::Approx(0.999f));
    }
    SUBCASE("decay only: theta=1, g=0, wd=1e-4 -> 0.9999999 (64-bit probe)") {
        MultiHeadMlpT<double> md;
        DenseLayerT<double> head;
        head.weight = TensorT<double>({1, 1}, {1.0});
        head.bias = TensorT<double>::zeros({1});
        md.heads.push_back(head);
        md.version = 1;
        auto gd = zero_gradients(md, 0);
        OptimizerConfig dcfg = cfg;
        dcfg.weight_decay = 1e-4f;
        auto std_ = OptimizerStateT<double>::make(dcfg, md);
        sgd_step(md, gd, std_);
        CHECK(md.heads[0].weight.data[0] == doctest::Approx(0.9999999).epsilon(1e-12));
    }
}

TEST_CASE("adam_step: zero gradient at t=0 leaves parameters unchanged") {
    auto m = seeded_model(3, {3}, 2, 5);
    const Mlp before = m;
    auto grads = zero_gradients(m, 0);
    OptimizerConfig cfg;
    cfg.kind = OptKind::Adam;
    cfg.lr = 1e-4f;
    auto st = OptimizerState::make(cfg, m);
    adam_step(m, grads, st);
    auto pa = param_list(m);
    auto pb = param_list(before);
    for (std::size_t i = 0; i < pa.size(); ++i)
        for (std::size_t k = 0; k < pa[i]->numel(); ++k)
            CHECK(pa[i]->data[k] == pb[i]->data[k]);
    CHECK(st.step == 1);
}

TEST_CASE("adam_step: first-step value matches the bias-corrected formula") {
    // scalar theta=0, g=1: m_hat = 1, v_hat = 1 -> step = lr/(1+eps)
    MultiHeadMlpT<double> m;
    DenseLayerT<double> head;
    head.weight = TensorT<double>::zeros({1, 1});
    head.bias = TensorT<double>::zeros({1});
    m.heads.push_back(head);
    m.version = 1;
    auto grads = zero_gradients(m, 0);
    grads.g[0].data[0] = 1.0;
    OptimizerConfig cfg;
    cfg.kind = OptKind::Adam;
    cfg.lr = 1e-4f;
    cfg.weight_decay = 0.0f;
    auto st = OptimizerStateT<double>::make(cfg, m);
    adam_step(m, grads, st);
    const double want = -1e-4 * 1.0 / (std::sqrt(1.0) + 1e-8);
    CHECK(m.heads[0].weight.data[0] == doctest::Approx(want).epsilon(1e-10));
    CHECK(m.heads[0].weight.data[0] == doctest::Approx(-9.99999995e-5).epsilon(1e-7));

    SUBCASE("constant gradient keeps per-step movement near lr") {
        const double before = m.heads[0].weight.data[0];
        grads.g[0].data[0] = 1.0;
        adam_step(m, grads, st);
        const double delta = m.heads[0].weight.data[0] - before;
        CHECK(delta < 0.0);
        CHECK(std::abs(delta) == doctest::Approx(1e-4).epsilon(0.02));
    }
}

TEST_CASE("optimizers: deterministic trajectories and finite shapes") {
    auto run = [](std::uint64_t seed) {
        auto m = seeded_model(5, {4}, 3, seed);
        OptimizerConfig cfg;
        cfg.kind = OptKind::Adam;
        cfg.lr = 1e-3f;
        cfg.weight_decay = 1e-4f;
        auto st = OptimizerState::make(cfg, m);
        Rng rng(77);
        for (int step = 0; step < 20; ++step) {
            Tensor x = random_batch(4, 5, 100 + std::uint64_t(step));
            std::vector<int> y = {int(rng.below(3)), int(rng.below(3)), int(rng.below(3)),
                                  int(rng.below(3))};
            auto [logits, cache] = forward(m, x, 0);
            auto lg = cross_entropy(logits, y);
            auto grads = backward(m, cache, lg.grad);
            adam_step(m, grads, st);
        }
        return m;
    };
    const auto a = run(12), b = run(12);
    auto pa = param_list(a), pb = param_list(b);
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->shape == pb[i]->shape);
        for (std::size_t k = 0; k < pa[i]->numel(); ++k) {
            CHECK(pa[i]->data[k] == pb[i]->data[k]); // bitwise
            CHECK(std::isfinite(pa[i]->data[k]));
        }
    }
}

// --- init -------------------------------------------------------------------

TEST_CASE("orthogonal_init: 1x1 is a sign") {
    Rng rng(41);
    const auto q = orthogonal_init<float>(1, 1, rng);
    CHECK(std::abs(q.data[0]) == doctest::Approx(1.0f).epsilon(1e-6));
}

TEST_CASE("orthogonal_init: 784x784 has Q^T Q = I within 1e-5") {
    Rng rng(42);
    const auto q = orthogonal_init<float>(784, 784, rng);
    double worst = 0.0;
    for (std::size_t i = 0; i < 784; ++i)
        for (std::size_t j = i; j < 784; ++j) {
            double dot = 0.0;
            for (std::size_t r = 0; r < 784; ++r)
                dot += double(q.at(r, i)) * double(q.at(r, j));
            worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
        }
    CHECK(worst < 1e-5);
}

TEST_CASE("orthogonal_init: rectangular Gram of the smaller dimension is I") {
    Rng rng(43);
    SUBCASE("wide") {
        const auto q = orthogonal_init<float>(3, 9, rng); // orthonormal rows
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                double dot = 0.0;
                for (std::size_t c = 0; c < 9; ++c)
                    dot += double(q.at(i, c)) * double(q.at(j, c));
                CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-5);
            }
    }
    SUBCASE("tall") {
        const auto q = orthogonal_init<float>(9, 3, rng); // orthonormal columns
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                double dot = 0.0;
                for (std::size_t r = 0; r < 9; ++r)
                    dot += double(q.at(r, i)) * double(q.at(r, j));
                CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-5);
            }
    }
}

TEST_CASE("orthogonal_init: determinant magnitude 1 by the LU oracle") {
    Rng rng(44);
    const auto q = orthogonal_init<double>(24, 24, rng);
    CHECK(std::abs(std::abs(oracle::lu_determinant(q)) - 1.0) < 1e-4);
}

TEST_CASE("leaky_relu: values and the piecewise inverse") {
    CHECK(leaky_relu(1.0f, 0.2f) == 1.0f);
    CHECK(leaky_relu(-1.0f, 0.2f) == doctest::Approx(-0.2f));
    for (double x : {-3.0, 0.0, 3.0})
        CHECK(leaky_relu_inverse(leaky_relu(x, 0.2), 0.2) == doctest::Approx(x));
}

// --- checkpoint ---------------------------------------------------------------

TEST_CASE("model checkpoint round-trips bit-exactly with rng states") {
    auto m = build_mlp<float>(6, {5, 4}, {3, 2}, Activation::LeakyRelu, 0.2f, Rng(55));
    m.active_head = 1;
    RngStates states;
    states["train"] = Rng(9).state();
    const std::string path = "test_model.ckpt";
    save_model(path, m, states);
    const auto loaded = load_model(path);
    CHECK(loaded.model.trunk.size() == m.trunk.size());
    CHECK(loaded.model.heads.size() == m.heads.size());
    CHECK(loaded.model.active_head == 1);
    auto pa = param_list(m);
    auto pb = param_list(loaded.model);
    for (std::size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i]->shape == pb[i]->shape);
        for (std::size_t k = 0; k < pa[i]->numel(); ++k)
            CHECK(pa[i]->data[k] == pb[i]->data[k]);
    }
    CHECK(loaded.rng.at("train") == Rng(9).state());
    CHECK(loaded.model.trunk[0].act == Activation::LeakyRelu);
    std::remove(path.c_str());
}

TEST_CASE("rng: named streams are independent of draw order and reproducible") {
    Rng a(123), b(123);
    (void)a.next();
    (void)a.next(); // consuming the parent does not shift derived streams
    CHECK(a.stream("x").next() == b.stream("x").next());
    CHECK(a.stream("x").next() != b.stream("y").next());
    CHECK(a.stream("x", 1).next() != b.stream("x", 2).next());
    Rng c(123);
    std::vector<int> v{1, 2, 3, 4, 5, 6, 7}, w{1, 2, 3, 4, 5, 6, 7};
    Rng s1 = c.stream("shuffle", 0, 0), s2 = c.stream("shuffle", 0, 0);
    s1.shuffle(v);
    s2.shuffle(w);
    CHECK(v == w);
}
