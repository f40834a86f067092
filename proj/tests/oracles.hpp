// Test-only oracles, kept independent of the library's compute paths:
// naive triple-loop linear algebra, central finite differences, and a
// hand-rolled LU determinant.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "fsrlab/nn.hpp"
#include "fsrlab/rng.hpp"

namespace oracle {

using fsrlab::GradientsT;
using fsrlab::MultiHeadMlpT;
using fsrlab::TensorT;

// Layer-by-layer forward with plain loops (no Eigen).
inline TensorT<double> naive_forward(const MultiHeadMlpT<double>& m,
                                     const TensorT<double>& batch, int head) {
    auto act = [](const fsrlab::DenseLayerT<double>& l, double v) {
        switch (l.act) {
            case fsrlab::Activation::Identity: return v;
            case fsrlab::Activation::Relu: return v > 0.0 ? v : 0.0;
            case fsrlab::Activation::LeakyRelu: return v >= 0.0 ? v : double(l.alpha) * v;
        }
        return v;
    };
    TensorT<double> h = batch;
    auto apply = [&](const fsrlab::DenseLayerT<double>& l) {
        TensorT<double> out = TensorT<double>::zeros({h.rows(), l.out()});
        for (std::size_t r = 0; r < h.rows(); ++r)
            for (std::size_t o = 0; o < l.out(); ++o) {
                double s = l.bias.data[o];
                for (std::size_t i = 0; i < l.in(); ++i)
                    s += h.at(r, i) * l.weight.at(o, i);
                out.at(r, o) = act(l, s);
            }
        h = std::move(out);
    };
    for (const auto& l : m.trunk) apply(l);
    apply(m.heads[std::size_t(head)]);
    return h;
}

// Central finite differences of `loss(model)` against the analytic
// gradients returned by `loss_grads(model)`, on up to n_coords randomly
// chosen parameter coordinates. Returns the worst relative error.
inline double gradient_check(
    MultiHeadMlpT<double>& model,
    const std::function<std::pair<double, GradientsT<double>>(MultiHeadMlpT<double>&)>&
        loss_grads,
    int n_coords, fsrlab::Rng& rng, double h = 1e-5) {
    const auto [loss0, grads] = loss_grads(model);
    (void)loss0;
    auto params = fsrlab::param_list(model);

    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t pi = 0; pi < params.size(); ++pi)
        if (grads.active[pi])
            for (std::size_t k = 0; k < params[pi]->numel(); ++k) coords.push_back({pi, k});
    rng.shuffle(coords);
    if (int(coords.size()) > n_coords) coords.resize(std::size_t(n_coords));

    double worst = 0.0;
    for (auto [pi, k] : coords) {
        double& theta = params[pi]->data[k];
        const double orig = theta;
        theta = orig + h;
        const double lp = loss_grads(model).first;
        theta = orig - h;
        const double lm = loss_grads(model).first;
        theta = orig;
        const double fd = (lp - lm) / (2.0 * h);
        const double an = grads.g[pi].data[k];
        if (std::abs(fd) < 1e-10 && std::abs(an) < 1e-10) continue;
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
        worst = std::max(worst, rel);
    }
    return worst;
}

// Determinant via LU with partial pivoting, plain loops.
inline double lu_determinant(const TensorT<double>& m) {
    const std::size_t n = m.rows();
    std::vector<std::vector<double>> a(n, std::vector<double>(n));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) a[r][c] = m.at(r, c);
    double det = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (a[piv][col] == 0.0) return 0.0;
        if (piv != col) {
            std::swap(a[piv], a[col]);
            det = -det;
        }
        det *= a[col][col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
        }
    }
    return det;
}

template <class T>
MultiHeadMlpT<double> to_double(const MultiHeadMlpT<T>& m) {
    MultiHeadMlpT<double> out;
    for (const auto& l : m.trunk) {
        fsrlab::DenseLayerT<double> d;
        d.weight = fsrlab::tensor_cast<double>(l.weight);
        d.bias = fsrlab::tensor_cast<double>(l.bias);
        d.act = l.act;
        d.alpha = double(l.alpha);
        out.trunk.push_back(std::move(d));
    }
    for (const auto& l : m.heads) {
        fsrlab::DenseLayerT<double> d;
        d.weight = fsrlab::tensor_cast<double>(l.weight);
        d.bias = fsrlab::tensor_cast<double>(l.bias);
        d.act = l.act;
        d.alpha = double(l.alpha);
        out.heads.push_back(std::move(d));
    }
    out.active_head = m.active_head;
    out.version = m.version;
    return out;
}

} // namespace oracle
