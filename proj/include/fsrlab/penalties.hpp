#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "fsrlab/nn.hpp"

namespace fsrlab {

/// Mean cross-entropy over a task minibatch with gradients through the
/// whole model (weight decay is the optimizer's business).
template <class T>
double task_batch_loss(const MultiHeadMlpT<T>& model, const TensorT<T>& x,
                       const std::vector<int>& y, int head, GradientsT<T>& grads) {
    auto [logits, cache] = forward(model, x, head);
    auto lg = cross_entropy(logits, y);
    grads.add_scaled(backward(model, cache, lg.grad), T(1));
    return lg.loss;
}

/// Replay entries that share one head, gathered into batch form.
template <class T>
struct ReplayGroupT {
    TensorT<T> inputs;     // [n x d]
    TensorT<T> ref_logits; // [n x K]
    std::vector<int> labels;
    int head = 0;
    std::size_t count() const { return labels.size(); }
};

enum class FsrKind { Logit, Distill, LogitLab };

/// FSR penalty over sampled memory entries: lambda times the mean
/// per-entry loss, where the per-entry loss is the squared logit distance
/// (Logit), the tau-tempered distillation KL (Distill), or the logit term
/// plus label_weight times the stored-label cross-entropy (LogitLab).
/// Entries are evaluated on their recorded heads.
template <class T>
double fsr_penalty(const MultiHeadMlpT<T>& model, const std::vector<ReplayGroupT<T>>& groups,
                   FsrKind kind, double lambda, double tau, double label_weight,
                   GradientsT<T>& grads) {
    std::size_t total = 0;
    for (const auto& g : groups) total += g.count();
    if (total == 0) throw Error("fsr penalty: empty memory");
    double penalty = 0.0;
    for (const auto& g : groups) {
        auto [logits, cache] = forward(model, g.inputs, g.head);
        const std::size_t n = g.count(), K = logits.cols();
        TensorT<T> dlogits = TensorT<T>::zeros(logits.shape);
        for (std::size_t i = 0; i < n; ++i) {
            TensorT<T> z = TensorT<T>::zeros({K}), zr = TensorT<T>::zeros({K});
            for (std::size_t c = 0; c < K; ++c) {
                z.data[c] = logits.at(i, c);
                zr.data[c] = g.ref_logits.at(i, c);
            }
            LossGradT<T> lg;
            if (kind == FsrKind::Distill)
                lg = kl_distill(zr, z, tau);
            else
                lg = logit_match(z, zr);
            penalty += lambda * lg.loss / double(total);
            for (std::size_t c = 0; c < K; ++c)
                dlogits.at(i, c) += T(lambda / double(total)) * lg.grad.data[c];
        }
        if (kind == FsrKind::LogitLab) {
            auto ce = cross_entropy(logits, g.labels); // grad already / n_group
            penalty += label_weight * ce.loss * double(n) / double(total);
            for (std::size_t i = 0; i < dlogits.data.size(); ++i)
                dlogits.data[i] += T(label_weight * double(n) / double(total)) *
                                   T(double(ce.grad.data[i]));
        }
        grads.add_scaled(backward(model, cache, dlogits), T(1));
    }
    return penalty;
}

/// iCaRL-style regularizer: lambda times the mean over entries of the
/// classwise logistic cross-entropy against the stored logits.
template <class T>
double icarl_penalty(const MultiHeadMlpT<T>& model, const std::vector<ReplayGroupT<T>>& groups,
                     double lambda, GradientsT<T>& grads) {
    std::size_t total = 0;
    for (const auto& g : groups) total += g.count();
    if (total == 0) throw Error("icarl penalty: empty memory");
    double penalty = 0.0;
    for (const auto& g : groups) {
        auto [logits, cache] = forward(model, g.inputs, g.head);
        const std::size_t n = g.count(), K = logits.cols();
        TensorT<T> dlogits = TensorT<T>::zeros(logits.shape);
        for (std::size_t i = 0; i < n; ++i) {
            TensorT<T> z = TensorT<T>::zeros({K}), zr = TensorT<T>::zeros({K});
            for (std::size_t c = 0; c < K; ++c) {
                z.data[c] = logits.at(i, c);
                zr.data[c] = g.ref_logits.at(i, c);
            }
            auto lg = sigmoid_ce(z, zr);
            penalty += lambda * lg.loss / double(total);
            for (std::size_t c = 0; c < K; ++c)
                dlogits.at(i, c) += T(lambda / double(total)) * lg.grad.data[c];
        }
        grads.add_scaled(backward(model, cache, dlogits), T(1));
    }
    return penalty;
}

/// Anchor parameters and accumulated Fisher diagonal, in param_list order.
template <class T>
struct EwcStateT {
    std::vector<TensorT<T>> anchor;
    std::vector<TensorT<T>> fisher;
    bool initialized() const { return !anchor.empty(); }
};

using EwcState = EwcStateT<float>;

/// (lambda/2) * sum_i F_i (theta_i - anchor_i)^2, gradient
/// lambda * F .* (theta - anchor), added directly onto the parameter slots.
template <class T>
double ewc_penalty(const MultiHeadMlpT<T>& model, const EwcStateT<T>& state, double lambda,
                   GradientsT<T>& grads) {
    if (!state.initialized()) return 0.0;
    auto ps = param_list(model);
    if (ps.size() != state.anchor.size())
        throw Error("ewc penalty: state has " + std::to_string(state.anchor.size()) +
                    " parameter slots, model has " + std::to_string(ps.size()));
    double penalty = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (!ps[i]->same_shape(state.anchor[i]))
            throw Error("ewc penalty: shape mismatch at parameter " + std::to_string(i));
        const auto& th = ps[i]->data;
        const auto& an = state.anchor[i].data;
        const auto& f = state.fisher[i].data;
        auto& g = grads.g[i].data;
        for (std::size_t k = 0; k < th.size(); ++k) {
            const double d = double(th[k]) - double(an[k]);
            penalty += 0.5 * lambda * double(f[k]) * d * d;
            g[k] += T(lambda * double(f[k]) * d);
        }
    }
    return penalty;
}

/// LwF term: lambda times the mean tau-distillation KL between the frozen
/// snapshot's logits and the current model's logits on the current batch,
/// averaged over the given heads.
template <class T>
double lwf_penalty(const MultiHeadMlpT<T>& snapshot, const MultiHeadMlpT<T>& model,
                   const TensorT<T>& x, const std::vector<int>& heads, double lambda,
                   double tau, GradientsT<T>& grads) {
    if (heads.empty()) return 0.0;
    double penalty = 0.0;
    const double scale = 1.0 / double(heads.size());
    for (int h : heads) {
        auto [ref_logits, ref_cache] = forward(snapshot, x, h);
        auto [logits, cache] = forward(model, x, h);
        const std::size_t B = x.rows(), K = logits.cols();
        TensorT<T> dlogits = TensorT<T>::zeros(logits.shape);
        for (std::size_t i = 0; i < B; ++i) {
            TensorT<T> z = TensorT<T>::zeros({K}), zr = TensorT<T>::zeros({K});
            for (std::size_t c = 0; c < K; ++c) {
                z.data[c] = logits.at(i, c);
                zr.data[c] = ref_logits.at(i, c);
            }
            auto lg = kl_distill(zr, z, tau);
            penalty += scale * lambda * lg.loss / double(B);
            for (std::size_t c = 0; c < K; ++c)
                dlogits.at(i, c) += T(scale * lambda / double(B)) * lg.grad.data[c];
        }
        grads.add_scaled(backward(model, cache, dlogits), T(1));
    }
    return penalty;
}

/// Adds the mean per-example squared log-likelihood gradient (empirical
/// Fisher diagonal) of the given examples into `state.fisher` and moves the
/// anchor to the current parameters.
template <class T>
void ewc_accumulate_fisher(const MultiHeadMlpT<T>& model, const TensorT<T>& inputs,
                           const std::vector<int>& labels, int head, EwcStateT<T>& state) {
    auto ps = param_list(model);
    if (!state.initialized()) {
        for (auto* p : ps) {
            state.anchor.push_back(*p);
            state.fisher.push_back(TensorT<T>::zeros(p->shape));
        }
    }
    const std::size_t n = labels.size();
    const std::size_t d = inputs.cols();
    for (std::size_t i = 0; i < n; ++i) {
        TensorT<T> x = TensorT<T>::zeros({1, d});
        for (std::size_t c = 0; c < d; ++c) x.data[c] = inputs.at(i, c);
        auto [logits, cache] = forward(model, x, head);
        auto lg = cross_entropy(logits, {labels[i]});
        auto g = backward(model, cache, lg.grad);
        for (std::size_t pi = 0; pi < ps.size(); ++pi) {
            auto& f = state.fisher[pi].data;
            const auto& gv = g.g[pi].data;
            for (std::size_t k = 0; k < f.size(); ++k)
                f[k] += T(double(gv[k]) * double(gv[k]) / double(n));
        }
    }
    for (std::size_t pi = 0; pi < ps.size(); ++pi) state.anchor[pi] = *ps[pi];
}

} // namespace fsrlab
