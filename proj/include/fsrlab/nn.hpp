#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fsrlab/rng.hpp"
#include "fsrlab/tensor.hpp"

namespace fsrlab {

enum class Activation { Identity, Relu, LeakyRelu };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::LeakyRelu: return "leaky_relu";
    }
    return "?";
}

template <class T>
T leaky_relu(T x, T alpha) {
    return x >= T(0) ? x : alpha * x;
}

template <class T>
T leaky_relu_inverse(T y, T alpha) {
    return y >= T(0) ? y : y / alpha;
}

template <class T>
struct DenseLayerT {
    TensorT<T> weight; // [out x in]
    TensorT<T> bias;   // [out]
    Activation act = Activation::Identity;
    T alpha = T(0.2);

    std::size_t in() const { return weight.cols(); }
    std::size_t out() const { return weight.rows(); }
};

/// Shared trunk plus one output head per task. Single-head models are
/// heads of length 1. `version` is bumped on every parameter mutation so
/// a stale ForwardCache can be rejected in backward().
template <class T>
struct MultiHeadMlpT {
    std::vector<DenseLayerT<T>> trunk;
    std::vector<DenseLayerT<T>> heads;
    int active_head = 0;
    std::uint64_t version = 0;

    std::size_t input_dim() const {
        return trunk.empty() ? (heads.empty() ? 0 : heads[0].in()) : trunk[0].in();
    }
    std::size_t head_dim(int h) const { return heads[std::size_t(h)].out(); }
    std::size_t trunk_out_dim() const {
        return trunk.empty() ? input_dim() : trunk.back().out();
    }
};

using Mlp = MultiHeadMlpT<float>;
using DenseLayer = DenseLayerT<float>;

/// Canonical parameter order: trunk layer weights/biases in order, then
/// every head's weight/bias. Gradients, optimizer moments and Fisher
/// arrays all follow this indexing.
template <class T>
std::vector<TensorT<T>*> param_list(MultiHeadMlpT<T>& m) {
    std::vector<TensorT<T>*> ps;
    for (auto& l : m.trunk) {
        ps.push_back(&l.weight);
        ps.push_back(&l.bias);
    }
    for (auto& h : m.heads) {
        ps.push_back(&h.weight);
        ps.push_back(&h.bias);
    }
    return ps;
}

template <class T>
std::vector<const TensorT<T>*> param_list(const MultiHeadMlpT<T>& m) {
    std::vector<const TensorT<T>*> ps;
    for (auto& l : m.trunk) {
        ps.push_back(&l.weight);
        ps.push_back(&l.bias);
    }
    for (auto& h : m.heads) {
        ps.push_back(&h.weight);
        ps.push_back(&h.bias);
    }
    return ps;
}

template <class T>
std::size_t param_count(const MultiHeadMlpT<T>& m, bool include_bias = true) {
    std::size_t n = 0;
    for (auto* p : param_list(m))
        if (include_bias || p->shape.size() > 1) n += p->numel();
    return n;
}

/// Per-parameter gradients in param_list order. `active` marks the slots
/// that belong to the trunk and the head the gradients were computed for;
/// the optimizer only touches active slots.
template <class T>
struct GradientsT {
    std::vector<TensorT<T>> g;
    std::vector<char> active;

    void add_scaled(const GradientsT& other, T scale) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            for (std::size_t k = 0; k < g[i].data.size(); ++k)
                g[i].data[k] += scale * other.g[i].data[k];
            if (other.active[i]) active[i] = 1;
        }
    }
};

using Gradients = GradientsT<float>;

template <class T>
GradientsT<T> zero_gradients(const MultiHeadMlpT<T>& m, int active_head) {
    GradientsT<T> gr;
    const auto ps = param_list(m);
    gr.g.reserve(ps.size());
    for (auto* p : ps) gr.g.push_back(TensorT<T>::zeros(p->shape));
    gr.active.assign(ps.size(), 0);
    const std::size_t trunk_params = m.trunk.size() * 2;
    for (std::size_t i = 0; i < trunk_params; ++i) gr.active[i] = 1;
    if (active_head >= 0) {
        gr.active[trunk_params + 2 * std::size_t(active_head)] = 1;
        gr.active[trunk_params + 2 * std::size_t(active_head) + 1] = 1;
    }
    return gr;
}

template <class T>
struct ForwardCacheT {
    TensorT<T> input;
    std::vector<TensorT<T>> pre;  // pre-activations, trunk layers then head
    std::vector<TensorT<T>> post; // post-activations per trunk layer
    int head = 0;
    std::uint64_t model_version = 0;
};

using ForwardCache = ForwardCacheT<float>;

namespace detail {

template <class T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using CMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// y = x * W^T + 1 b^T
template <class T>
void dense_forward(const TensorT<T>& x, const DenseLayerT<T>& l, TensorT<T>& y) {
    const std::size_t B = x.rows();
    y = TensorT<T>::zeros({B, l.out()});
    CMatMap<T> X(x.data.data(), Eigen::Index(B), Eigen::Index(x.cols()));
    CMatMap<T> W(l.weight.data.data(), Eigen::Index(l.out()), Eigen::Index(l.in()));
    MatMap<T> Y(y.data.data(), Eigen::Index(B), Eigen::Index(l.out()));
    Y.noalias() = X * W.transpose();
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t c = 0; c < l.out(); ++c) y.data[r * l.out() + c] += l.bias.data[c];
}

template <class T>
void apply_activation(const DenseLayerT<T>& l, TensorT<T>& t) {
    switch (l.act) {
        case Activation::Identity: break;
        case Activation::Relu:
            for (auto& v : t.data) v = v > T(0) ? v : T(0);
            break;
        case Activation::LeakyRelu:
            for (auto& v : t.data) v = leaky_relu(v, l.alpha);
            break;
    }
}

// dpre = dpost .* act'(pre), elementwise from the recorded pre-activations
template <class T>
void activation_backward(const DenseLayerT<T>& l, const TensorT<T>& pre, TensorT<T>& d) {
    switch (l.act) {
        case Activation::Identity: break;
        case Activation::Relu:
            for (std::size_t i = 0; i < d.data.size(); ++i)
                if (pre.data[i] < T(0)) d.data[i] = T(0);
            break;
        case Activation::LeakyRelu:
            for (std::size_t i = 0; i < d.data.size(); ++i)
                if (pre.data[i] < T(0)) d.data[i] *= l.alpha;
            break;
    }
}

// Accumulates dW = dy^T x, db = colsum(dy); returns dx = dy W.
template <class T>
void dense_backward(const TensorT<T>& x, const DenseLayerT<T>& l, const TensorT<T>& dy,
                    TensorT<T>& dW, TensorT<T>& db, TensorT<T>* dx) {
    const std::size_t B = x.rows();
    CMatMap<T> X(x.data.data(), Eigen::Index(B), Eigen::Index(x.cols()));
    CMatMap<T> DY(dy.data.data(), Eigen::Index(B), Eigen::Index(l.out()));
    MatMap<T> GW(dW.data.data(), Eigen::Index(l.out()), Eigen::Index(l.in()));
    GW.noalias() += DY.transpose() * X;
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t c = 0; c < l.out(); ++c) db.data[c] += dy.data[r * l.out() + c];
    if (dx) {
        *dx = TensorT<T>::zeros({B, l.in()});
        CMatMap<T> W(l.weight.data.data(), Eigen::Index(l.out()), Eigen::Index(l.in()));
        MatMap<T> DX(dx->data.data(), Eigen::Index(B), Eigen::Index(l.in()));
        DX.noalias() = DY * W;
    }
}

} // namespace detail

/// Forward pass through trunk + one head for a batch [B x d].
template <class T>
std::pair<TensorT<T>, ForwardCacheT<T>> forward(const MultiHeadMlpT<T>& m,
                                                const TensorT<T>& batch, int head) {
    if (head < 0 || std::size_t(head) >= m.heads.size())
        throw Error("forward: head " + std::to_string(head) + " out of range (model has " +
                    std::to_string(m.heads.size()) + " heads)");
    if (batch.cols() != m.input_dim())
        throw Error("forward: input width " + std::to_string(batch.cols()) +
                    " does not match first layer input width " + std::to_string(m.input_dim()));

    ForwardCacheT<T> cache;
    cache.input = batch;
    cache.head = head;
    cache.model_version = m.version;

    const TensorT<T>* h = &cache.input;
    for (std::size_t li = 0; li < m.trunk.size(); ++li) {
        const auto& l = m.trunk[li];
        if (h->cols() != l.in())
            throw Error("forward: trunk layer " + std::to_string(li) + " expects width " +
                        std::to_string(l.in()) + ", got " + std::to_string(h->cols()));
        TensorT<T> pre;
        detail::dense_forward(*h, l, pre);
        cache.pre.push_back(pre);
        detail::apply_activation(l, pre);
        cache.post.push_back(std::move(pre));
        h = &cache.post.back();
    }

    const auto& hd = m.heads[std::size_t(head)];
    if (h->cols() != hd.in())
        throw Error("forward: head " + std::to_string(head) + " expects width " +
                    std::to_string(hd.in()) + ", got " + std::to_string(h->cols()));
    TensorT<T> pre;
    detail::dense_forward(*h, hd, pre);
    cache.pre.push_back(pre);
    TensorT<T> logits = pre;
    detail::apply_activation(hd, logits);
    return {std::move(logits), std::move(cache)};
}

/// Backward pass from d(loss)/d(logits). Only the trunk and the head used
/// in the forward pass receive gradients.
template <class T>
GradientsT<T> backward(const MultiHeadMlpT<T>& m, const ForwardCacheT<T>& cache,
                       const TensorT<T>& grad_logits) {
    if (cache.model_version != m.version)
        throw Error("backward: stale forward cache (model version " +
                    std::to_string(m.version) + ", cache version " +
                    std::to_string(cache.model_version) + ")");
    const int head = cache.head;
    auto grads = zero_gradients(m, head);
    const std::size_t nt = m.trunk.size();

    const auto& hd = m.heads[std::size_t(head)];
    TensorT<T> d = grad_logits;
    detail::activation_backward(hd, cache.pre[nt], d);

    const TensorT<T>& head_in = nt ? cache.post[nt - 1] : cache.input;
    TensorT<T> dx;
    detail::dense_backward(head_in, hd, d, grads.g[2 * nt + 2 * std::size_t(head)],
                           grads.g[2 * nt + 2 * std::size_t(head) + 1], nt ? &dx : nullptr);

    for (std::size_t li = nt; li-- > 0;) {
        const auto& l = m.trunk[li];
        detail::activation_backward(l, cache.pre[li], dx);
        const TensorT<T>& lin = li ? cache.post[li - 1] : cache.input;
        TensorT<T> dprev;
        detail::dense_backward(lin, l, dx, grads.g[2 * li], grads.g[2 * li + 1],
                               li ? &dprev : nullptr);
        dx = std::move(dprev);
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Losses. All return the loss value plus the gradient w.r.t. their logits
// argument; batch losses average over the batch.
// ---------------------------------------------------------------------------

template <class T>
struct LossGradT {
    double loss = 0.0;
    TensorT<T> grad;
};

using LossGrad = LossGradT<float>;

/// Numerically stabilized softmax of a single logit vector at temperature tau.
template <class T>
TensorT<T> softmax(const TensorT<T>& z, double tau = 1.0) {
    if (!(tau > 0.0)) throw Error("softmax: temperature must be positive");
    if (!z.all_finite()) throw Error("softmax: non-finite input");
    TensorT<T> p = TensorT<T>::zeros(z.shape);
    double mx = -1e300;
    for (T v : z.data) mx = std::max(mx, double(v) / tau);
    double sum = 0.0;
    for (std::size_t i = 0; i < z.data.size(); ++i) {
        const double e = std::exp(double(z.data[i]) / tau - mx);
        p.data[i] = T(e);
        sum += e;
    }
    for (auto& v : p.data) v = T(double(v) / sum);
    return p;
}

namespace detail {

// Row softmax at tau into `out`; returns nothing. Stabilized per row.
template <class T>
void softmax_rows(const TensorT<T>& z, double tau, TensorT<T>& out) {
    out = TensorT<T>::zeros(z.shape);
    const std::size_t B = z.rows(), K = z.cols();
    for (std::size_t r = 0; r < B; ++r) {
        double mx = -1e300;
        for (std::size_t c = 0; c < K; ++c) mx = std::max(mx, double(z.at(r, c)) / tau);
        double sum = 0.0;
        for (std::size_t c = 0; c < K; ++c) {
            const double e = std::exp(double(z.at(r, c)) / tau - mx);
            out.at(r, c) = T(e);
            sum += e;
        }
        for (std::size_t c = 0; c < K; ++c) out.at(r, c) = T(double(out.at(r, c)) / sum);
    }
}

} // namespace detail

/// Mean cross-entropy over a batch of logits [B x K] with integer labels.
/// grad = (softmax(z) - onehot(y)) / B.
template <class T>
LossGradT<T> cross_entropy(const TensorT<T>& logits, const std::vector<int>& labels) {
    const std::size_t B = logits.rows(), K = logits.cols();
    if (labels.size() != B)
        throw Error("cross_entropy: batch size " + std::to_string(B) + " but " +
                    std::to_string(labels.size()) + " labels");
    LossGradT<T> out;
    detail::softmax_rows(logits, 1.0, out.grad);
    double loss = 0.0;
    for (std::size_t r = 0; r < B; ++r) {
        const int y = labels[r];
        if (y < 0 || std::size_t(y) >= K)
            throw Error("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                        std::to_string(K) + ")");
        loss -= std::log(std::max(double(out.grad.at(r, std::size_t(y))), 1e-300));
    }
    out.loss = loss / double(B);
    for (std::size_t r = 0; r < B; ++r) {
        out.grad.at(r, std::size_t(labels[r])) -= T(1);
        for (std::size_t c = 0; c < K; ++c) out.grad.at(r, c) /= T(double(B));
    }
    return out;
}

/// KL(softmax(z_teacher/tau) || softmax(z_student/tau)) for one logit
/// vector pair; gradient w.r.t. the student logits.
template <class T>
LossGradT<T> kl_distill(const TensorT<T>& z_teacher, const TensorT<T>& z_student, double tau) {
    if (!z_teacher.same_shape(z_student))
        throw Error("kl_distill: shape mismatch " + shape_str(z_teacher.shape) + " vs " +
                    shape_str(z_student.shape));
    const TensorT<T> pt = softmax(z_teacher, tau);
    const TensorT<T> ps = softmax(z_student, tau);
    LossGradT<T> out;
    out.grad = TensorT<T>::zeros(z_student.shape);
    double loss = 0.0;
    for (std::size_t i = 0; i < pt.data.size(); ++i) {
        const double p = double(pt.data[i]), q = double(ps.data[i]);
        if (p > 0.0) loss += p * (std::log(p) - std::log(std::max(q, 1e-300)));
        out.grad.data[i] = T((q - p) / tau);
    }
    out.loss = std::max(loss, 0.0);
    return out;
}

/// Squared Euclidean distance between logit vectors; grad = 2 (z - z_ref).
template <class T>
LossGradT<T> logit_match(const TensorT<T>& z, const TensorT<T>& z_ref) {
    if (!z.same_shape(z_ref))
        throw Error("logit_match: shape mismatch " + shape_str(z.shape) + " vs " +
                    shape_str(z_ref.shape));
    LossGradT<T> out;
    out.grad = TensorT<T>::zeros(z.shape);
    double loss = 0.0;
    for (std::size_t i = 0; i < z.data.size(); ++i) {
        const double d = double(z.data[i]) - double(z_ref.data[i]);
        loss += d * d;
        out.grad.data[i] = T(2.0 * d);
    }
    out.loss = loss;
    return out;
}

namespace detail {
inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
} // namespace detail

/// Sum over classes of CE(g(z_ref_k), g(z_k)) with g the logistic
/// function; grad_k = g(z_k) - g(z_ref_k).
template <class T>
LossGradT<T> sigmoid_ce(const TensorT<T>& z, const TensorT<T>& z_ref) {
    if (!z.same_shape(z_ref))
        throw Error("sigmoid_ce: shape mismatch " + shape_str(z.shape) + " vs " +
                    shape_str(z_ref.shape));
    LossGradT<T> out;
    out.grad = TensorT<T>::zeros(z.shape);
    double loss = 0.0;
    for (std::size_t i = 0; i < z.data.size(); ++i) {
        const double zi = double(z.data[i]), ri = double(z_ref.data[i]);
        const double p = 1.0 / (1.0 + std::exp(-ri));
        // CE(p, g(z)) = p*softplus(-z) + (1-p)*softplus(z)
        loss += p * detail::softplus(-zi) + (1.0 - p) * detail::softplus(zi);
        const double q = 1.0 / (1.0 + std::exp(-zi));
        out.grad.data[i] = T(q - p);
    }
    out.loss = loss;
    return out;
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

enum class OptKind { Sgd, Adam };

struct OptimizerConfig {
    OptKind kind = OptKind::Sgd;
    float lr = 1e-3f;
    float weight_decay = 0.0f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

template <class T>
struct OptimizerStateT {
    OptimizerConfig cfg;
    long step = 0;
    std::vector<TensorT<T>> m, v; // adam first/second moments

    static OptimizerStateT make(const OptimizerConfig& cfg, const MultiHeadMlpT<T>& model) {
        OptimizerStateT st;
        st.cfg = cfg;
        if (cfg.kind == OptKind::Adam) {
            for (auto* p : param_list(model)) {
                st.m.push_back(TensorT<T>::zeros(p->shape));
                st.v.push_back(TensorT<T>::zeros(p->shape));
            }
        }
        return st;
    }
};

using OptimizerState = OptimizerStateT<float>;

template <class T>
void sgd_step(MultiHeadMlpT<T>& model, const GradientsT<T>& grads, OptimizerStateT<T>& st) {
    auto ps = param_list(model);
    if (ps.size() != grads.g.size()) throw Error("sgd_step: gradient count mismatch");
    const T lr = T(st.cfg.lr), wd = T(st.cfg.weight_decay);
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (!grads.active[i]) continue;
        if (!ps[i]->same_shape(grads.g[i]))
            throw Error("sgd_step: shape mismatch at parameter " + std::to_string(i));
        auto& th = ps[i]->data;
        const auto& g = grads.g[i].data;
        for (std::size_t k = 0; k < th.size(); ++k) th[k] -= lr * (g[k] + wd * th[k]);
    }
    ++st.step;
    ++model.version;
}

template <class T>
void adam_step(MultiHeadMlpT<T>& model, const GradientsT<T>& grads, OptimizerStateT<T>& st) {
    auto ps = param_list(model);
    if (ps.size() != grads.g.size()) throw Error("adam_step: gradient count mismatch");
    if (st.m.size() != ps.size()) throw Error("adam_step: optimizer state not initialized");
    ++st.step;
    const double b1 = st.cfg.beta1, b2 = st.cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, double(st.step));
    const double bc2 = 1.0 - std::pow(b2, double(st.step));
    const double lr = st.cfg.lr, wd = st.cfg.weight_decay, eps = st.cfg.eps;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (!grads.active[i]) continue;
        auto& th = ps[i]->data;
        auto& m = st.m[i].data;
        auto& v = st.v[i].data;
        const auto& g = grads.g[i].data;
        for (std::size_t k = 0; k < th.size(); ++k) {
            const double gk = double(g[k]) + wd * double(th[k]);
            m[k] = T(b1 * double(m[k]) + (1.0 - b1) * gk);
            v[k] = T(b2 * double(v[k]) + (1.0 - b2) * gk * gk);
            const double mhat = double(m[k]) / bc1;
            const double vhat = double(v[k]) / bc2;
            th[k] -= T(lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
    ++model.version;
}

template <class T>
void optimizer_step(MultiHeadMlpT<T>& model, const GradientsT<T>& grads,
                    OptimizerStateT<T>& st) {
    if (st.cfg.kind == OptKind::Adam)
        adam_step(model, grads, st);
    else
        sgd_step(model, grads, st);
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// Orthogonal matrix via QR of a standard-normal draw, with the R diagonal
/// sign fixed so the factorization is unique. Rectangular outputs have
/// orthonormal rows or columns, whichever dimension is smaller. The
/// factorization runs in double regardless of T.
template <class T>
TensorT<T> orthogonal_init(std::size_t rows, std::size_t cols, Rng& rng) {
    const std::size_t big = std::max(rows, cols), small = std::min(rows, cols);
    detail::EMat<double> A(big, small);
    for (Eigen::Index r = 0; r < A.rows(); ++r)
        for (Eigen::Index c = 0; c < A.cols(); ++c) A(r, c) = rng.normal();
    Eigen::HouseholderQR<detail::EMat<double>> qr(A);
    detail::EMat<double> Q =
        qr.householderQ() * detail::EMat<double>::Identity(Eigen::Index(big),
                                                           Eigen::Index(small));
    detail::EMat<double> R = qr.matrixQR().template triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < Eigen::Index(small); ++j)
        if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);

    TensorT<T> out = TensorT<T>::zeros({rows, cols});
    if (rows >= cols) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
                out.data[r * cols + c] = T(Q(Eigen::Index(r), Eigen::Index(c)));
    } else {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
                out.data[r * cols + c] = T(Q(Eigen::Index(c), Eigen::Index(r)));
    }
    return out;
}

/// Kaiming-style uniform init scaled by fan-in; bias zero.
template <class T>
DenseLayerT<T> make_dense(std::size_t in, std::size_t out, Activation act, T alpha, Rng& rng) {
    DenseLayerT<T> l;
    l.act = act;
    l.alpha = alpha;
    l.weight = TensorT<T>::zeros({out, in});
    l.bias = TensorT<T>::zeros({out});
    double gain = 1.0;
    if (act == Activation::Relu) gain = std::sqrt(2.0);
    if (act == Activation::LeakyRelu) gain = std::sqrt(2.0 / (1.0 + double(alpha) * alpha));
    const double bound = gain * std::sqrt(3.0 / double(in));
    for (auto& w : l.weight.data) w = T(rng.uniform(-bound, bound));
    return l;
}

/// Build a trunk of hidden layers plus one linear head per entry of
/// `head_dims`, initialized from the given stream.
template <class T>
MultiHeadMlpT<T> build_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                           const std::vector<std::size_t>& head_dims, Activation act, T alpha,
                           Rng rng) {
    MultiHeadMlpT<T> m;
    std::size_t w = input_dim;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        Rng r = rng.stream("init-trunk", i);
        m.trunk.push_back(make_dense<T>(w, hidden[i], act, alpha, r));
        w = hidden[i];
    }
    for (std::size_t h = 0; h < head_dims.size(); ++h) {
        Rng r = rng.stream("init-head", h);
        m.heads.push_back(make_dense<T>(w, head_dims[h], Activation::Identity, alpha, r));
    }
    m.version = 1;
    return m;
}

} // namespace fsrlab
