#include "fsrlab/memory.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace fsrlab {

const char* selection_name(SelectionKind k) {
    switch (k) {
        case SelectionKind::StratifiedRandom: return "stratified_random";
        case SelectionKind::Herding: return "herding";
        case SelectionKind::GradientBased: return "gradient";
    }
    return "?";
}

SelectionKind selection_from_name(const std::string& name) {
    if (name == "stratified_random" || name == "random") return SelectionKind::StratifiedRandom;
    if (name == "herding") return SelectionKind::Herding;
    if (name == "gradient" || name == "gradient_based") return SelectionKind::GradientBased;
    throw Error("unknown selection strategy '" + name + "'");
}

// --- EpisodicMemory ----------------------------------------------------------

void EpisodicMemory::add_task(int task_id, std::vector<MemoryEntry> entries) {
    if (has_task(task_id))
        throw Error("memory already holds entries for task " + std::to_string(task_id));
    tasks_.emplace_back(task_id, std::move(entries));
}

bool EpisodicMemory::has_task(int task_id) const {
    for (const auto& [id, _] : tasks_)
        if (id == task_id) return true;
    return false;
}

std::size_t EpisodicMemory::total_entries() const {
    std::size_t n = 0;
    for (const auto& [_, es] : tasks_) n += es.size();
    return n;
}

const std::vector<MemoryEntry>& EpisodicMemory::task_entries(int task_id) const {
    for (const auto& [id, es] : tasks_)
        if (id == task_id) return es;
    throw Error("memory holds no entries for task " + std::to_string(task_id));
}

std::vector<const MemoryEntry*> EpisodicMemory::all_entries() const {
    std::vector<const MemoryEntry*> out;
    out.reserve(total_entries());
    for (const auto& [_, es] : tasks_)
        for (const auto& e : es) out.push_back(&e);
    return out;
}

std::vector<const MemoryEntry*> EpisodicMemory::sample(std::size_t n, Rng& rng) const {
    auto all = all_entries();
    if (n >= all.size()) return all;
    // partial Fisher-Yates: first n slots end up a uniform sample
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + std::size_t(rng.below(all.size() - i));
        std::swap(all[i], all[j]);
    }
    all.resize(n);
    return all;
}

// --- Selection ---------------------------------------------------------------

namespace {

std::map<int, std::vector<std::size_t>> indices_by_class(const LabeledDataset& ds) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
    return by_class;
}

} // namespace

std::vector<std::size_t> select_stratified_random(const LabeledDataset& ds,
                                                  std::size_t per_class, Rng& rng) {
    auto by_class = indices_by_class(ds);
    std::vector<std::size_t> out;
    for (auto& [cls, idx] : by_class) {
        if (idx.size() < per_class)
            throw Error("class " + std::to_string(cls) + " has " + std::to_string(idx.size()) +
                        " examples, need " + std::to_string(per_class));
        for (std::size_t i = 0; i < per_class; ++i) {
            const std::size_t j = i + std::size_t(rng.below(idx.size() - i));
            std::swap(idx[i], idx[j]);
        }
        out.insert(out.end(), idx.begin(), idx.begin() + long(per_class));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> select_herding_class(const LabeledDataset& ds,
                                              const std::vector<std::size_t>& candidates,
                                              std::size_t m) {
    if (m > candidates.size())
        throw Error("herding: m=" + std::to_string(m) + " exceeds class population " +
                    std::to_string(candidates.size()));
    const std::size_t d = ds.input_dim();
    std::vector<double> mean(d, 0.0);
    for (std::size_t i : candidates)
        for (std::size_t k = 0; k < d; ++k) mean[k] += double(ds.row(i)[k]);
    for (auto& v : mean) v /= double(candidates.size());

    std::vector<char> chosen(candidates.size(), 0);
    std::vector<double> sel_sum(d, 0.0);
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < m; ++t) {
        double best = 0.0;
        std::size_t best_ci = candidates.size();
        for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
            if (chosen[ci]) continue;
            const float* x = ds.row(candidates[ci]);
            // distance of the updated running mean to the class mean,
            // scaled by (t+1)^2 which does not change the argmin
            double obj = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = double(t + 1) * mean[k] - sel_sum[k] - double(x[k]);
                obj += diff * diff;
            }
            if (best_ci == candidates.size() || obj < best) {
                best = obj;
                best_ci = ci;
            }
        }
        chosen[best_ci] = 1;
        const float* x = ds.row(candidates[best_ci]);
        for (std::size_t k = 0; k < d; ++k) sel_sum[k] += double(x[k]);
        out.push_back(candidates[best_ci]);
    }
    return out;
}

std::vector<std::size_t> select_herding(const LabeledDataset& ds, std::size_t per_class) {
    auto by_class = indices_by_class(ds);
    std::vector<std::size_t> out;
    for (auto& [cls, idx] : by_class) {
        if (idx.size() < per_class)
            throw Error("class " + std::to_string(cls) + " has " + std::to_string(idx.size()) +
                        " examples, need " + std::to_string(per_class));
        auto sel = select_herding_class(ds, idx, per_class);
        out.insert(out.end(), sel.begin(), sel.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> per_example_grad_norms(const Mlp& model, const Tensor& batch,
                                           const std::vector<int>& labels, int head) {
    auto [logits, cache] = forward(model, batch, head);
    const std::size_t B = batch.rows();
    const std::size_t K = logits.cols();

    // per-example cross-entropy gradient (unaveraged)
    Tensor delta = Tensor::zeros({B, K});
    detail::softmax_rows(logits, 1.0, delta);
    for (std::size_t r = 0; r < B; ++r) delta.at(r, std::size_t(labels[r])) -= 1.0f;

    // For a dense layer the per-example weight gradient is the outer
    // product delta_l x_{l-1}^T, so its squared norm is
    // |delta_l|^2 * (|x_{l-1}|^2 + 1) counting the bias term.
    std::vector<double> score(B, 0.0);
    const std::size_t nt = model.trunk.size();
    auto accumulate = [&](const DenseLayerT<float>& layer, const Tensor& pre, const Tensor& in,
                          Tensor& d) {
        detail::activation_backward(layer, pre, d);
        for (std::size_t r = 0; r < B; ++r) {
            double dn = 0.0, xn = 0.0;
            for (std::size_t c = 0; c < layer.out(); ++c) {
                const double v = double(d.at(r, c));
                dn += v * v;
            }
            for (std::size_t c = 0; c < layer.in(); ++c) {
                const double v = double(in.at(r, c));
                xn += v * v;
            }
            score[r] += dn * (xn + 1.0);
        }
    };

    const auto& hd = model.heads[std::size_t(head)];
    accumulate(hd, cache.pre[nt], nt ? cache.post[nt - 1] : cache.input, delta);
    using detail::CMatMap;
    using detail::MatMap;
    for (std::size_t li = nt; li-- > 0;) {
        const auto& upper = li + 1 < nt ? model.trunk[li + 1] : hd;
        Tensor prev = Tensor::zeros({B, upper.in()});
        CMatMap<float> D(delta.data.data(), Eigen::Index(B), Eigen::Index(upper.out()));
        CMatMap<float> W(upper.weight.data.data(), Eigen::Index(upper.out()),
                         Eigen::Index(upper.in()));
        MatMap<float> P(prev.data.data(), Eigen::Index(B), Eigen::Index(upper.in()));
        P.noalias() = D * W;
        delta = std::move(prev);
        accumulate(model.trunk[li], cache.pre[li], li ? cache.post[li - 1] : cache.input, delta);
    }
    for (auto& s : score) s = std::sqrt(s);
    return score;
}

std::vector<std::size_t> select_gradient_based(const Mlp& model, const LabeledDataset& ds,
                                               std::size_t per_class, int probe_epochs,
                                               const OptimizerConfig& opt, int head,
                                               std::size_t batch_size, Rng& rng) {
    if (probe_epochs < 1) throw Error("select_gradient_based: probe_epochs must be >= 1");
    auto by_class = indices_by_class(ds);
    for (const auto& [cls, idx] : by_class)
        if (idx.size() < per_class)
            throw Error("class " + std::to_string(cls) + " has " + std::to_string(idx.size()) +
                        " examples, need " + std::to_string(per_class));

    Mlp probe = model;
    probe.version = model.version + 1;
    auto opt_state = OptimizerState::make(opt, probe);

    std::vector<double> score(ds.size(), 0.0);
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t(0));

    for (int e = 0; e < probe_epochs; ++e) {
        Rng shuffle_rng = rng.stream("probe-shuffle", std::uint64_t(e));
        shuffle_rng.shuffle(order);
        for (std::size_t off = 0; off < order.size(); off += batch_size) {
            const std::size_t n = std::min(batch_size, order.size() - off);
            std::vector<std::size_t> idx(order.begin() + long(off),
                                         order.begin() + long(off + n));
            const Tensor x = ds.gather(idx);
            const auto y = ds.gather_labels(idx);
            auto [logits, cache] = forward(probe, x, head);
            auto lg = cross_entropy(logits, y);
            auto grads = backward(probe, cache, lg.grad);
            optimizer_step(probe, grads, opt_state);
        }
        // end-of-epoch per-example gradient magnitudes
        constexpr std::size_t eval_chunk = 512;
        for (std::size_t off = 0; off < ds.size(); off += eval_chunk) {
            const std::size_t n = std::min(eval_chunk, ds.size() - off);
            std::vector<std::size_t> idx(n);
            std::iota(idx.begin(), idx.end(), off);
            const auto norms =
                per_example_grad_norms(probe, ds.gather(idx), ds.gather_labels(idx), head);
            for (std::size_t i = 0; i < n; ++i) score[off + i] += norms[i];
        }
    }
    for (auto& s : score) s /= double(probe_epochs);

    std::vector<std::size_t> out;
    for (auto& [cls, idx] : by_class) {
        std::stable_sort(idx.begin(), idx.end(), [&score](std::size_t a, std::size_t b) {
            if (score[a] != score[b]) return score[a] < score[b];
            return a < b;
        });
        out.insert(out.end(), idx.begin(), idx.begin() + long(per_class));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> select_indices(SelectionKind kind, const Mlp& model,
                                        const LabeledDataset& ds, std::size_t per_class,
                                        int probe_epochs, const OptimizerConfig& opt, int head,
                                        std::size_t batch_size, Rng& rng) {
    switch (kind) {
        case SelectionKind::StratifiedRandom:
            return select_stratified_random(ds, per_class, rng);
        case SelectionKind::Herding: return select_herding(ds, per_class);
        case SelectionKind::GradientBased:
            return select_gradient_based(model, ds, per_class, probe_epochs, opt, head,
                                         batch_size, rng);
    }
    throw Error("select_indices: bad kind");
}

std::vector<MemoryEntry> record_logits(const Mlp& model, const LabeledDataset& ds,
                                       const std::vector<std::size_t>& indices, int head,
                                       int task_id) {
    std::vector<MemoryEntry> out;
    out.reserve(indices.size());
    const Tensor x = ds.gather(indices);
    auto [logits, cache] = forward(model, x, head);
    const std::size_t d = ds.input_dim(), K = logits.cols();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        MemoryEntry e;
        e.input = Tensor::zeros({d});
        std::copy(ds.row(indices[i]), ds.row(indices[i]) + d, e.input.data.begin());
        e.logits_ref = Tensor::zeros({K});
        for (std::size_t c = 0; c < K; ++c) e.logits_ref.data[c] = logits.at(i, c);
        if (!e.logits_ref.all_finite())
            throw Error("record_logits: non-finite logits for index " +
                        std::to_string(indices[i]));
        e.true_label = ds.labels[indices[i]];
        e.task_id = task_id;
        e.head_id = head;
        out.push_back(std::move(e));
    }
    return out;
}

// --- Budget ------------------------------------------------------------------

BudgetReport ewc_equivalent_budget(std::size_t p, std::size_t d, std::size_t K, int n_tasks) {
    if (p == 0 || d == 0 || K == 0 || n_tasks <= 0)
        throw Error("ewc_equivalent_budget: all arguments must be positive");
    BudgetReport r;
    r.param_count = p;
    r.ewc_floats = 2 * p;
    r.per_image_floats = d + K;
    r.n_tasks = n_tasks;
    r.images_per_task = r.ewc_floats / r.per_image_floats / std::size_t(n_tasks);
    // uint8 image payload costs d/4 float32-equivalents; logits stay float
    const double per_image_u8 = double(d) / 4.0 + double(K);
    r.images_per_task_uint8 =
        std::size_t(double(r.ewc_floats) / per_image_u8 / double(n_tasks));
    return r;
}

namespace {

std::vector<std::size_t> split_dims(const std::string& s, char sep, const std::string& what) {
    std::vector<std::size_t> dims;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto next = s.find(sep, pos);
        const std::string tok = s.substr(pos, next == std::string::npos ? next : next - pos);
        try {
            dims.push_back(std::size_t(std::stoull(tok)));
        } catch (...) {
            throw Error("bad dimension '" + tok + "' in " + what);
        }
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return dims;
}

} // namespace

std::size_t parse_param_spec(const std::string& spec, bool include_bias) {
    std::size_t total = 0;
    std::size_t pos = 0;
    bool any = false;
    while (pos <= spec.size()) {
        const auto next = spec.find(',', pos);
        const std::string item =
            spec.substr(pos, next == std::string::npos ? next : next - pos);
        if (!item.empty()) {
            any = true;
            const auto colon = item.find(':');
            if (colon == std::string::npos) {
                try {
                    total += std::size_t(std::stoull(item));
                } catch (...) {
                    throw Error("bad model spec item '" + item + "'");
                }
            } else {
                const std::string kind = item.substr(0, colon);
                const std::string rest = item.substr(colon + 1);
                if (kind == "mlp") {
                    const auto dims = split_dims(rest, '-', item);
                    if (dims.size() < 2) throw Error("mlp spec needs >= 2 widths: " + item);
                    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
                        total += dims[i] * dims[i + 1];
                        if (include_bias) total += dims[i + 1];
                    }
                } else if (kind == "fc") {
                    const auto dims = split_dims(rest, 'x', item);
                    if (dims.size() != 2) throw Error("fc spec needs INxOUT: " + item);
                    total += dims[0] * dims[1];
                    if (include_bias) total += dims[1];
                } else if (kind == "conv") {
                    const auto dims = split_dims(rest, 'x', item);
                    if (dims.size() != 4) throw Error("conv spec needs KHxKWxCINxCOUT: " + item);
                    total += dims[0] * dims[1] * dims[2] * dims[3];
                    if (include_bias) total += dims[3];
                } else {
                    throw Error("unknown layer kind '" + kind + "' in model spec");
                }
            }
        }
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    if (!any) throw Error("empty model spec");
    return total;
}

// --- Snapshot io ---------------------------------------------------------

namespace {

constexpr char kMemMagic[8] = {'F', 'S', 'R', 'M', 'E', 'M', '0', '1'};

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const char* what) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw Error(std::string("memory snapshot: truncated ") + what);
    return v;
}

void put_tensor(std::ostream& out, const Tensor& t) {
    put(out, std::uint32_t(t.shape.size()));
    for (auto s : t.shape) put(out, std::uint64_t(s));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              std::streamsize(t.data.size() * sizeof(float)));
}

Tensor get_tensor(std::istream& in) {
    const auto rank = get<std::uint32_t>(in, "tensor rank");
    std::vector<std::size_t> shape(rank);
    for (auto& s : shape) s = std::size_t(get<std::uint64_t>(in, "tensor shape"));
    Tensor t = Tensor::zeros(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            std::streamsize(t.data.size() * sizeof(float)));
    if (!in) throw Error("memory snapshot: truncated tensor data");
    return t;
}

} // namespace

void EpisodicMemory::refresh_logits(const Mlp& model) {
    for (auto& [task_id, entries] : tasks_) {
        for (auto& e : entries) {
            Tensor x = Tensor::zeros({1, e.input.numel()});
            x.data = e.input.data;
            auto [logits, cache] = forward(model, x, e.head_id);
            e.logits_ref.data = logits.data;
        }
    }
}

void EpisodicMemory::write(std::ostream& out) const {
    put(out, std::uint32_t(tasks_.size()));
    for (const auto& [task_id, entries] : tasks_) {
        put(out, std::int32_t(task_id));
        put(out, std::uint64_t(entries.size()));
        for (const auto& e : entries) {
            put_tensor(out, e.input);
            put_tensor(out, e.logits_ref);
            put(out, std::int32_t(e.true_label));
            put(out, std::int32_t(e.head_id));
        }
    }
}

EpisodicMemory EpisodicMemory::read(std::istream& in) {
    EpisodicMemory mem;
    const auto ntasks = get<std::uint32_t>(in, "task count");
    for (std::uint32_t t = 0; t < ntasks; ++t) {
        const auto task_id = get<std::int32_t>(in, "task id");
        const auto n = get<std::uint64_t>(in, "entry count");
        std::vector<MemoryEntry> entries;
        entries.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            MemoryEntry e;
            e.input = get_tensor(in);
            e.logits_ref = get_tensor(in);
            e.true_label = get<std::int32_t>(in, "label");
            e.head_id = get<std::int32_t>(in, "head");
            e.task_id = task_id;
            entries.push_back(std::move(e));
        }
        mem.add_task(task_id, std::move(entries));
    }
    return mem;
}

void EpisodicMemory::save(const std::string& path, std::uint64_t dataset_fingerprint,
                          SelectionKind strategy) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out.write(kMemMagic, sizeof kMemMagic);
    put(out, dataset_fingerprint);
    put(out, std::uint32_t(strategy));
    write(out);
}

LoadedMemory load_memory_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMemMagic, sizeof magic) != 0)
        throw Error(path + ": not a memory snapshot (bad magic)");
    LoadedMemory l;
    l.dataset_fingerprint = get<std::uint64_t>(in, "fingerprint");
    l.strategy = SelectionKind(get<std::uint32_t>(in, "strategy"));
    l.memory = EpisodicMemory::read(in);
    return l;
}

} // namespace fsrlab
