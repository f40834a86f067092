#include "fsrlab/bench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace fsrlab {

namespace {

std::pair<LabeledDataset, LabeledDataset> load_source(const DatasetSpec& ds) {
    switch (ds.kind) {
        case DatasetSpec::Kind::Synthetic: return make_synthetic_digits(ds.synthetic);
        case DatasetSpec::Kind::Idx:
            return {load_idx(ds.train_images, ds.train_labels),
                    load_idx(ds.test_images, ds.test_labels)};
        case DatasetSpec::Kind::Csv: return {load_csv(ds.train_csv), load_csv(ds.test_csv)};
    }
    throw Error("bad dataset kind");
}

LabeledDataset flat_view(LabeledDataset ds) {
    ds.inputs.shape = {ds.size(), ds.input_dim()};
    return ds;
}

} // namespace

PreparedStream prepare_stream(const ExperimentConfig& cfg, std::uint64_t run_seed) {
    auto [train_src, test_src] = load_source(cfg.dataset);
    Rng run_rng(run_seed);
    PreparedStream ps;
    const int n = cfg.stream.n_tasks;
    if (n <= 0) throw Error("stream: n_tasks must be positive");

    switch (cfg.stream.kind) {
        case StreamSpec::Kind::Permuted:
        case StreamSpec::Kind::Nonlinear:
        case StreamSpec::Kind::Identity: {
            auto flat_train = flat_view(train_src);
            auto flat_test = flat_view(test_src);
            auto [tr, val] =
                split_train_val(flat_train, cfg.val_fraction, run_rng.stream("val-split").seed());
            for (int t = 0; t < n; ++t) {
                TaskData td{tr, val, flat_test};
                const std::uint64_t tseed =
                    run_rng.stream("task-transform", std::uint64_t(t)).seed();
                if (cfg.stream.kind == StreamSpec::Kind::Permuted && t > 0) {
                    const auto p = make_permutation(tr.input_dim(), tseed);
                    td.train = apply_permutation(td.train, p);
                    td.val = apply_permutation(td.val, p);
                    td.test = apply_permutation(td.test, p);
                } else if (cfg.stream.kind == StreamSpec::Kind::Nonlinear) {
                    td = nonlinear_transform_triple(td, tseed);
                }
                ps.stream.tasks.push_back(std::move(td));
            }
            ps.stream.regime = Regime::FixedOutput;
            ps.head_dims = {std::size_t(tr.class_count)};
            break;
        }
        case StreamSpec::Kind::ColorSpace: {
            if (std::size_t(n) > cfg.stream.color_spaces.size())
                throw Error("color stream: " + std::to_string(n) + " tasks but only " +
                            std::to_string(cfg.stream.color_spaces.size()) + " spaces listed");
            auto [tr, val] =
                split_train_val(train_src, cfg.val_fraction, run_rng.stream("val-split").seed());
            for (int t = 0; t < n; ++t) {
                const auto& space = cfg.stream.color_spaces[std::size_t(t)];
                TaskData td;
                td.train = color_space_task(tr, space);
                td.val = color_space_task(val, space);
                td.test = color_space_task(test_src, space);
                ps.stream.tasks.push_back(std::move(td));
            }
            ps.stream.regime = Regime::FixedOutput;
            ps.head_dims = {std::size_t(tr.class_count)};
            break;
        }
        case StreamSpec::Kind::ClassSplit: {
            auto flat_train = flat_view(train_src);
            auto flat_test = flat_view(test_src);
            const std::uint64_t pseed = run_rng.stream("class-partition").seed();
            const auto groups = make_class_partition(flat_train.class_count, n, pseed);
            for (int t = 0; t < n; ++t) {
                const auto& g = groups[std::size_t(t)];
                auto train_t = subset_by_classes(flat_train, g);
                auto test_t = subset_by_classes(flat_test, g);
                auto [tr, val] = split_train_val(
                    train_t, cfg.val_fraction,
                    run_rng.stream("val-split", std::uint64_t(t)).seed());
                ps.stream.tasks.push_back(TaskData{std::move(tr), std::move(val),
                                                   std::move(test_t)});
                ps.head_dims.push_back(std::size_t(train_t.class_count));
            }
            ps.stream.regime = Regime::ClassIncremental;
            break;
        }
    }
    ps.input_dim = ps.stream.tasks[0].train.input_dim();
    return ps;
}

Mlp build_model(const ExperimentConfig& cfg, const PreparedStream& ps, std::uint64_t run_seed) {
    return build_mlp<float>(ps.input_dim, cfg.model.hidden, ps.head_dims, cfg.model.act,
                            cfg.model.alpha, Rng(run_seed).stream("init"));
}

MemoryPolicy resolve_memory_policy(const ExperimentConfig& cfg, const Mlp& model,
                                   const PreparedStream& ps) {
    MemoryPolicy p;
    p.selection = cfg.memory.selection;
    p.probe_epochs = cfg.memory.probe_epochs;
    p.probe_batch = cfg.train.batch;
    const std::size_t K = ps.head_dims[0];
    switch (cfg.memory.budget) {
        case MemorySpec::Budget::PerClass: p.per_class = cfg.memory.amount; break;
        case MemorySpec::Budget::PerTask:
            p.per_class = std::max<std::size_t>(1, cfg.memory.amount / K);
            break;
        case MemorySpec::Budget::EwcEquivalent: {
            const auto rep = ewc_equivalent_budget(param_count(model, false), ps.input_dim, K,
                                                   int(ps.stream.size()));
            p.per_class = std::max<std::size_t>(1, rep.images_per_task / K);
            break;
        }
    }
    return p;
}

MetricsLog run_sequence(const ExperimentConfig& cfg, std::uint64_t run_seed,
                        const TaskCallback& on_task) {
    auto ps = prepare_stream(cfg, run_seed);
    Mlp model = build_model(cfg, ps, run_seed);
    auto policy = resolve_memory_policy(cfg, model, ps);
    auto method = make_method(cfg.method, policy);
    Rng run_rng(run_seed);

    MetricsLog log;
    log.n_tasks = int(ps.stream.size());
    const bool incremental = ps.stream.regime == Regime::ClassIncremental;

    for (int t = 0; t < log.n_tasks; ++t) {
        const auto& task = ps.stream.tasks[std::size_t(t)];
        const int head = incremental ? t : 0;
        auto rep = train_task(*method, model, task, t, head, cfg.train, cfg.optimizer, run_rng);

        log.epoch_metrics.push_back(rep.epochs);
        log.task_seconds.push_back(rep.wall_seconds);
        log.final_train_loss.push_back(rep.final_train_loss);
        log.task_fingerprints.push_back(fingerprint(task.train));
        log.head_of_task.push_back(head);
        log.class_count_of_task.push_back(task.test.class_count);

        std::vector<double> row;
        for (int j = 0; j <= t; ++j)
            row.push_back(accuracy(model, ps.stream.tasks[std::size_t(j)].test,
                                   log.head_of_task[std::size_t(j)]));
        log.acc.push_back(std::move(row));
        if (on_task) on_task(t, log, model, ps);
    }
    return log;
}

std::vector<double> joint_reference(const ExperimentConfig& cfg, std::uint64_t run_seed) {
    auto ps = prepare_stream(cfg, run_seed);
    Mlp model = build_model(cfg, ps, run_seed);
    Rng run_rng(run_seed);
    const int n = int(ps.stream.size());
    const bool incremental = ps.stream.regime == Regime::ClassIncremental;
    const std::size_t B = cfg.train.batch;

    std::size_t total = 0;
    for (const auto& t : ps.stream.tasks) total += t.train.size();
    const std::size_t mean_size = (total + std::size_t(n) - 1) / std::size_t(n);
    const std::size_t steps_per_epoch = (mean_size + B - 1) / B;

    struct Cursor {
        std::vector<std::size_t> order;
        std::size_t pos = 0;
        std::uint64_t pass = 0;
    };
    std::vector<Cursor> cur(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
        cur[std::size_t(t)].order.resize(ps.stream.tasks[std::size_t(t)].train.size());
        std::iota(cur[std::size_t(t)].order.begin(), cur[std::size_t(t)].order.end(),
                  std::size_t(0));
        cur[std::size_t(t)].pos = cur[std::size_t(t)].order.size(); // force first shuffle
    }

    auto opt_state = OptimizerState::make(cfg.optimizer, model);
    std::uint64_t global_step = 0;
    const long total_epochs = long(n) * cfg.train.epochs;
    for (long e = 0; e < total_epochs; ++e) {
        for (std::size_t s = 0; s < steps_per_epoch; ++s, ++global_step) {
            const int t = int(global_step % std::uint64_t(n));
            auto& c = cur[std::size_t(t)];
            if (c.pos >= c.order.size()) {
                Rng r = run_rng.stream("shuffle", std::uint64_t(t), c.pass++);
                r.shuffle(c.order);
                c.pos = 0;
            }
            const std::size_t nb = std::min(B, c.order.size() - c.pos);
            std::vector<std::size_t> idx(c.order.begin() + long(c.pos),
                                         c.order.begin() + long(c.pos + nb));
            c.pos += nb;

            const auto& train = ps.stream.tasks[std::size_t(t)].train;
            const int head = incremental ? t : 0;
            model.active_head = head;
            const Tensor x = train.gather(idx);
            const auto y = train.gather_labels(idx);
            auto [logits, cache] = forward(model, x, head);
            auto lg = cross_entropy(logits, y);
            auto grads = backward(model, cache, lg.grad);
            optimizer_step(model, grads, opt_state);
        }
    }

    std::vector<double> out;
    for (int t = 0; t < n; ++t)
        out.push_back(
            accuracy(model, ps.stream.tasks[std::size_t(t)].test, incremental ? t : 0));
    return out;
}

// --- Metric projections ----------------------------------------------------

std::vector<double> first_task_accuracy(const MetricsLog& log) {
    std::vector<double> out;
    for (int t = 0; t < int(log.acc.size()); ++t) out.push_back(log.a(0, t));
    return out;
}

std::vector<double> average_accuracy(const MetricsLog& log) {
    std::vector<double> out;
    for (int t = 0; t < int(log.acc.size()); ++t) {
        double s = 0.0;
        for (int j = 0; j <= t; ++j) s += log.a(j, t);
        out.push_back(s / double(t + 1));
    }
    return out;
}

std::vector<double> chance_accuracies(const MetricsLog& log) {
    std::vector<double> out;
    for (int k : log.class_count_of_task) out.push_back(1.0 / double(k));
    return out;
}

RhoReport forgetting_ratio(const MetricsLog& log, const std::vector<double>& joint_ref,
                           const std::vector<double>& random_ref) {
    if (int(joint_ref.size()) < int(log.acc.size()) ||
        int(random_ref.size()) < int(log.acc.size()))
        throw Error("forgetting_ratio: reference vectors shorter than the task count");
    RhoReport rep;
    rep.joint_ref = joint_ref;
    rep.random_ref = random_ref;
    for (int t = 0; t < int(log.acc.size()); ++t) {
        double s = 0.0;
        for (int j = 0; j <= t; ++j) {
            const double J = joint_ref[std::size_t(j)], r = random_ref[std::size_t(j)];
            if (J <= r)
                throw Error("degenerate reference: joint accuracy " + std::to_string(J) +
                            " <= chance " + std::to_string(r) + " for task " +
                            std::to_string(j + 1));
            const double denom = std::max(J - r, 1e-9);
            s += (log.a(j, t) - r) / denom - 1.0;
        }
        rep.rho.push_back(s / double(t + 1));
    }
    return rep;
}

std::pair<Tensor, Tensor> logit_stats(const Mlp& model, const LabeledDataset& ds, int head) {
    const std::size_t K = model.head_dim(head);
    const std::size_t C = std::size_t(ds.class_count);
    Tensor mean = Tensor::zeros({C, K}), std = Tensor::zeros({C, K});
    std::vector<std::vector<double>> sum(C, std::vector<double>(K, 0.0));
    std::vector<std::vector<double>> sumsq(C, std::vector<double>(K, 0.0));
    std::vector<std::size_t> count(C, 0);

    constexpr std::size_t batch = 256;
    for (std::size_t off = 0; off < ds.size(); off += batch) {
        const std::size_t n = std::min(batch, ds.size() - off);
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), off);
        auto [logits, cache] = forward(model, ds.gather(idx), head);
        for (std::size_t i = 0; i < n; ++i) {
            const auto cls = std::size_t(ds.labels[off + i]);
            ++count[cls];
            for (std::size_t k = 0; k < K; ++k) {
                const double v = double(logits.at(i, k));
                sum[cls][k] += v;
                sumsq[cls][k] += v * v;
            }
        }
    }
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t k = 0; k < K; ++k) {
            if (count[c] == 0) continue;
            const double m = sum[c][k] / double(count[c]);
            mean.at(c, k) = float(m);
            const double var = std::max(sumsq[c][k] / double(count[c]) - m * m, 0.0);
            std.at(c, k) = float(std::sqrt(var));
        }
    return {mean, std};
}

Tensor prediction_heatmap(const Mlp& model, const LabeledDataset& ds, int head) {
    const std::size_t K = model.head_dim(head);
    const std::size_t C = std::size_t(ds.class_count);
    Tensor heat = Tensor::zeros({C, K});
    std::vector<std::vector<double>> sum(C, std::vector<double>(K, 0.0));
    std::vector<std::size_t> count(C, 0);

    constexpr std::size_t batch = 256;
    for (std::size_t off = 0; off < ds.size(); off += batch) {
        const std::size_t n = std::min(batch, ds.size() - off);
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), off);
        auto [logits, cache] = forward(model, ds.gather(idx), head);
        Tensor probs;
        detail::softmax_rows(logits, 1.0, probs);
        for (std::size_t i = 0; i < n; ++i) {
            const auto cls = std::size_t(ds.labels[off + i]);
            ++count[cls];
            for (std::size_t k = 0; k < K; ++k) sum[cls][k] += double(probs.at(i, k));
        }
    }
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t k = 0; k < K; ++k)
            if (count[c] > 0) heat.at(c, k) = float(sum[c][k] / double(count[c]));
    return heat;
}

double delta_loss(const Mlp& model, const LabeledDataset& task_ds, int head,
                  double stored_task_optimum_loss) {
    return evaluate(model, task_ds, head).first - stored_task_optimum_loss;
}

// --- CSV emission ----------------------------------------------------------

namespace {

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << std::setprecision(10);
    return out;
}

} // namespace

void write_metrics_csvs(const std::string& dir, const MetricsLog& log) {
    std::filesystem::create_directories(dir);
    {
        auto out = open_csv(dir + "/accuracy_matrix.csv");
        out << "t,j,acc\n";
        for (int t = 0; t < int(log.acc.size()); ++t)
            for (int j = 0; j <= t; ++j)
                out << (t + 1) << "," << (j + 1) << "," << log.a(j, t) << "\n";
    }
    {
        auto out = open_csv(dir + "/avg_accuracy.csv");
        out << "t,acc\n";
        const auto avg = average_accuracy(log);
        for (std::size_t t = 0; t < avg.size(); ++t) out << (t + 1) << "," << avg[t] << "\n";
    }
    {
        auto out = open_csv(dir + "/first_task.csv");
        out << "t,acc\n";
        const auto ft = first_task_accuracy(log);
        for (std::size_t t = 0; t < ft.size(); ++t) out << (t + 1) << "," << ft[t] << "\n";
    }
    {
        auto out = open_csv(dir + "/train_curves.csv");
        out << "task,epoch,train_loss,train_acc,val_loss,val_acc,penalty\n";
        for (std::size_t t = 0; t < log.epoch_metrics.size(); ++t)
            for (std::size_t e = 0; e < log.epoch_metrics[t].size(); ++e) {
                const auto& em = log.epoch_metrics[t][e];
                out << (t + 1) << "," << (e + 1) << "," << em.train_loss << "," << em.train_acc
                    << "," << em.val_loss << "," << em.val_acc << "," << em.penalty << "\n";
            }
    }
}

void write_heatmap_csv(const std::string& path, const Tensor& matrix) {
    auto out = open_csv(path);
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        for (std::size_t c = 0; c < matrix.cols(); ++c)
            out << (c ? "," : "") << matrix.at(r, c);
        out << "\n";
    }
}

void write_logit_stats_csv(const std::string& path, const Tensor& means, const Tensor& stds) {
    auto out = open_csv(path);
    out << "class,logit_index,mean,std\n";
    for (std::size_t r = 0; r < means.rows(); ++r)
        for (std::size_t c = 0; c < means.cols(); ++c)
            out << r << "," << c << "," << means.at(r, c) << "," << stds.at(r, c) << "\n";
}

void write_rho_csv(const std::string& path, const RhoReport& rho) {
    auto out = open_csv(path);
    out << "t,rho\n";
    for (std::size_t t = 0; t < rho.rho.size(); ++t) out << (t + 1) << "," << rho.rho[t] << "\n";
}

} // namespace fsrlab
