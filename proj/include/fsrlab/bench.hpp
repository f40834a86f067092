#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fsrlab/data.hpp"
#include "fsrlab/methods.hpp"
#include "fsrlab/tasks.hpp"

namespace fsrlab {

struct DatasetSpec {
    enum class Kind { Synthetic, Idx, Csv };
    Kind kind = Kind::Synthetic;
    SyntheticSpec synthetic;
    std::string train_images, train_labels, test_images, test_labels; // idx pair
    std::string train_csv, test_csv;
};

struct StreamSpec {
    enum class Kind { Permuted, Nonlinear, ColorSpace, ClassSplit, Identity };
    Kind kind = Kind::Permuted;
    int n_tasks = 5;
    std::vector<std::string> color_spaces = {"rgb", "yiq", "yuv", "hsv", "hed"};
};

struct ModelSpec {
    std::vector<std::size_t> hidden = {256, 256};
    Activation act = Activation::LeakyRelu;
    float alpha = 0.2f;
};

struct MemorySpec {
    enum class Budget { PerTask, PerClass, EwcEquivalent };
    Budget budget = Budget::PerTask;
    std::size_t amount = 500;
    SelectionKind selection = SelectionKind::StratifiedRandom;
    int probe_epochs = 1;
};

struct ExperimentConfig {
    DatasetSpec dataset;
    StreamSpec stream;
    ModelSpec model;
    MethodConfig method;
    MemorySpec memory;
    TrainSpec train;
    OptimizerConfig optimizer{OptKind::Adam, 1e-4f, 1e-4f, 0.9f, 0.999f, 1e-8f};
    double val_fraction = 1.0 / 12.0;
    std::uint64_t seed = 1;
};

/// Accuracy matrix and per-task records of one sequential run.
/// acc[t][j] = test accuracy of task j after training task t (j <= t).
struct MetricsLog {
    int n_tasks = 0;
    std::vector<std::vector<double>> acc;
    std::vector<std::vector<EpochMetrics>> epoch_metrics;
    std::vector<double> task_seconds;
    std::vector<double> final_train_loss;
    std::vector<std::uint64_t> task_fingerprints;
    std::vector<int> head_of_task;
    std::vector<int> class_count_of_task;

    double a(int j, int t) const { return acc[std::size_t(t)][std::size_t(j)]; }
};

/// Materialized task stream plus the model/head layout it implies.
struct PreparedStream {
    TaskStream stream;
    std::vector<std::size_t> head_dims;
    std::size_t input_dim = 0;
};

PreparedStream prepare_stream(const ExperimentConfig& cfg, std::uint64_t run_seed);
Mlp build_model(const ExperimentConfig& cfg, const PreparedStream& ps, std::uint64_t run_seed);

/// Resolve the memory budget to a per-class count for the given model and
/// task layout.
MemoryPolicy resolve_memory_policy(const ExperimentConfig& cfg, const Mlp& model,
                                   const PreparedStream& ps);

using TaskCallback =
    std::function<void(int /*task*/, const MetricsLog&, const Mlp&, const PreparedStream&)>;

/// Sequential protocol: train tasks in order, evaluating every earlier test
/// set after each task. Deterministic per (config, run_seed).
MetricsLog run_sequence(const ExperimentConfig& cfg, std::uint64_t run_seed,
                        const TaskCallback& on_task = nullptr);

/// Multi-task joint-training reference: one model, task-balanced
/// minibatches, n_tasks x epochs passes; per-task test accuracies.
std::vector<double> joint_reference(const ExperimentConfig& cfg, std::uint64_t run_seed);

// --- Metric projections ----------------------------------------------------

std::vector<double> first_task_accuracy(const MetricsLog& log);
std::vector<double> average_accuracy(const MetricsLog& log);

struct RhoReport {
    std::vector<double> rho;        // per stage t
    std::vector<double> joint_ref;  // J_j
    std::vector<double> random_ref; // r_j
};

/// rho(t) = (1/t) sum_{j<=t} [(A[j][t] - r_j) / (J_j - r_j) - 1]; 0 means no
/// forgetting against the joint reference, -1 means chance level.
RhoReport forgetting_ratio(const MetricsLog& log, const std::vector<double>& joint_ref,
                           const std::vector<double>& random_ref);

/// Chance accuracies 1/K_j for the log's tasks.
std::vector<double> chance_accuracies(const MetricsLog& log);

/// K x K per-class logit means and standard deviations (row = true class).
std::pair<Tensor, Tensor> logit_stats(const Mlp& model, const LabeledDataset& ds, int head);

/// K x K mean softmax outputs per true class; rows sum to 1.
Tensor prediction_heatmap(const Mlp& model, const LabeledDataset& ds, int head);

/// Current loss on a task's data minus the loss stored when that task
/// finished training.
double delta_loss(const Mlp& model, const LabeledDataset& task_ds, int head,
                  double stored_task_optimum_loss);

// --- CSV emission ----------------------------------------------------------

void write_metrics_csvs(const std::string& dir, const MetricsLog& log);
void write_heatmap_csv(const std::string& path, const Tensor& matrix);
void write_logit_stats_csv(const std::string& path, const Tensor& means, const Tensor& stds);
void write_rho_csv(const std::string& path, const RhoReport& rho);

} // namespace fsrlab
