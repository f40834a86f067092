#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fsrlab/data.hpp"
#include "fsrlab/memory.hpp"
#include "fsrlab/nn.hpp"
#include "fsrlab/penalties.hpp"
#include "fsrlab/rng.hpp"

namespace fsrlab {

enum class MethodKind { Naive, FsrLogit, FsrDistill, FsrLogitLab, IcarlReg, Ewc, Lwf };

const char* method_name(MethodKind k);
MethodKind method_from_name(const std::string& name);
bool method_uses_memory(MethodKind k);

/// Best regularization strengths found on held-out validation for the
/// permuted benchmark; used whenever the config does not pin lambda.
float default_lambda(MethodKind k);

struct MethodConfig {
    MethodKind kind = MethodKind::Naive;
    float lambda = -1.0f;       // <0: resolved to default_lambda(kind)
    float tau = 2.0f;           // distill / lwf temperature
    int replay_batch = 128;     // <=0: evaluate the whole memory every step
    float label_weight = -1.0f; // fsr_logit_lab; <0: same as lambda
    int fisher_samples = 1000;  // ewc: examples per task for the diagonal
    bool refresh_logits = false; // re-record all stored logits at boundaries

    float resolved_lambda() const { return lambda < 0.0f ? default_lambda(kind) : lambda; }
    float resolved_label_weight() const {
        return label_weight < 0.0f ? resolved_lambda() : label_weight;
    }
};

/// How memory entries are picked and how many, resolved by the runner.
struct MemoryPolicy {
    SelectionKind selection = SelectionKind::StratifiedRandom;
    std::size_t per_class = 0; // entries kept per class per task
    int probe_epochs = 1;
    std::size_t probe_batch = 128;
};

/// Standalone form of the replay regularizer (errors on empty memory);
/// adds scaled gradients and returns the penalty value.
double fsr_regularizer(const Mlp& model, const EpisodicMemory& memory,
                       const MethodConfig& cfg, Rng& rng, Gradients& grads);
double icarl_regularizer(const Mlp& model, const EpisodicMemory& memory, float lambda,
                         int replay_batch, Rng& rng, Gradients& grads);

/// Gathers sampled entries into per-head replay groups.
std::vector<ReplayGroupT<float>> gather_replay(const std::vector<const MemoryEntry*>& entries);

// --- Method lifecycle -------------------------------------------------------

class ContinualMethod {
public:
    explicit ContinualMethod(MethodConfig cfg) : cfg_(cfg) {}
    virtual ~ContinualMethod() = default;

    MethodKind kind() const { return cfg_.kind; }
    const MethodConfig& config() const { return cfg_; }

    /// Penalty loss for one step; gradients are accumulated into `grads`.
    virtual double penalty(const Mlp& model, const Tensor& batch_x,
                           const std::vector<int>& batch_y, int head, Rng& replay_rng,
                           Gradients& grads) = 0;

    virtual void on_task_start(const Mlp& model, int task_id, int head);
    virtual void on_task_end(const Mlp& model, const LabeledDataset& train_ds, int task_id,
                             int head, const OptimizerConfig& opt, const Rng& rng) = 0;

    virtual void write_state(std::ostream& out) const = 0;
    virtual void read_state(std::istream& in) = 0;

    virtual const EpisodicMemory* memory() const { return nullptr; }

protected:
    MethodConfig cfg_;
};

class NaiveMethod final : public ContinualMethod {
public:
    explicit NaiveMethod(MethodConfig cfg) : ContinualMethod(cfg) {}
    double penalty(const Mlp&, const Tensor&, const std::vector<int>&, int, Rng&,
                   Gradients&) override {
        return 0.0;
    }
    void on_task_end(const Mlp&, const LabeledDataset&, int, int, const OptimizerConfig&,
                     const Rng&) override {}
    void write_state(std::ostream&) const override {}
    void read_state(std::istream&) override {}
};

/// FSR variants and the iCaRL-style regularizer share the episodic-memory
/// lifecycle: select points and record logits at the end of every task.
class MemoryMethod : public ContinualMethod {
public:
    MemoryMethod(MethodConfig cfg, MemoryPolicy policy)
        : ContinualMethod(cfg), policy_(policy) {}

    double penalty(const Mlp& model, const Tensor& batch_x, const std::vector<int>& batch_y,
                   int head, Rng& replay_rng, Gradients& grads) override;
    void on_task_start(const Mlp& model, int task_id, int head) override;
    void on_task_end(const Mlp& model, const LabeledDataset& train_ds, int task_id, int head,
                     const OptimizerConfig& opt, const Rng& rng) override;
    void write_state(std::ostream& out) const override;
    void read_state(std::istream& in) override;

    const EpisodicMemory* memory() const override { return &memory_; }
    EpisodicMemory& memory_mut() { return memory_; }
    const MemoryPolicy& policy() const { return policy_; }

private:
    MemoryPolicy policy_;
    EpisodicMemory memory_;
    std::optional<Mlp> task_start_model_; // kept only for gradient-based selection
};

class EwcMethod final : public ContinualMethod {
public:
    explicit EwcMethod(MethodConfig cfg) : ContinualMethod(cfg) {}
    double penalty(const Mlp& model, const Tensor&, const std::vector<int>&, int, Rng&,
                   Gradients& grads) override;
    void on_task_end(const Mlp& model, const LabeledDataset& train_ds, int task_id, int head,
                     const OptimizerConfig& opt, const Rng& rng) override;
    void write_state(std::ostream& out) const override;
    void read_state(std::istream& in) override;

    const EwcState& state() const { return state_; }
    EwcState& state_mut() { return state_; }

private:
    EwcState state_;
};

class LwfMethod final : public ContinualMethod {
public:
    explicit LwfMethod(MethodConfig cfg) : ContinualMethod(cfg) {}
    double penalty(const Mlp& model, const Tensor& batch_x, const std::vector<int>&, int head,
                   Rng&, Gradients& grads) override;
    void on_task_end(const Mlp& model, const LabeledDataset&, int task_id, int head,
                     const OptimizerConfig&, const Rng&) override;
    void write_state(std::ostream& out) const override;
    void read_state(std::istream& in) override;

    const Mlp* snapshot() const { return snapshot_ ? &*snapshot_ : nullptr; }

private:
    std::optional<Mlp> snapshot_;
    std::vector<int> seen_heads_;
};

std::unique_ptr<ContinualMethod> make_method(const MethodConfig& cfg,
                                             const MemoryPolicy& policy);

/// Method state checkpoint alongside the model checkpoint so a task
/// sequence can resume at a boundary.
void save_method_state(const std::string& path, const ContinualMethod& method);
void load_method_state(const std::string& path, ContinualMethod& method);

// --- Training ---------------------------------------------------------------

struct TrainSpec {
    int epochs = 5;
    std::size_t batch = 128;
    bool plateau_decay = false; // halve lr when val loss stalls
    int patience = 3;
};

struct EpochMetrics {
    double train_loss = 0.0, train_acc = 0.0;
    double val_loss = 0.0, val_acc = 0.0;
    double penalty = 0.0;
};

struct TrainReport {
    std::vector<EpochMetrics> epochs;
    double final_train_loss = 0.0; // task loss of the converged model
    double wall_seconds = 0.0;
};

/// Evaluation-mode loss and accuracy over a dataset.
std::pair<double, double> evaluate(const Mlp& model, const LabeledDataset& ds, int head,
                                   std::size_t batch = 256);
double accuracy(const Mlp& model, const LabeledDataset& ds, int head);

/// One task of the sequential protocol: epochs x minibatch steps of
/// task gradient + method penalty gradient, optimizer stepping, then the
/// method's end-of-task hooks. Optimizer state is reset at task start.
TrainReport train_task(ContinualMethod& method, Mlp& model, const TaskData& task, int task_id,
                       int head, const TrainSpec& train, const OptimizerConfig& opt,
                       const Rng& run_rng);

} // namespace fsrlab
