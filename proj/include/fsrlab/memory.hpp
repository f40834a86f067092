#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fsrlab/data.hpp"
#include "fsrlab/nn.hpp"
#include "fsrlab/rng.hpp"

namespace fsrlab {

/// A stored input with the logits recorded from the model that finished
/// its task; entries are immutable once recorded.
struct MemoryEntry {
    Tensor input;            // [d]
    Tensor logits_ref;       // [K_head]
    int true_label = -1;     // -1 when not stored
    int task_id = 0;
    int head_id = 0;
};

enum class SelectionKind { StratifiedRandom, Herding, GradientBased };

const char* selection_name(SelectionKind k);
SelectionKind selection_from_name(const std::string& name);

/// Episodic memory grouped by task; append-only per task.
class EpisodicMemory {
public:
    void add_task(int task_id, std::vector<MemoryEntry> entries);
    bool has_task(int task_id) const;
    std::size_t task_count() const { return tasks_.size(); }
    std::size_t total_entries() const;
    const std::vector<MemoryEntry>& task_entries(int task_id) const;
    std::vector<const MemoryEntry*> all_entries() const;

    /// Uniform sample (without replacement) of min(n, total) entries
    /// across every stored task.
    std::vector<const MemoryEntry*> sample(std::size_t n, Rng& rng) const;

    /// Re-record every stored entry's reference logits from the given
    /// model (each on its own head). Only used by the refresh-at-boundary
    /// mode; entries are otherwise immutable.
    void refresh_logits(const Mlp& model);

    void write(std::ostream& out) const;
    static EpisodicMemory read(std::istream& in);

    void save(const std::string& path, std::uint64_t dataset_fingerprint,
              SelectionKind strategy) const;

private:
    std::vector<std::pair<int, std::vector<MemoryEntry>>> tasks_;
};

struct LoadedMemory {
    EpisodicMemory memory;
    std::uint64_t dataset_fingerprint = 0;
    SelectionKind strategy = SelectionKind::StratifiedRandom;
};

LoadedMemory load_memory_snapshot(const std::string& path);

// --- Point selection -------------------------------------------------------

/// Exactly per_class indices per class, uniform without replacement.
std::vector<std::size_t> select_stratified_random(const LabeledDataset& ds,
                                                  std::size_t per_class, Rng& rng);

/// Greedy linear-kernel herding over raw input vectors of one class slice:
/// each step picks the unchosen point whose inclusion moves the running
/// selected-mean closest to the class mean (Frank-Wolfe step 1/(t+1), no
/// duplicates). `candidates` are row indices into ds.
std::vector<std::size_t> select_herding_class(const LabeledDataset& ds,
                                              const std::vector<std::size_t>& candidates,
                                              std::size_t m);

/// Class-stratified herding: per_class indices per class.
std::vector<std::size_t> select_herding(const LabeledDataset& ds, std::size_t per_class);

/// L2 norm of the full parameter gradient of each example's cross-entropy,
/// computed batched via the outer-product identity for dense layers.
std::vector<double> per_example_grad_norms(const Mlp& model, const Tensor& batch,
                                           const std::vector<int>& labels, int head);

/// Trains a throwaway copy of `model` for probe_epochs, scoring every
/// example by its mean per-epoch parameter-gradient L2 norm, then keeps the
/// per_class lowest-scoring examples of each class. The passed model is
/// untouched.
std::vector<std::size_t> select_gradient_based(const Mlp& model, const LabeledDataset& ds,
                                               std::size_t per_class, int probe_epochs,
                                               const OptimizerConfig& opt, int head,
                                               std::size_t batch_size, Rng& rng);

std::vector<std::size_t> select_indices(SelectionKind kind, const Mlp& model,
                                        const LabeledDataset& ds, std::size_t per_class,
                                        int probe_epochs, const OptimizerConfig& opt, int head,
                                        std::size_t batch_size, Rng& rng);

/// One MemoryEntry per index, logits taken from an evaluation-mode forward
/// pass of the (converged) model on the given head.
std::vector<MemoryEntry> record_logits(const Mlp& model, const LabeledDataset& ds,
                                       const std::vector<std::size_t>& indices, int head,
                                       int task_id);

// --- EWC-equivalent budget -------------------------------------------------

struct BudgetReport {
    std::size_t param_count = 0;      // p, as counted by the caller
    std::size_t ewc_floats = 0;       // 2p
    std::size_t per_image_floats = 0; // d + K
    int n_tasks = 0;
    std::size_t images_per_task = 0;  // floor(2p / (d+K) / n_tasks)
    bool uint8_inputs = false;        // optional cheaper storage mode
    std::size_t images_per_task_uint8 = 0;
};

/// floor(2p / (d+K) / n_tasks): how many stored images cost the same as an
/// extra parameter copy plus its Fisher diagonal.
BudgetReport ewc_equivalent_budget(std::size_t p, std::size_t d, std::size_t K, int n_tasks);

/// Parameter count of a layer-spec string: comma-separated
/// `mlp:784-1024-10` (dense chain), `fc:4096x1024`, `conv:5x5x3x128`
/// items, or a bare number taken as an explicit count. Biases are excluded
/// unless include_bias is set.
std::size_t parse_param_spec(const std::string& spec, bool include_bias);

} // namespace fsrlab
