#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fsrlab/data.hpp"
#include "fsrlab/rng.hpp"

namespace fsrlab {

// --- IDX container -------------------------------------------------------

/// Parse big-endian IDX image/label files (magics 0x803 / 0x801); pixels are
/// scaled to [0,1] by /255.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Write a flat dataset back out as an IDX pair (pixels quantized to uint8).
void write_idx(const LabeledDataset& ds, std::size_t rows, std::size_t cols,
               const std::string& images_path, const std::string& labels_path);

/// Flat CSV: one `label,v0,v1,...` line per example.
LabeledDataset load_csv(const std::string& path);

// --- Input transforms ----------------------------------------------------

std::vector<std::size_t> make_permutation(std::size_t d, std::uint64_t seed);
std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& p);

/// out pixel k = in pixel p[k], applied identically to every example.
LabeledDataset apply_permutation(const LabeledDataset& ds, const std::vector<std::size_t>& p);
LabeledDataset permute_task(const LabeledDataset& ds, std::uint64_t seed);

/// Invertible four-layer orthogonal MLP with leaky-relu activations; the
/// benchmark transform is apply_raw followed by [0,1] min-max renormalization.
struct NonlinearMlpTransform {
    std::vector<Tensor> weights; // four [d x d] orthogonal matrices
    float alpha = 0.2f;

    static NonlinearMlpTransform make(std::size_t d, std::uint64_t seed);
    Tensor apply_raw(const Tensor& x) const;
    Tensor invert_raw(const Tensor& y) const;
};

struct MinMaxRange {
    float lo = 0.0f, hi = 1.0f;
};

MinMaxRange value_range(const Tensor& t);
void renormalize(Tensor& t, MinMaxRange r, bool clamp);

/// Transform one split, renormalizing over that split.
LabeledDataset nonlinear_transform_task(const LabeledDataset& ds, std::uint64_t seed);

/// Transform train/val/test with one map; the renormalization range comes
/// from the train split and is reused for the others (clamped to [0,1]).
TaskData nonlinear_transform_triple(const TaskData& t, std::uint64_t seed);

// --- Color spaces --------------------------------------------------------

/// Per-pixel conversion from RGB in [0,1]; outputs are raw (unscaled)
/// coordinates of the target space.
std::array<double, 3> rgb_pixel_to(const std::string& space, double r, double g, double b);

/// Fixed theoretical output range of each channel of a space.
std::array<std::array<double, 2>, 3> color_space_ranges(const std::string& space);

/// Channel transform of an {N,H,W,3} dataset, rescaled per channel to [0,1]
/// by the space's fixed theoretical range. rgb is the identity.
LabeledDataset color_space_task(const LabeledDataset& ds, const std::string& space);

// --- Task construction ---------------------------------------------------

/// Classes shuffled by seed and chunked into n_tasks disjoint groups.
std::vector<std::vector<int>> make_class_partition(int class_count, int n_tasks,
                                                   std::uint64_t seed);

/// Examples of the given original classes, labels remapped to 0..len-1 in
/// group order.
LabeledDataset subset_by_classes(const LabeledDataset& ds, const std::vector<int>& classes);

/// Disjoint class-incremental tasks with per-task labels remapped to
/// [0, K/n_tasks). K must be divisible by n_tasks.
std::vector<LabeledDataset> class_split_tasks(const LabeledDataset& ds, int n_tasks,
                                              std::uint64_t seed);

/// Class-stratified split; exact per-class validation counts, disjoint,
/// union = input.
std::pair<LabeledDataset, LabeledDataset> split_train_val(const LabeledDataset& ds,
                                                          double val_fraction,
                                                          std::uint64_t seed);

// --- Synthetic source data -----------------------------------------------

/// Procedural digit-like grayscale dataset: per-class prototype fields with
/// translation jitter, shared background structure and noise. Stands in for
/// file-based sources so runs are self-contained; same shape conventions as
/// load_idx output.
struct SyntheticSpec {
    int classes = 10;
    int height = 28;
    int width = 28;
    int channels = 1; // 1 -> flat {N,d}; 3 -> {N,H,W,3} with per-class tints
    int train_per_class = 400;
    int test_per_class = 100;
    std::uint64_t seed = 7;
    float jitter = 3.0f;      // max translation of the class pattern, pixels
    float noise = 0.25f;      // amplitude of per-example structured noise
    float background = 0.30f; // amplitude of the class-shared background field
    float sparsity = 0.45f;   // intensity floor subtracted after composing;
                              // higher -> sparser stroke-like images
    float pair_similarity = 0.0f; // classes 2k/2k+1 share this fraction of
                                  // their pattern; raises confusability
    float label_noise = 0.0f;     // fraction of train labels flipped to a
                                  // random other class (test stays clean)
};

std::pair<LabeledDataset, LabeledDataset> make_synthetic_digits(const SyntheticSpec& spec);

} // namespace fsrlab
