#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsrlab/tensor.hpp"

namespace fsrlab {

/// Inputs in [0,1] with integer class labels. `inputs.shape` is {N, d} for
/// flat data or {N, H, W, C} for images; input_dim() is the flattened width.
struct LabeledDataset {
    Tensor inputs;
    std::vector<int> labels;
    int class_count = 0;
    std::string provenance;

    std::size_t size() const { return labels.size(); }
    std::size_t input_dim() const {
        std::size_t d = 1;
        for (std::size_t i = 1; i < inputs.shape.size(); ++i) d *= inputs.shape[i];
        return d;
    }
    const float* row(std::size_t i) const { return inputs.data.data() + i * input_dim(); }
    float* row(std::size_t i) { return inputs.data.data() + i * input_dim(); }

    /// Batch of rows by index, flattened to {n, d}.
    Tensor gather(const std::vector<std::size_t>& idx) const {
        const std::size_t d = input_dim();
        Tensor out = Tensor::zeros({idx.size(), d});
        for (std::size_t i = 0; i < idx.size(); ++i)
            std::copy(row(idx[i]), row(idx[i]) + d, out.data.begin() + i * d);
        return out;
    }
    std::vector<int> gather_labels(const std::vector<std::size_t>& idx) const {
        std::vector<int> out(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
        return out;
    }
};

enum class Regime { FixedOutput, ClassIncremental };

struct TaskData {
    LabeledDataset train, val, test;
};

struct TaskStream {
    std::vector<TaskData> tasks;
    Regime regime = Regime::FixedOutput;

    std::size_t size() const { return tasks.size(); }
};

/// Fully determines an input transform; serialized into run manifests.
struct TransformSpec {
    enum class Kind { Identity, Permutation, NonlinearMlp, ColorSpace };
    Kind kind = Kind::Identity;
    std::uint64_t seed = 0;
    float alpha = 0.2f;           // nonlinear_mlp leaky slope
    std::string color_space = ""; // rgb|yiq|yuv|hsv|hed

    std::string to_string() const;
};

/// FNV-1a over raw input bytes, labels and class count; used for
/// reproducibility audits in run manifests.
std::uint64_t fingerprint(const LabeledDataset& ds);

} // namespace fsrlab
