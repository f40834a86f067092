#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "fsrlab/bench.hpp"

namespace fsrlab {

using Json = nlohmann::json;

/// Parse a config file: JSON, or the line-based `key.path = value` form
/// where values are JSON scalars/arrays. Lines starting with '#' are
/// comments.
Json parse_config_text(const std::string& text, const std::string& origin = "<config>");
Json load_config_file(const std::string& path);

/// Apply `key.path=value` override strings on top of a parsed config.
void apply_override(Json& config, const std::string& assignment);

/// Deterministic flat `key.path = value` lines, sorted by key; the
/// diff-able manifest form of a config.
std::vector<std::string> flatten_config(const Json& config);

/// FNV-1a over the canonical flattened form.
std::uint64_t config_hash(const Json& config);

/// Materialize an ExperimentConfig; unknown keys are rejected so typos in
/// configs or overrides fail loudly.
ExperimentConfig experiment_from_json(const Json& config);

/// One experiment arm of a run: a name plus its fully resolved config.
struct Arm {
    std::string name;
    ExperimentConfig config;
    Json json; // resolved config as written to the manifest
};

struct RunSpec {
    std::vector<Arm> arms;
    std::vector<std::uint64_t> seeds;
    bool compute_rho = false;
    bool emit_figures = true;
};

/// Expand the optional `grid.*` lists (methods x memory_amounts x
/// selections) into arms; without a grid the base config is the one arm.
RunSpec run_spec_from_json(const Json& config);

} // namespace fsrlab
