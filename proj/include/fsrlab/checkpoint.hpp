#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "fsrlab/nn.hpp"

namespace fsrlab {

/// Named RNG stream states carried inside checkpoints.
using RngStates = std::map<std::string, std::array<std::uint64_t, 4>>;

void write_model(std::ostream& out, const Mlp& m);
Mlp read_model(std::istream& in);

/// Versioned binary model checkpoint; float32 parameters round-trip
/// bit-exactly.
void save_model(const std::string& path, const Mlp& m, const RngStates& rng = {});

struct LoadedModel {
    Mlp model;
    RngStates rng;
};
LoadedModel load_model(const std::string& path);

} // namespace fsrlab
