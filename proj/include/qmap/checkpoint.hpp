#pragma once

#include "qmap/adam.hpp"
#include "qmap/graph.hpp"

#include <optional>
#include <string>
#include <vector>

namespace qmap::nn {

// Versioned little-endian container: graph topology, parameter tensors,
// batch-norm buffers, optional optimizer moments, and the run seed.
struct Checkpoint {
    struct Entry {
        std::string name;
        ComputeGraph graph;
        std::optional<AdamState> adam;
    };
    std::vector<Entry> entries;
    uint64_t rng_seed = 0;

    const Entry& find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace qmap::nn
