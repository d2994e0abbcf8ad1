#pragma once

#include "qmap/pooler.hpp"
#include "qmap/unet.hpp"

#include <string>

namespace qmap::models {

// Checkpoint (binary) plus a JSON sidecar (same path + ".json") recording
// the spec, map methods, fusion mode, seed, patch protocol and the
// fingerprint of the training manifest, so downstream stages can refuse
// mismatched artifacts.
struct GeneratorBundle {
    UNetSpec spec;
    fr::FrMethod method = fr::FrMethod::fsim_gm;
    nn::ComputeGraph graph;
    uint64_t seed = 0;
    std::string data_fingerprint;
    int patch_size = 144;
    int stride = 120;
};

void save_generator(const GeneratorBundle& b, const std::string& path);
GeneratorBundle load_generator(const std::string& path);

struct PoolerBundle {
    PoolNetSpec spec;
    PoolerNet net;
    std::string source_mode = "gt"; // pm | gt | direct
    uint64_t seed = 0;
    std::string data_fingerprint;
    int patch_size = 144;
    int stride = 120;
};

void save_pooler(const PoolerBundle& b, const std::string& path);
PoolerBundle load_pooler(const std::string& path);

} // namespace qmap::models
