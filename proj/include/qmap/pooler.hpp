#pragma once

#include "qmap/frmaps.hpp"
#include "qmap/graph.hpp"

#include <string>
#include <vector>

namespace qmap::models {

enum class PoolerKind { DPN, FC2, DPN_direct };

PoolerKind parse_pooler_kind(const std::string& token); // dpn | fc2 | dpn_direct
std::string pooler_kind_token(PoolerKind k);

// Score regressor. DPN: five conv/bn/lrelu/pool stages, then FC+dropout+FC.
// FC2: two 1024-unit fully-connected layers and a scalar head, no convs.
// DPN_direct is a DPN fed the raw 3-channel image instead of a map.
struct PoolNetSpec {
    PoolerKind kind = PoolerKind::DPN;
    int input_channels = 1; // per stream: 1 per map, 3 direct, k for fused maps
    int input_size = 144;   // square input edge, needed to size the FC layers
    std::vector<int> conv_channels = {32, 64, 128, 128, 128};
    int fc_units = 512;
    double dropout_p = 0.5;
    double leaky_slope = 0.2;

    void validate() const;
    int feature_edge() const; // spatial edge after the five poolings
};

enum class FusionKind { single_stream, multi_stream };

FusionKind parse_fusion(const std::string& token); // single | multi
std::string fusion_token(FusionKind k);

struct FusionMode {
    FusionKind kind = FusionKind::single_stream;
    std::vector<fr::FrMethod> map_methods; // empty = one unnamed input
};

// Trunk/head split: single-stream and direct poolers use one trunk; the
// multi-stream fusion runs one trunk per map and concatenates trunk features
// before the shared fully-connected head. FC2 has no trunks at all.
struct PoolerNet {
    PoolNetSpec spec;
    FusionMode fusion;
    std::vector<nn::ComputeGraph> trunks;
    nn::ComputeGraph head;

    int streams() const;
    size_t param_count() const;
    uint64_t param_checksum() const;
};

PoolerNet build_pooler(const PoolNetSpec& spec, uint64_t seed);
PoolerNet build_pooler(const PoolNetSpec& spec, const FusionMode& fusion, uint64_t seed);

struct PoolerTapes {
    std::vector<nn::Tape> trunks;
    nn::Tape head;
    std::vector<int> feature_channels; // channels each trunk contributed
};

// streams.size() must equal net.streams(); every stream is (B, c, H, W).
// Returns the (B,1,1,1) score tensor.
nn::Tensor4 pooler_forward(PoolerNet& net, const std::vector<nn::Tensor4>& streams,
                           nn::Mode mode, uint64_t rng_seed, PoolerTapes* tapes = nullptr);

struct PoolerGrads {
    std::vector<nn::Gradients> trunks;
    nn::Gradients head;
};

PoolerGrads pooler_backward(const PoolerNet& net, const PoolerTapes& tapes,
                            const nn::Tensor4& dscore);

} // namespace qmap::models
