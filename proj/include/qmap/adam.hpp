#pragma once

#include "qmap/graph.hpp"

namespace qmap::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-11; // decoupled: p -= lr * wd * p after the update
};

struct AdamState {
    uint64_t step = 0;
    std::vector<std::vector<Tensor4>> m; // first moments, aligned with graph params
    std::vector<std::vector<Tensor4>> v; // second moments

    static AdamState for_graph(const ComputeGraph& g);
};

// One Adam update over all graph parameters. Throws NumericError on
// non-finite gradients so a diverged run aborts with diagnostics instead of
// training on garbage.
void adam_step(ComputeGraph& g, const Gradients& grads, AdamState& state, const AdamConfig& cfg);

} // namespace qmap::nn
