#include "qmap/adam.hpp"
#include "qmap/errors.hpp"

#include <cmath>

namespace qmap::nn {

AdamState AdamState::for_graph(const ComputeGraph& g) {
    AdamState s;
    s.m.resize(g.nodes.size());
    s.v.resize(g.nodes.size());
    for (size_t i = 0; i < g.nodes.size(); ++i) {
        for (const Tensor4& p : g.nodes[i].params) {
            s.m[i].push_back(Tensor4::zeros_like(p));
            s.v[i].push_back(Tensor4::zeros_like(p));
        }
    }
    return s;
}

void adam_step(ComputeGraph& g, const Gradients& grads, AdamState& state, const AdamConfig& cfg) {
    if (grads.params.size() != g.nodes.size() || state.m.size() != g.nodes.size())
        throw StateError("adam_step: gradient/state layout does not match the graph");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    for (size_t i = 0; i < g.nodes.size(); ++i) {
        for (size_t j = 0; j < g.nodes[i].params.size(); ++j) {
            Tensor4& p = g.nodes[i].params[j];
            const Tensor4& grad = grads.params[i][j];
            Tensor4& m = state.m[i][j];
            Tensor4& v = state.v[i][j];
            for (size_t k = 0; k < p.size(); ++k) {
                const double gk = grad.data[k];
                if (!std::isfinite(gk))
                    throw NumericError("non-finite gradient in layer " + std::to_string(i) +
                                       " (" + kind_name(g.nodes[i].spec.kind) + ")");
                m.data[k] = cfg.beta1 * m.data[k] + (1.0 - cfg.beta1) * gk;
                v.data[k] = cfg.beta2 * v.data[k] + (1.0 - cfg.beta2) * gk * gk;
                const double mhat = m.data[k] / bc1;
                const double vhat = v.data[k] / bc2;
                p.data[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
                p.data[k] -= cfg.lr * cfg.weight_decay * p.data[k];
            }
        }
    }
}

} // namespace qmap::nn
