#include "qmap/graph.hpp"
#include "qmap/errors.hpp"
#include "qmap/hash.hpp"
#include "qmap/nn_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace qmap::nn {

const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv3x3_pad1: return "conv3x3_pad1";
        case LayerKind::deconv2x2_stride2: return "deconv2x2_stride2";
        case LayerKind::batch_norm: return "batch_norm";
        case LayerKind::leaky_relu: return "leaky_relu";
        case LayerKind::max_pool2x2: return "max_pool2x2";
        case LayerKind::fully_connected: return "fully_connected";
        case LayerKind::dropout: return "dropout";
        case LayerKind::concat_channels: return "concat_channels";
        case LayerKind::sigmoid: return "sigmoid";
    }
    return "?";
}

LayerSpec LayerSpec::conv(int in, int out) {
    if (in <= 0 || out <= 0) throw DomainError("conv channels must be positive");
    LayerSpec s;
    s.kind = LayerKind::conv3x3_pad1;
    s.in_channels = in;
    s.out_channels = out;
    return s;
}

LayerSpec LayerSpec::deconv(int in, int out) {
    if (in <= 0 || out <= 0) throw DomainError("deconv channels must be positive");
    LayerSpec s;
    s.kind = LayerKind::deconv2x2_stride2;
    s.in_channels = in;
    s.out_channels = out;
    return s;
}

LayerSpec LayerSpec::batch_norm(int channels) {
    if (channels <= 0) throw DomainError("batch_norm channels must be positive");
    LayerSpec s;
    s.kind = LayerKind::batch_norm;
    s.in_channels = channels;
    return s;
}

LayerSpec LayerSpec::leaky_relu(double slope) {
    if (!(slope > 0.0 && slope < 1.0)) throw DomainError("leaky slope must be in (0,1)");
    LayerSpec s;
    s.kind = LayerKind::leaky_relu;
    s.slope = slope;
    return s;
}

LayerSpec LayerSpec::max_pool() {
    LayerSpec s;
    s.kind = LayerKind::max_pool2x2;
    return s;
}

LayerSpec LayerSpec::fully_connected(int in, int out) {
    if (in <= 0 || out <= 0) throw DomainError("fc unit counts must be positive");
    LayerSpec s;
    s.kind = LayerKind::fully_connected;
    s.in_units = in;
    s.out_units = out;
    return s;
}

LayerSpec LayerSpec::dropout(double p) {
    if (!(p >= 0.0 && p < 1.0)) throw DomainError("dropout probability must be in [0,1)");
    LayerSpec s;
    s.kind = LayerKind::dropout;
    s.drop_p = p;
    return s;
}

LayerSpec LayerSpec::concat(const std::string& tap) {
    if (tap.empty()) throw DomainError("concat needs a tap name");
    LayerSpec s;
    s.kind = LayerKind::concat_channels;
    s.concat_with = tap;
    return s;
}

LayerSpec LayerSpec::sigmoid() {
    LayerSpec s;
    s.kind = LayerKind::sigmoid;
    return s;
}

const Tensor4& Tape::last_layer_input() const {
    if (layers.empty() || layers.back().in.size() == 0)
        throw StateError("tape does not record the last layer input (train mode required)");
    return layers.back().in;
}

void ComputeGraph::add(LayerSpec spec, std::string save_as) {
    Node node;
    node.spec = spec;
    node.save_as = std::move(save_as);
    switch (spec.kind) {
        case LayerKind::conv3x3_pad1:
            node.params = {Tensor4(spec.out_channels, spec.in_channels, 3, 3),
                           Tensor4(spec.out_channels, 1, 1, 1)};
            break;
        case LayerKind::deconv2x2_stride2:
            node.params = {Tensor4(spec.in_channels, spec.out_channels, 2, 2),
                           Tensor4(spec.out_channels, 1, 1, 1)};
            break;
        case LayerKind::batch_norm:
            node.params = {Tensor4(spec.in_channels, 1, 1, 1), Tensor4(spec.in_channels, 1, 1, 1)};
            node.buffers = {Tensor4(spec.in_channels, 1, 1, 1), Tensor4(spec.in_channels, 1, 1, 1)};
            break;
        case LayerKind::fully_connected:
            node.params = {Tensor4(spec.out_units, spec.in_units, 1, 1),
                           Tensor4(spec.out_units, 1, 1, 1)};
            break;
        default:
            break;
    }
    nodes.push_back(std::move(node));
    id_ = 0; // topology changed
}

void ComputeGraph::init_params(const Rng& rng) {
    for (size_t i = 0; i < nodes.size(); ++i) {
        Node& node = nodes[i];
        Rng stream = rng.substream("init", i);
        switch (node.spec.kind) {
            case LayerKind::conv3x3_pad1: {
                double limit = std::sqrt(6.0 / (node.spec.in_channels * 9.0));
                for (double& v : node.params[0].data) v = stream.uniform(-limit, limit);
                std::fill(node.params[1].data.begin(), node.params[1].data.end(), 0.0);
                break;
            }
            case LayerKind::deconv2x2_stride2: {
                double limit = std::sqrt(6.0 / (node.spec.in_channels * 4.0));
                for (double& v : node.params[0].data) v = stream.uniform(-limit, limit);
                std::fill(node.params[1].data.begin(), node.params[1].data.end(), 0.0);
                break;
            }
            case LayerKind::fully_connected: {
                double limit = std::sqrt(6.0 / node.spec.in_units);
                for (double& v : node.params[0].data) v = stream.uniform(-limit, limit);
                std::fill(node.params[1].data.begin(), node.params[1].data.end(), 0.0);
                break;
            }
            case LayerKind::batch_norm:
                std::fill(node.params[0].data.begin(), node.params[0].data.end(), 1.0);
                std::fill(node.params[1].data.begin(), node.params[1].data.end(), 0.0);
                std::fill(node.buffers[0].data.begin(), node.buffers[0].data.end(), 0.0);
                std::fill(node.buffers[1].data.begin(), node.buffers[1].data.end(), 1.0);
                break;
            default:
                break;
        }
    }
}

size_t ComputeGraph::param_count() const {
    size_t total = 0;
    for (const Node& node : nodes)
        for (const Tensor4& p : node.params) total += p.size();
    return total;
}

uint64_t ComputeGraph::param_checksum() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const Node& node : nodes)
        for (const Tensor4& p : node.params)
            h = fnv1a64(p.data.data(), p.data.size() * sizeof(double), h);
    return h;
}

uint64_t ComputeGraph::id() const {
    if (id_ != 0) return id_;
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const Node& node : nodes) {
        uint32_t fields[5] = {static_cast<uint32_t>(node.spec.kind),
                              static_cast<uint32_t>(node.spec.in_channels),
                              static_cast<uint32_t>(node.spec.out_channels),
                              static_cast<uint32_t>(node.spec.in_units),
                              static_cast<uint32_t>(node.spec.out_units)};
        h = fnv1a64(fields, sizeof(fields), h);
        h = fnv1a64(node.save_as.data(), node.save_as.size(), h);
        h = fnv1a64(node.spec.concat_with.data(), node.spec.concat_with.size(), h);
    }
    id_ = h ? h : 1;
    return id_;
}

namespace {

void axpy(Tensor4& a, const Tensor4& b) {
    if (!a.same_shape(b)) throw ShapeError("gradient shapes differ: " + a.shape_str() + " vs " + b.shape_str());
    for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

[[noreturn]] void layer_shape_error(size_t i, const LayerSpec& spec, const std::string& detail) {
    throw ShapeError("layer " + std::to_string(i) + " (" + kind_name(spec.kind) + "): " + detail);
}

} // namespace

std::pair<Tensor4, Tape> ComputeGraph::forward(const Tensor4& input, Mode mode, uint64_t rng_seed) {
    Tape tape;
    tape.mode = mode;
    tape.graph_id = id();
    const bool record = (mode == Mode::train);
    if (record) tape.input = input;
    tape.layers.resize(nodes.size());

    Rng rng(rng_seed);
    std::map<std::string, Tensor4> taps;
    Tensor4 cur = input;

    for (size_t i = 0; i < nodes.size(); ++i) {
        Node& node = nodes[i];
        const LayerSpec& spec = node.spec;
        LayerTape& lt = tape.layers[i];
        Tensor4 out;

        switch (spec.kind) {
            case LayerKind::conv3x3_pad1: {
                if (cur.c != spec.in_channels)
                    layer_shape_error(i, spec, "expected " + std::to_string(spec.in_channels) +
                                                   " input channels, got " + std::to_string(cur.c));
                kern::conv3x3_fwd(cur, node.params[0], node.params[1], out);
                if (record) lt.in = cur;
                break;
            }
            case LayerKind::deconv2x2_stride2: {
                if (cur.c != spec.in_channels)
                    layer_shape_error(i, spec, "expected " + std::to_string(spec.in_channels) +
                                                   " input channels, got " + std::to_string(cur.c));
                kern::deconv2x2_fwd(cur, node.params[0], node.params[1], out);
                if (record) lt.in = cur;
                break;
            }
            case LayerKind::batch_norm: {
                if (cur.c != spec.in_channels)
                    layer_shape_error(i, spec, "expected " + std::to_string(spec.in_channels) +
                                                   " channels, got " + std::to_string(cur.c));
                out = Tensor4::zeros_like(cur);
                const int C = cur.c;
                const size_t plane = static_cast<size_t>(cur.h) * cur.w;
                const size_t cnt = static_cast<size_t>(cur.n) * plane;
                if (mode == Mode::train) {
                    lt.mean.resize(C);
                    lt.var.resize(C);
#pragma omp parallel for schedule(static)
                    for (int ch = 0; ch < C; ++ch) {
                        double sum = 0.0;
                        for (int b = 0; b < cur.n; ++b) {
                            const double* src = cur.data.data() + (static_cast<size_t>(b) * C + ch) * plane;
                            for (size_t k = 0; k < plane; ++k) sum += src[k];
                        }
                        double mean = sum / static_cast<double>(cnt);
                        double sq = 0.0;
                        for (int b = 0; b < cur.n; ++b) {
                            const double* src = cur.data.data() + (static_cast<size_t>(b) * C + ch) * plane;
                            for (size_t k = 0; k < plane; ++k) {
                                double d = src[k] - mean;
                                sq += d * d;
                            }
                        }
                        double var = sq / static_cast<double>(cnt);
                        lt.mean[ch] = mean;
                        lt.var[ch] = var;
                        double inv_std = 1.0 / std::sqrt(var + spec.bn_eps);
                        double gamma = node.params[0].data[ch];
                        double beta = node.params[1].data[ch];
                        for (int b = 0; b < cur.n; ++b) {
                            const double* src = cur.data.data() + (static_cast<size_t>(b) * C + ch) * plane;
                            double* dst = out.data.data() + (static_cast<size_t>(b) * C + ch) * plane;
                            for (size_t k = 0; k < plane; ++k)
                                dst[k] = gamma * ((src[k] - mean) * inv_std) + beta;
                        }
                        node.buffers[0].data[ch] = spec.bn_momentum * node.buffers[0].data[ch] +
                                                   (1.0 - spec.bn_momentum) * mean;
                        node.buffers[1].data[ch] = spec.bn_momentum * node.buffers[1].data[ch] +
                                                   (1.0 - spec.bn_momentum) * var;
                    }
                    lt.in = cur;
                } else {
#pragma omp parallel for schedule(static)
                    for (int ch = 0; ch < C; ++ch) {
                        double inv_std = 1.0 / std::sqrt(node.buffers[1].data[ch] + spec.bn_eps);
                        double gamma = node.params[0].data[ch];
                        double beta = node.params[1].data[ch];
                        double mean = node.buffers[0].data[ch];
                        for (int b = 0; b < cur.n; ++b) {
                            const double* src = cur.data.data() + (static_cast<size_t>(b) * C + ch) * plane;
                            double* dst = out.data.data() + (static_cast<size_t>(b) * C + ch) * plane;
                            for (size_t k = 0; k < plane; ++k)
                                dst[k] = gamma * ((src[k] - mean) * inv_std) + beta;
                        }
                    }
                }
                break;
            }
            case LayerKind::leaky_relu: {
                out = Tensor4::zeros_like(cur);
                const double slope = spec.slope;
#pragma omp parallel for schedule(static)
                for (long k = 0; k < static_cast<long>(cur.size()); ++k) {
                    double v = cur.data[k];
                    out.data[k] = v > 0.0 ? v : slope * v;
                }
                if (record) lt.in = cur;
                break;
            }
            case LayerKind::max_pool2x2: {
                std::vector<int64_t> argmax;
                kern::maxpool2x2_fwd(cur, out, argmax);
                if (record) {
                    lt.in = cur;
                    lt.argmax = std::move(argmax);
                }
                break;
            }
            case LayerKind::fully_connected: {
                if (cur.c * cur.h * cur.w != spec.in_units)
                    layer_shape_error(i, spec, "expected " + std::to_string(spec.in_units) +
                                                   " input values, got " + cur.shape_str());
                kern::fc_fwd(cur, node.params[0], node.params[1], out);
                if (record) lt.in = cur;
                break;
            }
            case LayerKind::dropout: {
                if (mode == Mode::eval) {
                    out = cur;
                } else {
                    Rng stream = rng.substream("dropout", i);
                    lt.mask.resize(cur.size());
                    out = Tensor4::zeros_like(cur);
                    const double keep = 1.0 - spec.drop_p;
                    const double scale = 1.0 / keep;
                    for (size_t k = 0; k < cur.size(); ++k) {
                        bool keep_it = stream.uniform() < keep;
                        lt.mask[k] = keep_it ? 1 : 0;
                        out.data[k] = keep_it ? cur.data[k] * scale : 0.0;
                    }
                }
                break;
            }
            case LayerKind::concat_channels: {
                auto it = taps.find(spec.concat_with);
                if (it == taps.end())
                    throw StateError("layer " + std::to_string(i) + ": no tap named '" +
                                     spec.concat_with + "' to concatenate");
                lt.concat_c0 = it->second.c;
                out = concat_channels(it->second, cur);
                taps.erase(it);
                break;
            }
            case LayerKind::sigmoid: {
                out = Tensor4::zeros_like(cur);
#pragma omp parallel for schedule(static)
                for (long k = 0; k < static_cast<long>(cur.size()); ++k) {
                    double z = cur.data[k];
                    out.data[k] = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                           : std::exp(z) / (1.0 + std::exp(z));
                }
                if (record) lt.in = cur;
                lt.out = out;
                break;
            }
        }

        if (!node.save_as.empty()) taps[node.save_as] = out;
        cur = std::move(out);
    }

    if (!taps.empty())
        throw StateError("skip tap '" + taps.begin()->first + "' was never consumed");
    if (record) tape.output = cur;
    return {std::move(cur), std::move(tape)};
}

Gradients ComputeGraph::backward(const Tape& tape, const Tensor4& output_grad) const {
    return backward_from(tape, output_grad, nodes.size());
}

Gradients ComputeGraph::backward_from(const Tape& tape, const Tensor4& grad0,
                                      size_t from_layer) const {
    if (tape.mode != Mode::train)
        throw StateError("backward requires a tape from a train-mode forward");
    if (tape.graph_id != id() || tape.layers.size() != nodes.size())
        throw StateError("tape does not match this graph");
    if (from_layer > nodes.size()) throw StateError("backward_from: layer index out of range");

    Gradients g;
    g.params.resize(nodes.size());
    for (size_t i = 0; i < nodes.size(); ++i) {
        g.params[i].reserve(nodes[i].params.size());
        for (const Tensor4& p : nodes[i].params) g.params[i].push_back(Tensor4::zeros_like(p));
    }

    std::map<std::string, Tensor4> tap_grads;
    Tensor4 cur = grad0;

    for (size_t ii = from_layer; ii-- > 0;) {
        const Node& node = nodes[ii];
        const LayerSpec& spec = node.spec;
        const LayerTape& lt = tape.layers[ii];

        if (!node.save_as.empty()) {
            auto it = tap_grads.find(node.save_as);
            if (it != tap_grads.end()) {
                axpy(cur, it->second);
                tap_grads.erase(it);
            }
        }

        Tensor4 din;
        switch (spec.kind) {
            case LayerKind::conv3x3_pad1: {
                kern::conv3x3_bwd_input(cur, node.params[0], din);
                kern::conv3x3_bwd_params(cur, lt.in, g.params[ii][0], g.params[ii][1]);
                break;
            }
            case LayerKind::deconv2x2_stride2: {
                kern::deconv2x2_bwd_input(cur, node.params[0], din);
                kern::deconv2x2_bwd_params(cur, lt.in, g.params[ii][0], g.params[ii][1]);
                break;
            }
            case LayerKind::batch_norm: {
                const Tensor4& x = lt.in;
                din = Tensor4::zeros_like(x);
                const int C = x.c;
                const size_t plane = static_cast<size_t>(x.h) * x.w;
                const size_t cnt = static_cast<size_t>(x.n) * plane;
#pragma omp parallel for schedule(static)
                for (int ch = 0; ch < C; ++ch) {
                    const double mean = lt.mean[ch];
                    const double inv_std = 1.0 / std::sqrt(lt.var[ch] + spec.bn_eps);
                    const double gamma = node.params[0].data[ch];
                    double sum_dy = 0.0, sum_dy_xhat = 0.0;
                    for (int b = 0; b < x.n; ++b) {
                        const double* xs = x.data.data() + (static_cast<size_t>(b) * C + ch) * plane;
                        const double* dys = cur.data.data() + (static_cast<size_t>(b) * C + ch) * plane;
                        for (size_t k = 0; k < plane; ++k) {
                            double xhat = (xs[k] - mean) * inv_std;
                            sum_dy += dys[k];
                            sum_dy_xhat += dys[k] * xhat;
                        }
                    }
                    g.params[ii][0].data[ch] = sum_dy_xhat; // dgamma
                    g.params[ii][1].data[ch] = sum_dy;      // dbeta
                    const double mean_dy = sum_dy / static_cast<double>(cnt);
                    const double mean_dy_xhat = sum_dy_xhat / static_cast<double>(cnt);
                    for (int b = 0; b < x.n; ++b) {
                        const double* xs = x.data.data() + (static_cast<size_t>(b) * C + ch) * plane;
                        const double* dys = cur.data.data() + (static_cast<size_t>(b) * C + ch) * plane;
                        double* ds = din.data.data() + (static_cast<size_t>(b) * C + ch) * plane;
                        for (size_t k = 0; k < plane; ++k) {
                            double xhat = (xs[k] - mean) * inv_std;
                            ds[k] = gamma * inv_std * (dys[k] - mean_dy - xhat * mean_dy_xhat);
                        }
                    }
                }
                break;
            }
            case LayerKind::leaky_relu: {
                din = Tensor4::zeros_like(lt.in);
                const double slope = spec.slope;
#pragma omp parallel for schedule(static)
                for (long k = 0; k < static_cast<long>(din.size()); ++k)
                    din.data[k] = cur.data[k] * (lt.in.data[k] > 0.0 ? 1.0 : slope);
                break;
            }
            case LayerKind::max_pool2x2: {
                din = Tensor4::zeros_like(lt.in);
                kern::maxpool2x2_bwd(cur, lt.argmax, din);
                break;
            }
            case LayerKind::fully_connected: {
                din = Tensor4::zeros_like(lt.in);
                kern::fc_bwd_input(cur, node.params[0], din);
                kern::fc_bwd_params(cur, lt.in, g.params[ii][0], g.params[ii][1]);
                break;
            }
            case LayerKind::dropout: {
                din = Tensor4::zeros_like(cur);
                const double scale = 1.0 / (1.0 - spec.drop_p);
                for (size_t k = 0; k < cur.size(); ++k)
                    din.data[k] = lt.mask[k] ? cur.data[k] * scale : 0.0;
                break;
            }
            case LayerKind::concat_channels: {
                const int c0 = lt.concat_c0;
                const int c1 = cur.c - c0;
                Tensor4 tap_part(cur.n, c0, cur.h, cur.w);
                din = Tensor4(cur.n, c1, cur.h, cur.w);
                const size_t plane = static_cast<size_t>(cur.h) * cur.w;
                for (int b = 0; b < cur.n; ++b) {
                    const double* src = cur.data.data() + static_cast<size_t>(b) * cur.c * plane;
                    std::copy(src, src + static_cast<size_t>(c0) * plane,
                              tap_part.data.begin() + static_cast<size_t>(b) * c0 * plane);
                    std::copy(src + static_cast<size_t>(c0) * plane,
                              src + static_cast<size_t>(cur.c) * plane,
                              din.data.begin() + static_cast<size_t>(b) * c1 * plane);
                }
                auto it = tap_grads.find(spec.concat_with);
                if (it == tap_grads.end())
                    tap_grads.emplace(spec.concat_with, std::move(tap_part));
                else
                    axpy(it->second, tap_part);
                break;
            }
            case LayerKind::sigmoid: {
                din = Tensor4::zeros_like(cur);
#pragma omp parallel for schedule(static)
                for (long k = 0; k < static_cast<long>(cur.size()); ++k) {
                    double s = lt.out.data[k];
                    din.data[k] = cur.data[k] * s * (1.0 - s);
                }
                break;
            }
        }
        cur = std::move(din);
    }

    g.input = std::move(cur);
    return g;
}

} // namespace qmap::nn
