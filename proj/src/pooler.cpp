#include "qmap/pooler.hpp"
#include "qmap/errors.hpp"
#include "qmap/hash.hpp"

namespace qmap::models {

using nn::ComputeGraph;
using nn::LayerSpec;
using nn::Tensor4;

namespace {
constexpr int kFc2Units = 1024;
}

PoolerKind parse_pooler_kind(const std::string& token) {
    if (token == "dpn") return PoolerKind::DPN;
    if (token == "fc2") return PoolerKind::FC2;
    if (token == "dpn_direct") return PoolerKind::DPN_direct;
    throw FormatError("unknown pooler kind '" + token + "'");
}

std::string pooler_kind_token(PoolerKind k) {
    switch (k) {
        case PoolerKind::DPN: return "dpn";
        case PoolerKind::FC2: return "fc2";
        case PoolerKind::DPN_direct: return "dpn_direct";
    }
    throw FormatError("bad PoolerKind");
}

FusionKind parse_fusion(const std::string& token) {
    if (token == "single") return FusionKind::single_stream;
    if (token == "multi") return FusionKind::multi_stream;
    throw FormatError("unknown fusion mode '" + token + "'");
}

std::string fusion_token(FusionKind k) {
    return k == FusionKind::single_stream ? "single" : "multi";
}

void PoolNetSpec::validate() const {
    if (input_channels <= 0) throw DomainError("PoolNetSpec: input_channels must be positive");
    if (conv_channels.size() != 5)
        throw DomainError("PoolNetSpec: the DPN trunk has exactly five conv stages");
    for (int c : conv_channels)
        if (c <= 0) throw DomainError("PoolNetSpec: conv widths must be positive");
    if (fc_units <= 0) throw DomainError("PoolNetSpec: fc_units must be positive");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0))
        throw DomainError("PoolNetSpec: dropout_p must be in [0,1)");
    if (kind != PoolerKind::FC2 && feature_edge() < 1)
        throw ShapeError("pooler input " + std::to_string(input_size) +
                         " is too small for five halvings");
    if (input_size < 1) throw DomainError("PoolNetSpec: input_size must be positive");
}

int PoolNetSpec::feature_edge() const {
    int s = input_size;
    for (int i = 0; i < 5; ++i) s /= 2;
    return s;
}

int PoolerNet::streams() const {
    if (fusion.kind == FusionKind::multi_stream)
        return static_cast<int>(trunks.size());
    return 1;
}

size_t PoolerNet::param_count() const {
    size_t total = head.param_count();
    for (const ComputeGraph& t : trunks) total += t.param_count();
    return total;
}

uint64_t PoolerNet::param_checksum() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const ComputeGraph& t : trunks) {
        uint64_t c = t.param_checksum();
        h = fnv1a64(&c, sizeof(c), h);
    }
    uint64_t c = head.param_checksum();
    return fnv1a64(&c, sizeof(c), h);
}

namespace {

ComputeGraph build_trunk(const PoolNetSpec& spec, int in_channels, const Rng& rng) {
    ComputeGraph g;
    int in_c = in_channels;
    for (int i = 0; i < 5; ++i) {
        g.add(LayerSpec::conv(in_c, spec.conv_channels[i]));
        g.add(LayerSpec::batch_norm(spec.conv_channels[i]));
        g.add(LayerSpec::leaky_relu(spec.leaky_slope));
        g.add(LayerSpec::max_pool());
        in_c = spec.conv_channels[i];
    }
    g.init_params(rng);
    return g;
}

ComputeGraph build_dpn_head(const PoolNetSpec& spec, int feature_units, const Rng& rng) {
    ComputeGraph g;
    g.add(LayerSpec::fully_connected(feature_units, spec.fc_units));
    g.add(LayerSpec::leaky_relu(spec.leaky_slope));
    g.add(LayerSpec::dropout(spec.dropout_p));
    g.add(LayerSpec::fully_connected(spec.fc_units, 1));
    g.init_params(rng);
    return g;
}

ComputeGraph build_fc2(const PoolNetSpec& spec, int input_units, const Rng& rng) {
    ComputeGraph g;
    g.add(LayerSpec::fully_connected(input_units, kFc2Units));
    g.add(LayerSpec::leaky_relu(spec.leaky_slope));
    g.add(LayerSpec::dropout(spec.dropout_p));
    g.add(LayerSpec::fully_connected(kFc2Units, kFc2Units));
    g.add(LayerSpec::leaky_relu(spec.leaky_slope));
    g.add(LayerSpec::dropout(spec.dropout_p));
    g.add(LayerSpec::fully_connected(kFc2Units, 1));
    g.init_params(rng);
    return g;
}

} // namespace

PoolerNet build_pooler(const PoolNetSpec& spec, uint64_t seed) {
    return build_pooler(spec, FusionMode{}, seed);
}

PoolerNet build_pooler(const PoolNetSpec& spec, const FusionMode& fusion, uint64_t seed) {
    spec.validate();
    PoolerNet net;
    net.spec = spec;
    net.fusion = fusion;
    Rng rng(seed);

    if (spec.kind == PoolerKind::DPN_direct && spec.input_channels != 3)
        throw DomainError("DPN_direct pools raw images and needs 3 input channels");

    if (spec.kind == PoolerKind::FC2) {
        int units = spec.input_channels * spec.input_size * spec.input_size;
        net.head = build_fc2(spec, units, rng.substream("head"));
        return net;
    }

    const int edge = spec.feature_edge();
    const int feat_per_trunk = spec.conv_channels.back() * edge * edge;

    if (fusion.kind == FusionKind::multi_stream) {
        if (fusion.map_methods.size() < 2)
            throw DomainError("multi-stream fusion needs at least two map methods");
        if (spec.input_channels != 1)
            throw DomainError("multi-stream trunks each take a single-channel map");
        for (size_t i = 0; i < fusion.map_methods.size(); ++i)
            net.trunks.push_back(build_trunk(spec, 1, rng.substream("trunk", i)));
        net.head = build_dpn_head(spec, feat_per_trunk * static_cast<int>(net.trunks.size()),
                                  rng.substream("head"));
    } else {
        net.trunks.push_back(build_trunk(spec, spec.input_channels, rng.substream("trunk", 0)));
        net.head = build_dpn_head(spec, feat_per_trunk, rng.substream("head"));
    }
    return net;
}

nn::Tensor4 pooler_forward(PoolerNet& net, const std::vector<Tensor4>& streams,
                           nn::Mode mode, uint64_t rng_seed, PoolerTapes* tapes) {
    if (static_cast<int>(streams.size()) != net.streams())
        throw ShapeError("pooler expects " + std::to_string(net.streams()) + " input stream(s), got " +
                         std::to_string(streams.size()));
    PoolerTapes local;
    PoolerTapes& t = tapes ? *tapes : local;
    t.trunks.clear();
    t.feature_channels.clear();

    Tensor4 features;
    if (net.trunks.empty()) {
        features = streams[0];
    } else {
        for (size_t i = 0; i < net.trunks.size(); ++i) {
            auto [out, tape] = net.trunks[i].forward(streams[i], mode, rng_seed ^ (0x9e37 + i));
            t.feature_channels.push_back(out.c);
            features = (i == 0) ? std::move(out) : nn::concat_channels(features, out);
            t.trunks.push_back(std::move(tape));
        }
    }
    auto [score, head_tape] = net.head.forward(features, mode, rng_seed ^ 0xbeef);
    t.head = std::move(head_tape);
    return score;
}

PoolerGrads pooler_backward(const PoolerNet& net, const PoolerTapes& tapes,
                            const Tensor4& dscore) {
    PoolerGrads g;
    g.head = net.head.backward(tapes.head, dscore);
    if (net.trunks.empty()) return g;

    // Split the head's input gradient back into per-trunk feature blocks.
    const Tensor4& dfeat = g.head.input;
    const size_t plane = static_cast<size_t>(dfeat.h) * dfeat.w;
    int c_off = 0;
    for (size_t i = 0; i < net.trunks.size(); ++i) {
        const int c_i = tapes.feature_channels[i];
        Tensor4 part(dfeat.n, c_i, dfeat.h, dfeat.w);
        for (int b = 0; b < dfeat.n; ++b) {
            const double* src = dfeat.data.data() +
                                (static_cast<size_t>(b) * dfeat.c + c_off) * plane;
            std::copy(src, src + static_cast<size_t>(c_i) * plane,
                      part.data.begin() + static_cast<size_t>(b) * c_i * plane);
        }
        g.trunks.push_back(net.trunks[i].backward(tapes.trunks[i], part));
        c_off += c_i;
    }
    return g;
}

} // namespace qmap::models
