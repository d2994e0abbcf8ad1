#include "qmap/unet.hpp"
#include "qmap/errors.hpp"

namespace qmap::models {

using nn::ComputeGraph;
using nn::LayerSpec;

void UNetSpec::validate() const {
    if (depth < 1) throw DomainError("UNetSpec: depth must be >= 1");
    if (static_cast<int>(stage_channels.size()) != depth)
        throw DomainError("UNetSpec: stage_channels must list one width per stage");
    for (int c : stage_channels)
        if (c <= 0) throw DomainError("UNetSpec: stage widths must be positive");
    if (input_channels <= 0 || output_channels != 1)
        throw DomainError("UNetSpec: expects positive input channels and a 1-channel output");
}

int UNetSpec::divisor() const { return 1 << depth; }

void check_generator_input(const UNetSpec& spec, int height, int width) {
    const int d = spec.divisor();
    if (height <= 0 || width <= 0 || height % d != 0 || width % d != 0)
        throw ShapeError("generator input " + std::to_string(height) + "x" + std::to_string(width) +
                         " is not a positive multiple of " + std::to_string(d));
}

nn::ComputeGraph build_generator(const UNetSpec& spec, uint64_t seed) {
    spec.validate();
    ComputeGraph g;
    const int depth = spec.depth;
    const auto& ch = spec.stage_channels;

    // Subsampling path; the pre-pool activations are tapped for the skips.
    int in_c = spec.input_channels;
    for (int i = 0; i < depth; ++i) {
        g.add(LayerSpec::conv(in_c, ch[i]));
        g.add(LayerSpec::batch_norm(ch[i]));
        g.add(LayerSpec::leaky_relu(spec.leaky_slope), "sp" + std::to_string(i));
        g.add(LayerSpec::max_pool());
        in_c = ch[i];
    }

    // Upsampling path: deconv, concat the same-size skip, merge conv.
    for (int j = 0; j < depth; ++j) {
        const int skip_idx = depth - 1 - j;
        const int skip_c = ch[skip_idx];
        const int out_c = (j < depth - 1) ? ch[depth - 2 - j] : ch[0];
        g.add(LayerSpec::deconv(in_c, out_c));
        g.add(LayerSpec::concat("sp" + std::to_string(skip_idx)));
        g.add(LayerSpec::conv(skip_c + out_c, out_c));
        g.add(LayerSpec::batch_norm(out_c));
        g.add(LayerSpec::leaky_relu(spec.leaky_slope));
        in_c = out_c;
    }

    g.add(LayerSpec::conv(in_c, spec.output_channels));
    g.add(LayerSpec::sigmoid());

    g.init_params(Rng(seed));
    return g;
}

} // namespace qmap::models
