#pragma once

#include "qmap/rng.hpp"
#include "qmap/tensor.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace qmap::nn {

enum class LayerKind : uint32_t {
    conv3x3_pad1 = 0,
    deconv2x2_stride2 = 1,
    batch_norm = 2,
    leaky_relu = 3,
    max_pool2x2 = 4,
    fully_connected = 5,
    dropout = 6,
    concat_channels = 7,
    sigmoid = 8,
};

const char* kind_name(LayerKind k);

struct LayerSpec {
    LayerKind kind{};
    int in_channels = 0;  // conv/deconv/batch_norm
    int out_channels = 0; // conv/deconv
    int in_units = 0;     // fully_connected
    int out_units = 0;
    double slope = 0.2;      // leaky_relu
    double drop_p = 0.5;     // dropout
    double bn_eps = 1e-5;    // batch_norm
    double bn_momentum = 0.9;
    std::string concat_with; // concat_channels: name of the tap to prepend

    static LayerSpec conv(int in, int out);
    static LayerSpec deconv(int in, int out);
    static LayerSpec batch_norm(int channels);
    static LayerSpec leaky_relu(double slope = 0.2);
    static LayerSpec max_pool();
    static LayerSpec fully_connected(int in, int out);
    static LayerSpec dropout(double p = 0.5);
    static LayerSpec concat(const std::string& tap);
    static LayerSpec sigmoid();
};

// One layer instance: spec, learned parameters, persistent buffers
// (batch-norm running statistics), and an optional tap name under which the
// layer's output is remembered for a later concat.
struct Node {
    LayerSpec spec;
    std::string save_as;
    std::vector<Tensor4> params;
    std::vector<Tensor4> buffers;
};

enum class Mode { train, eval };

struct LayerTape {
    Tensor4 in;
    Tensor4 out;                      // sigmoid output (also the logits source)
    std::vector<double> mean, var;    // batch-norm batch statistics
    std::vector<int64_t> argmax;      // max-pool winners
    std::vector<unsigned char> mask;  // dropout keep mask
    int concat_c0 = 0;                // channels contributed by the tap
};

// Activation record from one forward pass, sufficient for backward.
struct Tape {
    Mode mode = Mode::eval;
    uint64_t graph_id = 0;
    Tensor4 input;
    std::vector<LayerTape> layers;
    Tensor4 output;

    // Input of the final layer (the pre-sigmoid logits when the graph ends
    // with a sigmoid). Only recorded in train mode.
    const Tensor4& last_layer_input() const;
};

struct Gradients {
    std::vector<std::vector<Tensor4>> params; // aligned with graph nodes
    Tensor4 input;
};

class ComputeGraph {
public:
    std::vector<Node> nodes;

    // Append a layer; `save_as` remembers this layer's output for a concat.
    void add(LayerSpec spec, std::string save_as = "");

    // He-uniform fan-in init for conv/deconv/fc, gamma=1 beta=0 for
    // batch norm, running stats (0,1).
    void init_params(const Rng& rng);

    size_t param_count() const;
    uint64_t param_checksum() const;
    uint64_t id() const; // identity token used to match tapes to graphs

    // Runs the net. Train mode records activations on the tape and updates
    // batch-norm running statistics; eval mode is deterministic and leaves
    // the graph untouched. Dropout masks derive from rng_seed and the layer
    // index only.
    std::pair<Tensor4, Tape> forward(const Tensor4& input, Mode mode, uint64_t rng_seed);

    // Gradients for every parameter and the input, from a train-mode tape.
    Gradients backward(const Tape& tape, const Tensor4& output_grad) const;

    // Same, but starts from the gradient at the *input* of layer
    // `from_layer` (i.e. layers [from_layer, end) are skipped). Used to fold
    // the final sigmoid into a fused BCE gradient.
    Gradients backward_from(const Tape& tape, const Tensor4& grad, size_t from_layer) const;

private:
    mutable uint64_t id_ = 0;
};

} // namespace qmap::nn
