#pragma once

#include "qmap/graph.hpp"

#include <vector>

namespace qmap::models {

// Encoder-decoder map predictor: a subsampling path of conv/bn/lrelu/pool
// stages, an upsampling path of deconv + skip-concat + conv/bn/lrelu stages,
// and a 1-channel conv head squashed by a sigmoid. Fully convolutional, so
// the output map matches the input size for any input divisible by 2^depth.
struct UNetSpec {
    int depth = 4;
    std::vector<int> stage_channels = {32, 64, 128, 256};
    int input_channels = 3;
    int output_channels = 1;
    double leaky_slope = 0.2;

    void validate() const;
    int divisor() const; // 2^depth
};

nn::ComputeGraph build_generator(const UNetSpec& spec, uint64_t seed);

// Throws ShapeError unless height and width are positive multiples of
// spec.divisor().
void check_generator_input(const UNetSpec& spec, int height, int width);

} // namespace qmap::models
