#pragma once

#include "qmap/tensor.hpp"

namespace qmap::nn {

struct LossResult {
    double loss = 0.0;
    Tensor4 grad;
};

// Mean binary cross entropy of sigmoid(logits) against soft targets in
// [0,1], evaluated in the stable log-sum-exp form. grad is with respect to
// the logits: (sigmoid(z) - t) / N.
LossResult loss_bce_sigmoid(const Tensor4& logits, const Tensor4& targets);

// Mean squared error; grad = 2 (pred - target) / N.
LossResult loss_mse(const Tensor4& pred, const Tensor4& target);

} // namespace qmap::nn
