#include "qmap/losses.hpp"
#include "qmap/errors.hpp"

#include <cmath>

namespace qmap::nn {

LossResult loss_bce_sigmoid(const Tensor4& logits, const Tensor4& targets) {
    if (!logits.same_shape(targets))
        throw ShapeError("loss_bce_sigmoid: " + logits.shape_str() + " vs " + targets.shape_str());
    const size_t n = logits.size();
    if (n == 0) throw SizeError("loss_bce_sigmoid on empty tensors");

    LossResult res;
    res.grad = Tensor4::zeros_like(logits);
    double sum = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
        const double t = targets.data[i];
        if (!(t >= 0.0 && t <= 1.0))
            throw DomainError("BCE target outside [0,1]");
        const double z = logits.data[i];
        // max(z,0) - z*t + log(1 + exp(-|z|))
        sum += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
        const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        res.grad.data[i] = (s - t) * inv_n;
    }
    res.loss = sum * inv_n;
    return res;
}

LossResult loss_mse(const Tensor4& pred, const Tensor4& target) {
    if (!pred.same_shape(target))
        throw ShapeError("loss_mse: " + pred.shape_str() + " vs " + target.shape_str());
    const size_t n = pred.size();
    if (n == 0) throw SizeError("loss_mse on empty tensors");

    LossResult res;
    res.grad = Tensor4::zeros_like(pred);
    double sum = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
        const double d = pred.data[i] - target.data[i];
        sum += d * d;
        res.grad.data[i] = 2.0 * d * inv_n;
    }
    res.loss = sum * inv_n;
    return res;
}

} // namespace qmap::nn
