#pragma once

#include "qmap/frmaps.hpp"
#include "qmap/tensor.hpp"

#include <vector>

// Plain serial implementations of the hot kernels, kept as the reference the
// OpenMP versions are tested against (the tests require bit-identical
// results) and as the baseline for the benchmark target.
namespace qmap::refk {

using nn::Tensor4;

void conv3x3_fwd(const Tensor4& in, const Tensor4& w, const Tensor4& b, Tensor4& out);
void conv3x3_bwd_input(const Tensor4& dout, const Tensor4& w, Tensor4& din);
void conv3x3_bwd_params(const Tensor4& dout, const Tensor4& in, Tensor4& dw, Tensor4& db);

void deconv2x2_fwd(const Tensor4& in, const Tensor4& w, const Tensor4& b, Tensor4& out);

void maxpool2x2_fwd(const Tensor4& in, Tensor4& out, std::vector<int64_t>& argmax);

void fc_fwd(const Tensor4& in, const Tensor4& w, const Tensor4& b, Tensor4& out);

img::Plane gradient_magnitude(const img::Plane& p, fr::GradOp op);
img::Plane gaussian_blur(const img::Plane& p, double sigma);
img::QualityMap ssim_map(const img::Image& dist, const img::Image& ref,
                         const fr::MapConfig& cfg = {});

} // namespace qmap::refk
