#pragma once

#include "qmap/tensor.hpp"

#include <vector>

// OpenMP kernels behind the graph layers. Each output element is produced by
// exactly one thread with a fixed accumulation order, so results do not
// depend on the worker count. Serial mirrors with identical arithmetic live
// in qmap/ref_kernels.hpp and are compared bit-for-bit by the tests.
namespace qmap::nn::kern {

// 3x3 convolution, zero padding 1, stride 1. w: (outC,inC,3,3), b: (outC,1,1,1).
void conv3x3_fwd(const Tensor4& in, const Tensor4& w, const Tensor4& b, Tensor4& out);
void conv3x3_bwd_input(const Tensor4& dout, const Tensor4& w, Tensor4& din);
void conv3x3_bwd_params(const Tensor4& dout, const Tensor4& in, Tensor4& dw, Tensor4& db);

// 2x2 transposed convolution, stride 2 (disjoint output blocks).
// w: (inC,outC,2,2), b: (outC,1,1,1). Output is 2H x 2W.
void deconv2x2_fwd(const Tensor4& in, const Tensor4& w, const Tensor4& b, Tensor4& out);
void deconv2x2_bwd_input(const Tensor4& dout, const Tensor4& w, Tensor4& din);
void deconv2x2_bwd_params(const Tensor4& dout, const Tensor4& in, Tensor4& dw, Tensor4& db);

// 2x2 max pooling, stride 2; odd trailing row/column dropped. argmax holds
// the flat input index of each output's maximum (first hit wins ties).
void maxpool2x2_fwd(const Tensor4& in, Tensor4& out, std::vector<int64_t>& argmax);
void maxpool2x2_bwd(const Tensor4& dout, const std::vector<int64_t>& argmax, Tensor4& din);

// Fully connected over the flattened sample. w: (out_units,in_units,1,1).
void fc_fwd(const Tensor4& in, const Tensor4& w, const Tensor4& b, Tensor4& out);
void fc_bwd_input(const Tensor4& dout, const Tensor4& w, Tensor4& din);
void fc_bwd_params(const Tensor4& dout, const Tensor4& in, Tensor4& dw, Tensor4& db);

} // namespace qmap::nn::kern
