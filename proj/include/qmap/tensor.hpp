#pragma once

#include "qmap/image.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace qmap::nn {

// Dense NCHW tensor. Double storage keeps the finite-difference gradient
// checks meaningful; reductions additionally accumulate in doubles.
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0) {}

    static Tensor4 zeros_like(const Tensor4& t) { return Tensor4(t.n, t.c, t.h, t.w); }

    size_t size() const { return data.size(); }
    std::array<int, 4> dims() const { return {n, c, h, w}; }
    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    std::string shape_str() const;

    size_t index(int b, int ch, int y, int x) const {
        return ((static_cast<size_t>(b) * c + ch) * h + y) * w + x;
    }
    double& at(int b, int ch, int y, int x) { return data[index(b, ch, y, x)]; }
    double at(int b, int ch, int y, int x) const { return data[index(b, ch, y, x)]; }

    void check_finite(const char* what) const;
};

// (1,C,H,W) from an interleaved image.
Tensor4 from_image(const img::Image& im);
Tensor4 from_plane(const img::Plane& p);

// Channel `ch` of batch element `b` as a plane.
img::Plane to_plane(const Tensor4& t, int b = 0, int ch = 0);

// Concatenate along the channel axis (a's channels first).
Tensor4 concat_channels(const Tensor4& a, const Tensor4& b);

// Stack single-sample tensors (n==1 each) into one batch.
Tensor4 stack_batch(const std::vector<const Tensor4*>& samples);

} // namespace qmap::nn
