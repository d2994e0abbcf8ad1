#include "qmap/tensor.hpp"
#include "qmap/errors.hpp"

#include <cmath>

namespace qmap::nn {

std::string Tensor4::shape_str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
}

void Tensor4::check_finite(const char* what) const {
    for (double v : data)
        if (!std::isfinite(v))
            throw NumericError(std::string(what) + " contains a non-finite value");
}

Tensor4 from_image(const img::Image& im) {
    Tensor4 t(1, im.channels, im.height, im.width);
    for (int ch = 0; ch < im.channels; ++ch)
        for (int y = 0; y < im.height; ++y)
            for (int x = 0; x < im.width; ++x)
                t.at(0, ch, y, x) = im.at(y, x, ch);
    return t;
}

Tensor4 from_plane(const img::Plane& p) {
    Tensor4 t(1, 1, p.height, p.width);
    t.data = p.data;
    return t;
}

img::Plane to_plane(const Tensor4& t, int b, int ch) {
    img::Plane p(t.h, t.w);
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x)
            p.at(y, x) = t.at(b, ch, y, x);
    return p;
}

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw ShapeError("concat_channels: " + a.shape_str() + " vs " + b.shape_str());
    Tensor4 out(a.n, a.c + b.c, a.h, a.w);
    const size_t plane = static_cast<size_t>(a.h) * a.w;
    for (int bi = 0; bi < a.n; ++bi) {
        std::copy(a.data.begin() + static_cast<size_t>(bi) * a.c * plane,
                  a.data.begin() + static_cast<size_t>(bi + 1) * a.c * plane,
                  out.data.begin() + static_cast<size_t>(bi) * out.c * plane);
        std::copy(b.data.begin() + static_cast<size_t>(bi) * b.c * plane,
                  b.data.begin() + static_cast<size_t>(bi + 1) * b.c * plane,
                  out.data.begin() + static_cast<size_t>(bi) * out.c * plane + a.c * plane);
    }
    return out;
}

Tensor4 stack_batch(const std::vector<const Tensor4*>& samples) {
    if (samples.empty()) throw SizeError("stack_batch: empty batch");
    const Tensor4& first = *samples[0];
    Tensor4 out(static_cast<int>(samples.size()), first.c, first.h, first.w);
    const size_t stride = first.size();
    for (size_t i = 0; i < samples.size(); ++i) {
        const Tensor4& s = *samples[i];
        if (s.n != 1 || s.c != first.c || s.h != first.h || s.w != first.w)
            throw ShapeError("stack_batch: sample " + std::to_string(i) + " has shape " +
                             s.shape_str());
        std::copy(s.data.begin(), s.data.end(), out.data.begin() + i * stride);
    }
    return out;
}

} // namespace qmap::nn
