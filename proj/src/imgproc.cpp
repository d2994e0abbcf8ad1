#include "qmap/imgproc.hpp"
#include "qmap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace qmap::img {

namespace {

std::vector<double> gaussian_taps(double sigma) {
    if (!(sigma > 0.0)) throw DomainError("gaussian_blur sigma must be positive");
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double g = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        taps[i + radius] = g;
        sum += g;
    }
    for (double& t : taps) t /= sum;
    return taps;
}

} // namespace

Plane gaussian_blur(const Plane& p, double sigma) {
    std::vector<double> taps = gaussian_taps(sigma);
    const int r = static_cast<int>(taps.size()) / 2;
    const int h = p.height, w = p.width;

    Plane tmp(h, w);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k)
                acc += taps[k + r] * p.at(y, std::clamp(x + k, 0, w - 1));
            tmp.at(y, x) = acc;
        }

    Plane out(h, w);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k)
                acc += taps[k + r] * tmp.at(std::clamp(y + k, 0, h - 1), x);
            out.at(y, x) = acc;
        }
    return out;
}

Image gaussian_blur(const Image& im, double sigma) {
    Image out(im.height, im.width, im.channels);
    for (int ch = 0; ch < im.channels; ++ch) {
        Plane p(im.height, im.width);
        for (int y = 0; y < im.height; ++y)
            for (int x = 0; x < im.width; ++x)
                p.at(y, x) = im.at(y, x, ch);
        Plane blurred = gaussian_blur(p, sigma);
        for (int y = 0; y < im.height; ++y)
            for (int x = 0; x < im.width; ++x)
                out.at(y, x, ch) = blurred.at(y, x);
    }
    return out;
}

} // namespace qmap::img
