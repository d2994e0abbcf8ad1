#pragma once

#include "qmap/image.hpp"

namespace qmap::img {

// Separable Gaussian, replicate borders, radius = ceil(3*sigma).
Plane gaussian_blur(const Plane& p, double sigma);
Image gaussian_blur(const Image& im, double sigma); // per channel

} // namespace qmap::img
