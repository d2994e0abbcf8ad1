#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace qmap::img {

// Row-major H x W x C intensities in [0,1]. Channels are interleaved
// (data[(y*w + x)*c + ch]). Immutable by convention: operations return
// new images.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0; // 1 or 3
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, int c) : height(h), width(w), channels(c),
        data(static_cast<size_t>(h) * w * c, 0.0) {}

    double& at(int y, int x, int ch = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + ch];
    }
    double at(int y, int x, int ch = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + ch];
    }
    size_t size() const { return data.size(); }
};

// Single-channel buffer of unbounded reals (luminance, gradients, maps).
struct Plane {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Plane() = default;
    Plane(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w, 0.0) {}

    double& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return data.size(); }
};

// A per-pixel quality map is a Plane restricted to [0,1]; 1 = undistorted.
using QualityMap = Plane;

struct PatchGrid {
    int patch_size = 0;
    int stride = 0;
    std::vector<std::pair<int, int>> origins; // (row, col) top-left corners
    std::vector<Image> patches;
};

// Sliding-window origins along one axis: 0, stride, 2*stride, ... and a
// final origin clamped so the last patch ends at the edge.
std::vector<int> patch_origins(int extent, int patch_size, int stride);

// Decode a PNG or BMP file. 8-bit values become byte/255, 16-bit
// value/65535. Palette images are expanded, an alpha channel is dropped.
Image load_image(const std::string& path);

// 8-bit PNG writer (1 or 3 channels), value = round(255*v) after clamping.
void save_image(const Image& im, const std::string& path);

// BT.601 luminance; single-channel input is passed through.
Plane to_luminance(const Image& im);

PatchGrid extract_patches(const Image& im, int patch_size = 144, int stride = 120);

// Interior region with n pixels removed from every border.
Image crop_border(const Image& im, int n);
Plane crop_border(const Plane& p, int n);

// Mirror columns.
Image hflip(const Image& im);

} // namespace qmap::img
