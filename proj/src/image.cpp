#include "qmap/image.hpp"
#include "qmap/errors.hpp"

#include <algorithm>
#include <cmath>

namespace qmap::img {

std::vector<int> patch_origins(int extent, int patch_size, int stride) {
    std::vector<int> origins;
    for (int pos = 0; pos + patch_size <= extent; pos += stride)
        origins.push_back(pos);
    // Clamp a trailing origin to the edge when the stride overshoots.
    if (origins.empty() || origins.back() + patch_size < extent) {
        int last = extent - patch_size;
        if (origins.empty() || last > origins.back()) origins.push_back(last);
    }
    return origins;
}

Plane to_luminance(const Image& im) {
    Plane out(im.height, im.width);
    if (im.channels == 1) {
        out.data = im.data;
        return out;
    }
    if (im.channels != 3)
        throw ShapeError("to_luminance expects 1 or 3 channels");
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x)
            out.at(y, x) = 0.299 * im.at(y, x, 0) + 0.587 * im.at(y, x, 1) + 0.114 * im.at(y, x, 2);
    return out;
}

PatchGrid extract_patches(const Image& im, int patch_size, int stride) {
    if (im.height < patch_size || im.width < patch_size)
        throw SizeError("image " + std::to_string(im.height) + "x" + std::to_string(im.width) +
                        " smaller than patch size " + std::to_string(patch_size));
    PatchGrid grid;
    grid.patch_size = patch_size;
    grid.stride = stride;
    std::vector<int> rows = patch_origins(im.height, patch_size, stride);
    std::vector<int> cols = patch_origins(im.width, patch_size, stride);
    for (int r : rows) {
        for (int c : cols) {
            Image p(patch_size, patch_size, im.channels);
            for (int y = 0; y < patch_size; ++y)
                for (int x = 0; x < patch_size; ++x)
                    for (int ch = 0; ch < im.channels; ++ch)
                        p.at(y, x, ch) = im.at(r + y, c + x, ch);
            grid.origins.emplace_back(r, c);
            grid.patches.push_back(std::move(p));
        }
    }
    return grid;
}

Image crop_border(const Image& im, int n) {
    if (n == 0) return im;
    if (im.height <= 2 * n || im.width <= 2 * n)
        throw SizeError("crop_border(" + std::to_string(n) + ") empties a " +
                        std::to_string(im.height) + "x" + std::to_string(im.width) + " image");
    Image out(im.height - 2 * n, im.width - 2 * n, im.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int ch = 0; ch < im.channels; ++ch)
                out.at(y, x, ch) = im.at(y + n, x + n, ch);
    return out;
}

Plane crop_border(const Plane& p, int n) {
    if (n == 0) return p;
    if (p.height <= 2 * n || p.width <= 2 * n)
        throw SizeError("crop_border empties plane");
    Plane out(p.height - 2 * n, p.width - 2 * n);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            out.at(y, x) = p.at(y + n, x + n);
    return out;
}

Image hflip(const Image& im) {
    Image out(im.height, im.width, im.channels);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x)
            for (int ch = 0; ch < im.channels; ++ch)
                out.at(y, x, ch) = im.at(y, im.width - 1 - x, ch);
    return out;
}

} // namespace qmap::img
