#pragma once

#include "qmap/image.hpp"

#include <string>

namespace qmap::fr {

using img::Image;
using img::Plane;
using img::QualityMap;

// Map generators available as training labels. Serialized as lowercase
// tokens (ssim, fsim_gm, fsim_pc, mdsi_gc).
enum class FrMethod { ssim, fsim_gm, fsim_pc, mdsi_gc };

FrMethod parse_method(const std::string& token);
std::string method_token(FrMethod m);

// Constants for all generators. The values follow the cited original
// methods and are kept here so they are auditable and overridable.
struct MapConfig {
    double ssim_k1 = 0.01;
    double ssim_k2 = 0.03;
    double dynamic_range = 255.0;
    int gaussian_window = 11;
    double gaussian_sigma = 1.5;
    double fsim_t2 = 160.0;
    int pc_scales = 4;
    int pc_orientations = 4;
    double pc_t1 = 0.85;
    double mdsi_c1 = 140.0;
    double mdsi_c2 = 55.0;
    double mdsi_c3 = 550.0;
    double mdsi_alpha = 0.6;
    double deviation_q = 0.25;

    void validate() const;
};

MapConfig load_map_config(const std::string& path);
void save_map_config(const MapConfig& cfg, const std::string& path);

enum class GradOp { scharr, prewitt };

// sqrt(Gx^2 + Gy^2) with the named 3x3 operator, replicate padding.
Plane gradient_magnitude(const Plane& p, GradOp op);

// Per-pixel SSIM over 11x11 Gaussian-weighted windows on [0,255] luminance.
// Output is the valid interior only: (window-1)/2 pixels trimmed per side.
QualityMap ssim_map(const Image& dist, const Image& ref, const MapConfig& cfg = {});

// Gradient-magnitude similarity (Scharr), full resolution.
QualityMap fsim_gm_map(const Image& dist, const Image& ref, const MapConfig& cfg = {});

// Phase-congruency similarity from a log-Gabor filter bank, full resolution.
QualityMap fsim_pc_map(const Image& dist, const Image& ref, const MapConfig& cfg = {});

// Combined gradient + chromaticity similarity (Prewitt, L/H/M color
// transforms), full resolution, clamped to [0,1]. Requires 3 channels.
QualityMap mdsi_map(const Image& dist, const Image& ref, const MapConfig& cfg = {});

QualityMap compute_map(FrMethod m, const Image& dist, const Image& ref,
                       const MapConfig& cfg = {});

// Pixels trimmed from each border of an SSIM map relative to its inputs.
int ssim_border(const MapConfig& cfg = {});

enum class PoolStrategy { average, std_dev, deviation };

PoolStrategy parse_pool(const std::string& token);

// average: arithmetic mean. std_dev: population standard deviation.
// deviation: mean absolute deviation of map^q around its mean (q from cfg).
double pool_map(const QualityMap& map, PoolStrategy s, const MapConfig& cfg = {});

// Replace every pixel by the mean of its block x block tile (edge tiles
// truncated). block=1 is the identity.
QualityMap avg_patchify_map(const QualityMap& map, int block);

// 8-bit grayscale PNG, value = round(255*v). Dark = distorted.
void save_map(const QualityMap& map, const std::string& path);

// Raw phase congruency of one plane (exposed for tests).
Plane phase_congruency(const Plane& p, const MapConfig& cfg = {});

} // namespace qmap::fr
