#pragma once

#include "qmap/dataset.hpp"
#include "qmap/image.hpp"
#include "qmap/rng.hpp"

#include <string>
#include <vector>

namespace qmap::data {

enum class DistortionKind { gaussian_blur, white_noise, jpeg_blocking, local_blockwise, none };

DistortionKind parse_distortion(const std::string& token);
std::string distortion_token(DistortionKind k);

// Magnitude grows strictly with level (1..5). `none` is the identity recipe
// used by tests as the zero-distortion limit.
struct DistortionRecipe {
    DistortionKind kind = DistortionKind::white_noise;
    int level = 1;

    void validate() const;
};

// Applies one recipe. The stream must be the same for every level of a
// (base, kind) pair: noise realizations and block placements are drawn once
// and scaled/extended with the level, which keeps the severity ladder nested.
img::Image apply_distortion(const img::Image& ref, const DistortionRecipe& recipe, Rng stream);

// Procedural base images (gradients, checkers, filtered noise, strokes).
img::Image make_base_image(int index, int size, Rng stream);

struct SynthConfig {
    int num_bases = 6;
    int base_size = 160;
    std::vector<DistortionKind> kinds = {DistortionKind::gaussian_blur, DistortionKind::white_noise,
                                         DistortionKind::jpeg_blocking, DistortionKind::local_blockwise};
    int levels = 5;
};

// Writes ref/ and dist/ PNG trees plus manifest.csv under out_dir, with a
// pseudo MOS of 100 * mean(fsim_gm_map(distorted, reference)) per entry so
// downstream training targets are a deterministic function of the files.
DatasetManifest synthesize(const std::vector<img::Image>& bases,
                           const std::vector<DistortionRecipe>& recipes, uint64_t seed,
                           const std::string& out_dir);

DatasetManifest synthesize(const SynthConfig& cfg, uint64_t seed, const std::string& out_dir);

} // namespace qmap::data
