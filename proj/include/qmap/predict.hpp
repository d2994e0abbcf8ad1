#pragma once

#include "qmap/pooler.hpp"

namespace qmap::models {

// Trained pair ready for whole-image scoring. Patch geometry must match the
// training protocol (recorded in the model sidecars).
struct Predictor {
    std::vector<nn::ComputeGraph> gens; // one per map method, eval-only
    PoolerNet pooler;
    int patch_size = 144;
    int stride = 120;
};

struct Prediction {
    double score = 0.0;      // mean over patch scores, on the [0,100] scale
    img::QualityMap map;     // stitched first-method map, overlaps averaged
};

Prediction predict_score(Predictor& p, const img::Image& image);

} // namespace qmap::models
