#pragma once

#include "qmap/adam.hpp"
#include "qmap/dataset.hpp"
#include "qmap/labels.hpp"
#include "qmap/pooler.hpp"
#include "qmap/unet.hpp"

#include <vector>

namespace qmap::models {

struct TrainOptions {
    int epochs = 100;
    int batch_size = 8;
    double lr = 1e-3; // generator default; pooler callers pass 5e-3
    uint64_t seed = 0;
    double val_fraction = 0.2; // 0 selects the best epoch on training loss
    bool hflip = true;         // horizontal-flip augmentation of the train split
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 1e-11;

    nn::AdamConfig adam_config() const;
};

struct TrainHistory {
    std::vector<double> train_loss; // per-epoch mean over seen samples
    std::vector<double> val_loss;   // empty when val_fraction == 0
    int best_epoch = 0;
    double best_loss = 0.0; // selection metric at the best epoch
};

// Stage-1 sample: distorted patch and its aligned similarity-map label.
struct MapSample {
    nn::Tensor4 image; // (1,C,H,W)
    nn::Tensor4 label; // (1,1,H,W), values in [0,1]
};

// Stage-2 sample: a patch (image or ground-truth map) and the subjective
// score of its source image, in [0,100].
struct PatchScoreSample {
    nn::Tensor4 patch;
    double score = 0.0;
};

// Minimizes BCE-with-sigmoid by Adam; the graph is left at the best-epoch
// parameters and the history records every epoch.
TrainHistory train_generator(nn::ComputeGraph& gen, const std::vector<MapSample>& data,
                             const TrainOptions& opt);

// Minimizes the squared-Euclidean score loss over the pooler parameters
// only. Scores are scaled to [0,1] internally. frozen_gens (may be empty =
// pool the patches directly) are run in eval mode and asserted unchanged.
TrainHistory train_pooler(PoolerNet& pool, const std::vector<nn::ComputeGraph*>& frozen_gens,
                          const std::vector<PatchScoreSample>& data, const TrainOptions& opt);

// Eval-mode scores on the [0,100] scale, one per sample.
std::vector<double> pooler_scores(PoolerNet& pool,
                                  const std::vector<nn::ComputeGraph*>& frozen_gens,
                                  const std::vector<PatchScoreSample>& data);

struct PatchOptions {
    int patch_size = 144;
    int stride = 120;
};

// Aligned (patch, map-label patch) pairs for every manifest entry.
std::vector<MapSample> generator_samples(const data::DatasetManifest& m,
                                         const data::LabelStore& store, const PatchOptions& po);

// Raw distorted-image patches with scores (pooling predicted maps or images).
std::vector<PatchScoreSample> image_patch_samples(const data::DatasetManifest& m,
                                                  const PatchOptions& po);

// Ground-truth map patches with scores (label-pooling mode).
std::vector<PatchScoreSample> map_patch_samples(const data::DatasetManifest& m,
                                                const data::LabelStore& store,
                                                const PatchOptions& po);

nn::Tensor4 hflip_tensor(const nn::Tensor4& t);

} // namespace qmap::models
