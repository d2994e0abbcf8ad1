#pragma once

#include "qmap/metrics.hpp"
#include "qmap/training.hpp"

#include <functional>

namespace qmap::eval {

struct StudyOptions {
    models::PoolNetSpec pooler;        // input_size must match the map edge
    models::TrainOptions train;        // lr, epochs, seed for each fresh pooler
    double test_fraction = 0.25;
    uint64_t split_seed = 1;
};

struct StudyRow {
    int block = 1;
    double srcc = 0.0;
    double plcc = 0.0;
};

// For each local-patch size: degrade every map with avg_patchify_map, train
// a fresh pooling network from the same seed, and evaluate on the held-out
// maps. block=1 is the undegraded pixel-level baseline.
std::vector<StudyRow> patch_average_study(
    const std::vector<std::pair<img::QualityMap, double>>& maps,
    const std::vector<int>& blocks, const StudyOptions& opt);

void save_study_csv(const std::vector<StudyRow>& rows, const std::string& path);

// Runs a seed-keyed experiment `repetitions` times and reports all raw
// values; callers aggregate with median().
std::vector<double> repeated_splits(const std::function<double(uint64_t)>& experiment,
                                    int repetitions, uint64_t base_seed = 0);

double median(std::vector<double> values);

} // namespace qmap::eval
