#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace qmap::data {

enum class ScoreKind { MOS, DMOS };

ScoreKind parse_score_kind(const std::string& token);
std::string score_kind_token(ScoreKind k);

struct Entry {
    std::string id;
    std::string distorted_path;  // relative to the manifest directory
    std::string reference_path;  // may be empty (score-only entry)
    std::string distortion_type;
    int level = 0;
    double score = 0.0;
    ScoreKind score_kind = ScoreKind::MOS;
};

// CSV-backed dataset description. Header row, one @range declaration row,
// then one row per distorted image.
struct DatasetManifest {
    std::vector<Entry> entries;
    double score_lo = 0.0;
    double score_hi = 100.0;
    std::string base_dir; // directory of the manifest file

    std::string resolve(const std::string& rel) const;

    // Split/group unit: the reference identity, or the entry's own id for
    // reference-free entries.
    static std::string reference_unit(const Entry& e);
};

// Validates ids, file existence and score ranges; errors carry row numbers.
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& m, const std::string& path);

// Affine rescale of all scores (and the declared range) to [0,100].
DatasetManifest normalize_scores(const DatasetManifest& m);

struct SplitSpec {
    double train_fraction = 0.8;
    uint64_t seed = 0;
};

// Reference-disjoint split: reference identities are partitioned by a seeded
// shuffle and every entry follows its reference.
std::pair<DatasetManifest, DatasetManifest> split(const DatasetManifest& m, const SplitSpec& s);

} // namespace qmap::data
