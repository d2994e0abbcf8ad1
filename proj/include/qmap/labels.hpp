#pragma once

#include "qmap/dataset.hpp"
#include "qmap/frmaps.hpp"

#include <string>
#include <vector>

namespace qmap::data {

// On-disk map-label store: out_dir/<method>/<id>.png plus an index CSV. For
// SSIM the border-trimmed copy of each distorted image is stored alongside
// its map (<id>_img.png) so training pairs stay spatially aligned.
struct LabelStore {
    std::string root;   // out_dir/<method>
    fr::FrMethod method = fr::FrMethod::fsim_gm;
    std::string manifest_fingerprint; // hex fnv1a64 of the manifest bytes

    struct Item {
        std::string id;
        std::string map_file;   // relative to root
        std::string image_file; // relative to root; empty = use the manifest's distorted image
    };
    std::vector<Item> items;

    std::string map_path(const Item& it) const;
    std::string image_path(const Item& it) const; // empty when image_file is empty
    const Item& find(const std::string& id) const;
};

LabelStore materialize_labels(const DatasetManifest& m, fr::FrMethod method,
                              const fr::MapConfig& cfg, const std::string& out_dir,
                              const std::string& manifest_path);

LabelStore load_label_store(const std::string& out_dir, fr::FrMethod method);

} // namespace qmap::data
