#include "qmap/labels.hpp"
#include "qmap/errors.hpp"
#include "qmap/hash.hpp"

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace qmap::data {

std::string LabelStore::map_path(const Item& it) const {
    return (fs::path(root) / it.map_file).string();
}

std::string LabelStore::image_path(const Item& it) const {
    if (it.image_file.empty()) return {};
    return (fs::path(root) / it.image_file).string();
}

const LabelStore::Item& LabelStore::find(const std::string& id) const {
    for (const Item& it : items)
        if (it.id == id) return it;
    throw LoadError("label store has no entry '" + id + "'");
}

LabelStore materialize_labels(const DatasetManifest& m, fr::FrMethod method,
                              const fr::MapConfig& cfg, const std::string& out_dir,
                              const std::string& manifest_path) {
    LabelStore store;
    store.method = method;
    store.root = (fs::path(out_dir) / fr::method_token(method)).string();
    store.manifest_fingerprint = to_hex(fingerprint_file(manifest_path));
    fs::create_directories(store.root);

    for (const Entry& e : m.entries) {
        if (e.reference_path.empty())
            throw LoadError("label error: entry '" + e.id + "' has no reference image");
        img::Image dist = img::load_image(m.resolve(e.distorted_path));
        img::Image ref = img::load_image(m.resolve(e.reference_path));
        img::QualityMap map = fr::compute_map(method, dist, ref, cfg);

        LabelStore::Item item;
        item.id = e.id;
        item.map_file = e.id + ".png";
        fr::save_map(map, store.map_path(item));

        if (method == fr::FrMethod::ssim) {
            // The SSIM map is border-trimmed; store the matching trimmed image.
            img::Image cropped = img::crop_border(dist, fr::ssim_border(cfg));
            item.image_file = e.id + "_img.png";
            img::save_image(cropped, store.image_path(item));
        }
        store.items.push_back(std::move(item));
    }

    std::ofstream idx(fs::path(store.root) / "index.csv");
    if (!idx) throw IoError("cannot write label index in " + store.root);
    idx << "# manifest_fingerprint=" << store.manifest_fingerprint << "\n";
    idx << "id,map,image\n";
    for (const LabelStore::Item& it : store.items)
        idx << it.id << ',' << it.map_file << ',' << it.image_file << "\n";
    return store;
}

LabelStore load_label_store(const std::string& out_dir, fr::FrMethod method) {
    LabelStore store;
    store.method = method;
    store.root = (fs::path(out_dir) / fr::method_token(method)).string();
    std::ifstream idx(fs::path(store.root) / "index.csv");
    if (!idx) throw LoadError("no label index under " + store.root);

    std::string line;
    int row = 0;
    while (std::getline(idx, line)) {
        ++row;
        if (line.empty()) continue;
        if (line.rfind("# manifest_fingerprint=", 0) == 0) {
            store.manifest_fingerprint = line.substr(std::string("# manifest_fingerprint=").size());
            continue;
        }
        if (line[0] == '#' || line.rfind("id,", 0) == 0) continue;
        LabelStore::Item it;
        size_t p1 = line.find(',');
        size_t p2 = line.find(',', p1 + 1);
        if (p1 == std::string::npos || p2 == std::string::npos)
            throw LoadError(store.root + "/index.csv:" + std::to_string(row) + ": bad row");
        it.id = line.substr(0, p1);
        it.map_file = line.substr(p1 + 1, p2 - p1 - 1);
        it.image_file = line.substr(p2 + 1);
        while (!it.image_file.empty() && (it.image_file.back() == '\r' || it.image_file.back() == '\n'))
            it.image_file.pop_back();
        store.items.push_back(std::move(it));
    }
    return store;
}

} // namespace qmap::data
