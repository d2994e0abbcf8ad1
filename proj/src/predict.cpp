#include "qmap/predict.hpp"
#include "qmap/errors.hpp"

namespace qmap::models {

using nn::Mode;
using nn::Tensor4;

Prediction predict_score(Predictor& p, const img::Image& image) {
    if (p.gens.empty()) throw StateError("predict_score needs at least one generator");
    if (image.height < p.patch_size || image.width < p.patch_size)
        throw SizeError("image smaller than the " + std::to_string(p.patch_size) + " px patch size");

    img::PatchGrid grid = img::extract_patches(image, p.patch_size, p.stride);

    img::Plane acc(image.height, image.width);
    img::Plane cnt(image.height, image.width);
    double score_sum = 0.0;

    for (size_t i = 0; i < grid.patches.size(); ++i) {
        Tensor4 patch = nn::from_image(grid.patches[i]);
        std::vector<Tensor4> maps;
        maps.reserve(p.gens.size());
        for (nn::ComputeGraph& g : p.gens) {
            auto [m, tape] = g.forward(patch, Mode::eval, 0);
            maps.push_back(std::move(m));
        }

        std::vector<Tensor4> streams;
        if (p.pooler.fusion.kind == FusionKind::multi_stream) {
            streams = maps;
        } else {
            Tensor4 fused = maps[0];
            for (size_t k = 1; k < maps.size(); ++k) fused = nn::concat_channels(fused, maps[k]);
            streams = {std::move(fused)};
        }
        Tensor4 s = pooler_forward(p.pooler, streams, Mode::eval, 0);
        score_sum += s.data[0] * 100.0;

        const auto [r, c] = grid.origins[i];
        const Tensor4& m0 = maps[0];
        for (int y = 0; y < m0.h; ++y)
            for (int x = 0; x < m0.w; ++x) {
                acc.at(r + y, c + x) += m0.at(0, 0, y, x);
                cnt.at(r + y, c + x) += 1.0;
            }
    }

    Prediction out;
    out.score = score_sum / static_cast<double>(grid.patches.size());
    out.map = img::QualityMap(image.height, image.width);
    for (size_t i = 0; i < out.map.size(); ++i)
        out.map.data[i] = cnt.data[i] > 0.0 ? acc.data[i] / cnt.data[i] : 0.0;
    return out;
}

} // namespace qmap::models
