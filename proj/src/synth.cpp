#include "qmap/synth.hpp"
#include "qmap/errors.hpp"
#include "qmap/frmaps.hpp"
#include "qmap/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace fs = std::filesystem;

namespace qmap::data {

DistortionKind parse_distortion(const std::string& token) {
    if (token == "gaussian_blur") return DistortionKind::gaussian_blur;
    if (token == "white_noise") return DistortionKind::white_noise;
    if (token == "jpeg_blocking") return DistortionKind::jpeg_blocking;
    if (token == "local_blockwise") return DistortionKind::local_blockwise;
    if (token == "none") return DistortionKind::none;
    throw FormatError("unknown distortion kind '" + token + "'");
}

std::string distortion_token(DistortionKind k) {
    switch (k) {
        case DistortionKind::gaussian_blur: return "gaussian_blur";
        case DistortionKind::white_noise: return "white_noise";
        case DistortionKind::jpeg_blocking: return "jpeg_blocking";
        case DistortionKind::local_blockwise: return "local_blockwise";
        case DistortionKind::none: return "none";
    }
    throw FormatError("bad DistortionKind");
}

void DistortionRecipe::validate() const {
    if (kind == DistortionKind::none) return;
    if (level < 1 || level > 5)
        throw DomainError("distortion level must be in 1..5");
}

namespace {

constexpr double kBlurSigma[5] = {0.8, 1.6, 2.4, 3.2, 4.0};
constexpr double kNoiseSigma[5] = {0.02, 0.05, 0.09, 0.14, 0.20};
constexpr int kJpegQuality[5] = {90, 70, 50, 30, 10};
constexpr int kBlockEdge = 32;

// Standard JPEG luminance quantization table.
constexpr int kQuantBase[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

void dct8(const double in[8][8], double out[8][8]) {
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
            double cu = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            double cv = v == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            double acc = 0.0;
            for (int x = 0; x < 8; ++x)
                for (int y = 0; y < 8; ++y)
                    acc += in[x][y] * std::cos((2 * x + 1) * u * M_PI / 16.0) *
                           std::cos((2 * y + 1) * v * M_PI / 16.0);
            out[u][v] = cu * cv * acc;
        }
}

void idct8(const double in[8][8], double out[8][8]) {
    for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y) {
            double acc = 0.0;
            for (int u = 0; u < 8; ++u)
                for (int v = 0; v < 8; ++v) {
                    double cu = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
                    double cv = v == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
                    acc += cu * cv * in[u][v] * std::cos((2 * x + 1) * u * M_PI / 16.0) *
                           std::cos((2 * y + 1) * v * M_PI / 16.0);
                }
            out[x][y] = acc;
        }
}

img::Image jpeg_blocking(const img::Image& ref, int quality) {
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    int quant[64];
    for (int i = 0; i < 64; ++i)
        quant[i] = std::clamp((kQuantBase[i] * scale + 50) / 100, 1, 255);

    img::Image out(ref.height, ref.width, ref.channels);
    const int bh = (ref.height + 7) / 8, bw = (ref.width + 7) / 8;
    for (int ch = 0; ch < ref.channels; ++ch)
        for (int by = 0; by < bh; ++by)
            for (int bx = 0; bx < bw; ++bx) {
                double block[8][8], coeff[8][8], rec[8][8];
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x) {
                        int sy = std::min(by * 8 + y, ref.height - 1);
                        int sx = std::min(bx * 8 + x, ref.width - 1);
                        block[y][x] = ref.at(sy, sx, ch) * 255.0 - 128.0;
                    }
                dct8(block, coeff);
                for (int u = 0; u < 8; ++u)
                    for (int v = 0; v < 8; ++v) {
                        double q = quant[u * 8 + v];
                        coeff[u][v] = std::round(coeff[u][v] / q) * q;
                    }
                idct8(coeff, rec);
                for (int y = 0; y < 8; ++y) {
                    int sy = by * 8 + y;
                    if (sy >= ref.height) break;
                    for (int x = 0; x < 8; ++x) {
                        int sx = bx * 8 + x;
                        if (sx >= ref.width) break;
                        out.at(sy, sx, ch) = std::clamp((rec[y][x] + 128.0) / 255.0, 0.0, 1.0);
                    }
                }
            }
    return out;
}

} // namespace

img::Image apply_distortion(const img::Image& ref, const DistortionRecipe& recipe, Rng stream) {
    recipe.validate();
    switch (recipe.kind) {
        case DistortionKind::none:
            return ref;
        case DistortionKind::gaussian_blur:
            return img::gaussian_blur(ref, kBlurSigma[recipe.level - 1]);
        case DistortionKind::white_noise: {
            // One noise realization per (base, kind) stream; the level only
            // scales it, so severity is nested across levels.
            img::Image out(ref.height, ref.width, ref.channels);
            const double sigma = kNoiseSigma[recipe.level - 1];
            for (size_t i = 0; i < ref.data.size(); ++i)
                out.data[i] = std::clamp(ref.data[i] + sigma * stream.normal(), 0.0, 1.0);
            return out;
        }
        case DistortionKind::jpeg_blocking:
            return jpeg_blocking(ref, kJpegQuality[recipe.level - 1]);
        case DistortionKind::local_blockwise: {
            if (ref.height < kBlockEdge || ref.width < kBlockEdge)
                throw SizeError("image too small for 32x32 block distortion");
            // Five disjoint placements drawn once; level k pastes the first k.
            std::vector<std::pair<int, int>> spots;
            std::vector<double> grays;
            int guard = 0;
            while (spots.size() < 5 && guard < 1000) {
                ++guard;
                int y = static_cast<int>(stream.uniform_int(ref.height - kBlockEdge + 1));
                int x = static_cast<int>(stream.uniform_int(ref.width - kBlockEdge + 1));
                bool clash = false;
                for (auto& [py, px] : spots)
                    if (std::abs(py - y) < kBlockEdge && std::abs(px - x) < kBlockEdge) {
                        clash = true;
                        break;
                    }
                if (!clash) {
                    spots.emplace_back(y, x);
                    grays.push_back(stream.uniform(0.0, 1.0));
                }
            }
            if (spots.size() < 5) throw SizeError("could not place 5 disjoint 32x32 blocks");
            img::Image out = ref;
            for (int k = 0; k < recipe.level; ++k) {
                auto [py, px] = spots[k];
                for (int y = 0; y < kBlockEdge; ++y)
                    for (int x = 0; x < kBlockEdge; ++x)
                        for (int ch = 0; ch < ref.channels; ++ch)
                            out.at(py + y, px + x, ch) = grays[k];
            }
            return out;
        }
    }
    throw FormatError("bad DistortionKind");
}

img::Image make_base_image(int index, int size, Rng stream) {
    img::Image im(size, size, 3);
    const int family = index % 4;
    switch (family) {
        case 0: { // gradient + sinusoid mix
            double fx = stream.uniform(2.0, 6.0);
            double fy = stream.uniform(2.0, 6.0);
            double phase[3] = {stream.uniform(0.0, 2.0 * M_PI), stream.uniform(0.0, 2.0 * M_PI),
                               stream.uniform(0.0, 2.0 * M_PI)};
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x)
                    for (int ch = 0; ch < 3; ++ch) {
                        double s = std::sin(2.0 * M_PI * (fx * x + fy * y) / size + phase[ch]);
                        double g = 0.25 * (x + y) / (2.0 * size - 2.0);
                        im.at(y, x, ch) = std::clamp(0.45 + 0.25 * s + g, 0.0, 1.0);
                    }
            break;
        }
        case 1: { // two-scale checkerboard, detuned by a smooth overlay.
            // Cells stay well above the strongest blur kernel so the
            // similarity ladder keeps dropping through the last level.
            int c1 = 14 + static_cast<int>(stream.uniform_int(6));
            int c2 = 26 + static_cast<int>(stream.uniform_int(10));
            double tint[3] = {stream.uniform(-0.08, 0.08), stream.uniform(-0.08, 0.08),
                              stream.uniform(-0.08, 0.08)};
            img::Plane overlay(size, size);
            for (double& v : overlay.data) v = stream.uniform(-1.0, 1.0);
            overlay = img::gaussian_blur(overlay, 3.0);
            img::Plane checker(size, size);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) {
                    double a = ((x / c1 + y / c1) % 2) ? 0.72 : 0.28;
                    double b = ((x / c2 + y / c2) % 2) ? 0.62 : 0.38;
                    checker.at(y, x) = 0.55 * a + 0.25 * b;
                }
            // soften the cell edges so the pattern degrades smoothly
            checker = img::gaussian_blur(checker, 1.8);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x)
                    for (int ch = 0; ch < 3; ++ch)
                        im.at(y, x, ch) = std::clamp(
                            checker.at(y, x) + 0.5 * overlay.at(y, x) + 0.12 + tint[ch], 0.0, 1.0);
            break;
        }
        case 2: { // band-limited noise, per channel
            for (int ch = 0; ch < 3; ++ch) {
                img::Plane noise(size, size);
                for (double& v : noise.data) v = stream.uniform();
                img::Plane smooth = img::gaussian_blur(noise, 2.0);
                double lo = smooth.data[0], hi = smooth.data[0];
                for (double v : smooth.data) {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                double span = hi > lo ? hi - lo : 1.0;
                for (int y = 0; y < size; ++y)
                    for (int x = 0; x < size; ++x)
                        im.at(y, x, ch) = 0.1 + 0.8 * (smooth.at(y, x) - lo) / span;
            }
            break;
        }
        default: { // broad dark strokes on a light background. Stroke width
            // sits above the strongest blur kernel for a monotone ladder.
            for (double& v : im.data) v = 0.85;
            int strokes = 14 + static_cast<int>(stream.uniform_int(8));
            for (int s = 0; s < strokes; ++s) {
                double x0 = stream.uniform(0.0, size - 1.0), y0 = stream.uniform(0.0, size - 1.0);
                double ang = stream.uniform(0.0, 2.0 * M_PI);
                double len = stream.uniform(20.0, 60.0);
                double val = stream.uniform(0.1, 0.45);
                int thick = 6 + static_cast<int>(stream.uniform_int(5));
                int steps = static_cast<int>(len);
                for (int t = 0; t < steps; ++t) {
                    int px = static_cast<int>(x0 + t * std::cos(ang));
                    int py = static_cast<int>(y0 + t * std::sin(ang));
                    for (int dy = 0; dy < thick; ++dy)
                        for (int dx = 0; dx < thick; ++dx) {
                            int yy = py + dy, xx = px + dx;
                            if (yy >= 0 && yy < size && xx >= 0 && xx < size)
                                for (int ch = 0; ch < 3; ++ch) im.at(yy, xx, ch) = val;
                        }
                }
            }
            break;
        }
    }
    return im;
}

DatasetManifest synthesize(const std::vector<img::Image>& bases,
                           const std::vector<DistortionRecipe>& recipes, uint64_t seed,
                           const std::string& out_dir) {
    for (const img::Image& b : bases)
        if (b.height < 160 || b.width < 160)
            throw SizeError("synthesize: base images must be at least 160 px per side");
    fs::create_directories(fs::path(out_dir) / "ref");
    fs::create_directories(fs::path(out_dir) / "dist");

    DatasetManifest m;
    m.base_dir = out_dir;
    m.score_lo = 0.0;
    m.score_hi = 100.0;
    Rng root(seed);
    fr::MapConfig map_cfg;

    std::vector<std::string> ref_rel(bases.size());
    for (size_t i = 0; i < bases.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "ref/b%02zu.png", i);
        ref_rel[i] = name;
        img::save_image(bases[i], (fs::path(out_dir) / name).string());
    }

    for (size_t i = 0; i < bases.size(); ++i) {
        // Reload so downstream scores are a function of the stored bytes.
        img::Image ref = img::load_image((fs::path(out_dir) / ref_rel[i]).string());
        for (const DistortionRecipe& r : recipes) {
            r.validate();
            Rng stream = root.substream("distort/" + distortion_token(r.kind) + "/b", i);
            img::Image dist = apply_distortion(ref, r, stream);

            char id[64];
            std::snprintf(id, sizeof(id), "b%02zu_%s_l%d", i, distortion_token(r.kind).c_str(),
                          r.level);
            std::string dist_rel = std::string("dist/") + id + ".png";
            img::save_image(dist, (fs::path(out_dir) / dist_rel).string());

            img::Image stored = img::load_image((fs::path(out_dir) / dist_rel).string());
            double score = 100.0 * fr::pool_map(fr::fsim_gm_map(stored, ref, map_cfg),
                                                fr::PoolStrategy::average, map_cfg);

            Entry e;
            e.id = id;
            e.distorted_path = dist_rel;
            e.reference_path = ref_rel[i];
            e.distortion_type = distortion_token(r.kind);
            e.level = r.level;
            e.score = score;
            e.score_kind = ScoreKind::MOS;
            m.entries.push_back(std::move(e));
        }
    }

    save_manifest(m, (fs::path(out_dir) / "manifest.csv").string());
    return m;
}

DatasetManifest synthesize(const SynthConfig& cfg, uint64_t seed, const std::string& out_dir) {
    Rng root(seed);
    std::vector<img::Image> bases;
    for (int i = 0; i < cfg.num_bases; ++i)
        bases.push_back(make_base_image(i, cfg.base_size, root.substream("base", i)));
    std::vector<DistortionRecipe> recipes;
    for (DistortionKind k : cfg.kinds)
        for (int l = 1; l <= cfg.levels; ++l) recipes.push_back({k, l});
    return synthesize(bases, recipes, seed, out_dir);
}

} // namespace qmap::data
