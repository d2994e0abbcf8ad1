#include "qmap/frmaps.hpp"
#include "qmap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace qmap::fr {

FrMethod parse_method(const std::string& token) {
    if (token == "ssim") return FrMethod::ssim;
    if (token == "fsim_gm") return FrMethod::fsim_gm;
    if (token == "fsim_pc") return FrMethod::fsim_pc;
    if (token == "mdsi_gc") return FrMethod::mdsi_gc;
    throw FormatError("unknown map method '" + token + "'");
}

std::string method_token(FrMethod m) {
    switch (m) {
        case FrMethod::ssim: return "ssim";
        case FrMethod::fsim_gm: return "fsim_gm";
        case FrMethod::fsim_pc: return "fsim_pc";
        case FrMethod::mdsi_gc: return "mdsi_gc";
    }
    throw FormatError("bad FrMethod");
}

void MapConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw DomainError(std::string(name) + " must be positive");
    };
    positive(ssim_k1, "ssim_k1");
    positive(ssim_k2, "ssim_k2");
    positive(dynamic_range, "dynamic_range");
    positive(gaussian_sigma, "gaussian_sigma");
    positive(fsim_t2, "fsim_t2");
    positive(pc_t1, "pc_t1");
    positive(mdsi_c1, "mdsi_c1");
    positive(mdsi_c2, "mdsi_c2");
    positive(mdsi_c3, "mdsi_c3");
    positive(deviation_q, "deviation_q");
    if (gaussian_window < 3 || gaussian_window % 2 == 0)
        throw DomainError("gaussian_window must be odd and >= 3");
    if (pc_scales < 1 || pc_orientations < 1)
        throw DomainError("pc bank needs at least one scale and orientation");
    if (mdsi_alpha < 0.0 || mdsi_alpha > 1.0)
        throw DomainError("mdsi_alpha must be in [0,1]");
}

MapConfig load_map_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read map config " + path);
    MapConfig cfg;
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        auto ltrim = line.find_first_not_of(" \t\r");
        if (ltrim == std::string::npos) continue;
        auto rtrim = line.find_last_not_of(" \t\r");
        line = line.substr(ltrim, rtrim - ltrim + 1);
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected key=value");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto getd = [&](const char* k, double& v) {
        auto it = kv.find(k);
        if (it != kv.end()) v = std::stod(it->second);
    };
    auto geti = [&](const char* k, int& v) {
        auto it = kv.find(k);
        if (it != kv.end()) v = std::stoi(it->second);
    };
    getd("ssim_k1", cfg.ssim_k1);
    getd("ssim_k2", cfg.ssim_k2);
    getd("dynamic_range", cfg.dynamic_range);
    geti("gaussian_window", cfg.gaussian_window);
    getd("gaussian_sigma", cfg.gaussian_sigma);
    getd("fsim_t2", cfg.fsim_t2);
    geti("pc_scales", cfg.pc_scales);
    geti("pc_orientations", cfg.pc_orientations);
    getd("pc_t1", cfg.pc_t1);
    getd("mdsi_c1", cfg.mdsi_c1);
    getd("mdsi_c2", cfg.mdsi_c2);
    getd("mdsi_c3", cfg.mdsi_c3);
    getd("mdsi_alpha", cfg.mdsi_alpha);
    getd("deviation_q", cfg.deviation_q);
    cfg.validate();
    return cfg;
}

void save_map_config(const MapConfig& cfg, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write map config " + path);
    f.precision(17);
    f << "ssim_k1=" << cfg.ssim_k1 << "\n"
      << "ssim_k2=" << cfg.ssim_k2 << "\n"
      << "dynamic_range=" << cfg.dynamic_range << "\n"
      << "gaussian_window=" << cfg.gaussian_window << "\n"
      << "gaussian_sigma=" << cfg.gaussian_sigma << "\n"
      << "fsim_t2=" << cfg.fsim_t2 << "\n"
      << "pc_scales=" << cfg.pc_scales << "\n"
      << "pc_orientations=" << cfg.pc_orientations << "\n"
      << "pc_t1=" << cfg.pc_t1 << "\n"
      << "mdsi_c1=" << cfg.mdsi_c1 << "\n"
      << "mdsi_c2=" << cfg.mdsi_c2 << "\n"
      << "mdsi_c3=" << cfg.mdsi_c3 << "\n"
      << "mdsi_alpha=" << cfg.mdsi_alpha << "\n"
      << "deviation_q=" << cfg.deviation_q << "\n";
}

namespace {

// Luminance rescaled to the [0, dynamic_range] working scale.
Plane lum255(const Image& im, double range) {
    Plane l = img::to_luminance(im);
    for (double& v : l.data) v *= range;
    return l;
}

void require_same_dims(const Image& a, const Image& b, const char* op) {
    if (a.height != b.height || a.width != b.width || a.channels != b.channels)
        throw ShapeError(std::string(op) + ": image dimensions differ");
}

struct GradKernel {
    double gx[3][3];
    double gy[3][3];
};

GradKernel grad_kernel(GradOp op) {
    GradKernel k{};
    if (op == GradOp::scharr) {
        const double s = 1.0 / 16.0;
        double gx[3][3] = {{3, 0, -3}, {10, 0, -10}, {3, 0, -3}};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                k.gx[i][j] = gx[i][j] * s;
                k.gy[i][j] = gx[j][i] * s;
            }
    } else {
        const double s = 1.0 / 3.0;
        double gx[3][3] = {{1, 0, -1}, {1, 0, -1}, {1, 0, -1}};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                k.gx[i][j] = gx[i][j] * s;
                k.gy[i][j] = gx[j][i] * s;
            }
    }
    return k;
}

} // namespace

Plane gradient_magnitude(const Plane& p, GradOp op) {
    if (p.height < 3 || p.width < 3)
        throw SizeError("gradient_magnitude needs at least a 3x3 plane");
    GradKernel k = grad_kernel(op);
    Plane out(p.height, p.width);
    const int h = p.height, w = p.width;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double gx = 0.0, gy = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                int yy = std::clamp(y + dy, 0, h - 1);
                for (int dx = -1; dx <= 1; ++dx) {
                    int xx = std::clamp(x + dx, 0, w - 1);
                    double v = p.at(yy, xx);
                    gx += k.gx[dy + 1][dx + 1] * v;
                    gy += k.gy[dy + 1][dx + 1] * v;
                }
            }
            out.at(y, x) = std::sqrt(gx * gx + gy * gy);
        }
    }
    return out;
}

QualityMap ssim_map(const Image& dist, const Image& ref, const MapConfig& cfg) {
    require_same_dims(dist, ref, "ssim_map");
    cfg.validate();
    const int win = cfg.gaussian_window;
    const int r = win / 2;
    if (dist.height < win || dist.width < win)
        throw SizeError("ssim_map needs images at least the window size");

    Plane a = lum255(dist, cfg.dynamic_range);
    Plane b = lum255(ref, cfg.dynamic_range);

    // Normalized Gaussian window.
    std::vector<double> wgt(static_cast<size_t>(win) * win);
    {
        double sum = 0.0;
        for (int dy = 0; dy < win; ++dy)
            for (int dx = 0; dx < win; ++dx) {
                double yy = dy - r, xx = dx - r;
                double g = std::exp(-(yy * yy + xx * xx) / (2.0 * cfg.gaussian_sigma * cfg.gaussian_sigma));
                wgt[dy * win + dx] = g;
                sum += g;
            }
        for (double& v : wgt) v /= sum;
    }

    const double c1 = (cfg.ssim_k1 * cfg.dynamic_range) * (cfg.ssim_k1 * cfg.dynamic_range);
    const double c2 = (cfg.ssim_k2 * cfg.dynamic_range) * (cfg.ssim_k2 * cfg.dynamic_range);

    const int oh = dist.height - 2 * r;
    const int ow = dist.width - 2 * r;
    QualityMap out(oh, ow);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double m1 = 0.0, m2 = 0.0, s11 = 0.0, s22 = 0.0, s12 = 0.0;
            for (int dy = 0; dy < win; ++dy)
                for (int dx = 0; dx < win; ++dx) {
                    double wv = wgt[dy * win + dx];
                    double va = a.at(y + dy, x + dx);
                    double vb = b.at(y + dy, x + dx);
                    m1 += wv * va;
                    m2 += wv * vb;
                    s11 += wv * va * va;
                    s22 += wv * vb * vb;
                    s12 += wv * va * vb;
                }
            double var1 = s11 - m1 * m1;
            double var2 = s22 - m2 * m2;
            double cov = s12 - m1 * m2;
            double num = (2.0 * (m1 * m2) + c1) * (2.0 * cov + c2);
            double den = ((m1 * m1 + m2 * m2) + c1) * ((var1 + var2) + c2);
            out.at(y, x) = std::clamp(num / den, 0.0, 1.0);
        }
    }
    return out;
}

int ssim_border(const MapConfig& cfg) { return cfg.gaussian_window / 2; }

QualityMap fsim_gm_map(const Image& dist, const Image& ref, const MapConfig& cfg) {
    require_same_dims(dist, ref, "fsim_gm_map");
    cfg.validate();
    Plane g1 = gradient_magnitude(lum255(dist, cfg.dynamic_range), GradOp::scharr);
    Plane g2 = gradient_magnitude(lum255(ref, cfg.dynamic_range), GradOp::scharr);
    QualityMap out(dist.height, dist.width);
    const double t2 = cfg.fsim_t2;
    const size_t n = out.size();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i) {
        double a = g1.data[i], b = g2.data[i];
        out.data[i] = (2.0 * (a * b) + t2) / ((a * a + b * b) + t2);
    }
    return out;
}

QualityMap fsim_pc_map(const Image& dist, const Image& ref, const MapConfig& cfg) {
    require_same_dims(dist, ref, "fsim_pc_map");
    cfg.validate();
    Plane p1 = phase_congruency(lum255(dist, cfg.dynamic_range), cfg);
    Plane p2 = phase_congruency(lum255(ref, cfg.dynamic_range), cfg);
    QualityMap out(dist.height, dist.width);
    const double t1 = cfg.pc_t1;
    const size_t n = out.size();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i) {
        double a = p1.data[i], b = p2.data[i];
        out.data[i] = (2.0 * (a * b) + t1) / ((a * a + b * b) + t1);
    }
    return out;
}

QualityMap mdsi_map(const Image& dist, const Image& ref, const MapConfig& cfg) {
    if (dist.channels != 3 || ref.channels != 3)
        throw ShapeError("mdsi_map requires 3-channel images");
    require_same_dims(dist, ref, "mdsi_map");
    cfg.validate();

    const int h = dist.height, w = dist.width;
    Plane l1(h, w), l2(h, w), h1(h, w), h2(h, w), m1(h, w), m2(h, w);
    const double range = cfg.dynamic_range;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double r1 = dist.at(y, x, 0) * range, g1v = dist.at(y, x, 1) * range, b1 = dist.at(y, x, 2) * range;
            double r2 = ref.at(y, x, 0) * range, g2v = ref.at(y, x, 1) * range, b2 = ref.at(y, x, 2) * range;
            l1.at(y, x) = 0.299 * r1 + 0.587 * g1v + 0.114 * b1;
            l2.at(y, x) = 0.299 * r2 + 0.587 * g2v + 0.114 * b2;
            h1.at(y, x) = 0.30 * r1 + 0.04 * g1v - 0.35 * b1;
            h2.at(y, x) = 0.30 * r2 + 0.04 * g2v - 0.35 * b2;
            m1.at(y, x) = 0.34 * r1 - 0.60 * g1v + 0.17 * b1;
            m2.at(y, x) = 0.34 * r2 - 0.60 * g2v + 0.17 * b2;
        }

    Plane fused(h, w);
    for (size_t i = 0; i < fused.size(); ++i)
        fused.data[i] = 0.5 * (l1.data[i] + l2.data[i]);

    Plane gd = gradient_magnitude(l1, GradOp::prewitt);
    Plane gr = gradient_magnitude(l2, GradOp::prewitt);
    Plane gf = gradient_magnitude(fused, GradOp::prewitt);

    QualityMap out(h, w);
    const double c1 = cfg.mdsi_c1, c2 = cfg.mdsi_c2, c3 = cfg.mdsi_c3;
    const double alpha = cfg.mdsi_alpha;
    const size_t n = out.size();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i) {
        double gdv = gd.data[i], grv = gr.data[i], gfv = gf.data[i];
        double gs = (2.0 * (grv * gdv) + c1) / ((grv * grv + gdv * gdv) + c1);
        double gs_df = (2.0 * (gdv * gfv) + c2) / ((gdv * gdv + gfv * gfv) + c2);
        double gs_rf = (2.0 * (grv * gfv) + c2) / ((grv * grv + gfv * gfv) + c2);
        double gs_total = gs + gs_df - gs_rf;
        double hv1 = h1.data[i], hv2 = h2.data[i], mv1 = m1.data[i], mv2 = m2.data[i];
        double cs_num = (2.0 * (hv1 * hv2) + 2.0 * (mv1 * mv2)) + c3;
        double cs_den = ((hv1 * hv1 + hv2 * hv2) + (mv1 * mv1 + mv2 * mv2)) + c3;
        double cs = cs_num / cs_den;
        out.data[i] = std::clamp(alpha * gs_total + (1.0 - alpha) * cs, 0.0, 1.0);
    }
    return out;
}

QualityMap compute_map(FrMethod m, const Image& dist, const Image& ref, const MapConfig& cfg) {
    switch (m) {
        case FrMethod::ssim: return ssim_map(dist, ref, cfg);
        case FrMethod::fsim_gm: return fsim_gm_map(dist, ref, cfg);
        case FrMethod::fsim_pc: return fsim_pc_map(dist, ref, cfg);
        case FrMethod::mdsi_gc: return mdsi_map(dist, ref, cfg);
    }
    throw FormatError("bad FrMethod");
}

PoolStrategy parse_pool(const std::string& token) {
    if (token == "average") return PoolStrategy::average;
    if (token == "std_dev") return PoolStrategy::std_dev;
    if (token == "deviation") return PoolStrategy::deviation;
    throw FormatError("unknown pooling '" + token + "'");
}

double pool_map(const QualityMap& map, PoolStrategy s, const MapConfig& cfg) {
    if (map.size() == 0) throw SizeError("pool_map on empty map");
    const size_t n = map.size();
    switch (s) {
        case PoolStrategy::average: {
            double sum = 0.0;
            for (double v : map.data) sum += v;
            return sum / static_cast<double>(n);
        }
        case PoolStrategy::std_dev: {
            double sum = 0.0, sq = 0.0;
            for (double v : map.data) {
                sum += v;
                sq += v * v;
            }
            double mean = sum / static_cast<double>(n);
            double var = sq / static_cast<double>(n) - mean * mean;
            return std::sqrt(std::max(0.0, var));
        }
        case PoolStrategy::deviation: {
            double sum = 0.0;
            std::vector<double> t(n);
            for (size_t i = 0; i < n; ++i) {
                t[i] = std::pow(map.data[i], cfg.deviation_q);
                sum += t[i];
            }
            double mean = sum / static_cast<double>(n);
            double mad = 0.0;
            for (size_t i = 0; i < n; ++i) mad += std::abs(t[i] - mean);
            return mad / static_cast<double>(n);
        }
    }
    throw FormatError("bad PoolStrategy");
}

QualityMap avg_patchify_map(const QualityMap& map, int block) {
    if (block < 1) throw DomainError("avg_patchify_map block must be >= 1");
    if (block == 1) return map;
    QualityMap out(map.height, map.width);
    for (int ty = 0; ty < map.height; ty += block) {
        int bh = std::min(block, map.height - ty);
        for (int tx = 0; tx < map.width; tx += block) {
            int bw = std::min(block, map.width - tx);
            double sum = 0.0;
            for (int y = 0; y < bh; ++y)
                for (int x = 0; x < bw; ++x)
                    sum += map.at(ty + y, tx + x);
            double mean = sum / (static_cast<double>(bh) * bw);
            for (int y = 0; y < bh; ++y)
                for (int x = 0; x < bw; ++x)
                    out.at(ty + y, tx + x) = mean;
        }
    }
    return out;
}

void save_map(const QualityMap& map, const std::string& path) {
    Image gray(map.height, map.width, 1);
    gray.data = map.data;
    img::save_image(gray, path);
}

} // namespace qmap::fr
