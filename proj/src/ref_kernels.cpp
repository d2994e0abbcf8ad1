#include "qmap/ref_kernels.hpp"
#include "qmap/errors.hpp"

#include <algorithm>
#include <cmath>

namespace qmap::refk {

void conv3x3_fwd(const Tensor4& in, const Tensor4& w, const Tensor4& b, Tensor4& out) {
    const int N = in.n, C = in.c, H = in.h, W = in.w, OC = w.n;
    out = Tensor4(N, OC, H, W);
    for (int bi = 0; bi < N; ++bi)
        for (int oc = 0; oc < OC; ++oc)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    double acc = b.data[oc];
                    for (int ic = 0; ic < C; ++ic)
                        for (int ky = 0; ky < 3; ++ky) {
                            int yy = y + ky - 1;
                            if (yy < 0 || yy >= H) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                int xx = x + kx - 1;
                                if (xx < 0 || xx >= W) continue;
                                acc += w.at(oc, ic, ky, kx) * in.at(bi, ic, yy, xx);
                            }
                        }
                    out.at(bi, oc, y, x) = acc;
                }
}

void conv3x3_bwd_input(const Tensor4& dout, const Tensor4& w, Tensor4& din) {
    const int N = dout.n, OC = dout.c, H = dout.h, W = dout.w, C = w.c;
    din = Tensor4(N, C, H, W);
    for (int bi = 0; bi < N; ++bi)
        for (int ic = 0; ic < C; ++ic)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    double acc = 0.0;
                    for (int oc = 0; oc < OC; ++oc)
                        for (int ky = 0; ky < 3; ++ky) {
                            int oy = y - ky + 1;
                            if (oy < 0 || oy >= H) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                int ox = x - kx + 1;
                                if (ox < 0 || ox >= W) continue;
                                acc += w.at(oc, ic, ky, kx) * dout.at(bi, oc, oy, ox);
                            }
                        }
                    din.at(bi, ic, y, x) = acc;
                }
}

void conv3x3_bwd_params(const Tensor4& dout, const Tensor4& in, Tensor4& dw, Tensor4& db) {
    const int N = in.n, C = in.c, H = in.h, W = in.w, OC = dout.c;
    dw = Tensor4(OC, C, 3, 3);
    db = Tensor4(OC, 1, 1, 1);
    for (int oc = 0; oc < OC; ++oc)
        for (int ic = 0; ic < C; ++ic)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    double acc = 0.0;
                    for (int bi = 0; bi < N; ++bi)
                        for (int y = 0; y < H; ++y) {
                            int yy = y + ky - 1;
                            if (yy < 0 || yy >= H) continue;
                            for (int x = 0; x < W; ++x) {
                                int xx = x + kx - 1;
                                if (xx < 0 || xx >= W) continue;
                                acc += dout.at(bi, oc, y, x) * in.at(bi, ic, yy, xx);
                            }
                        }
                    dw.at(oc, ic, ky, kx) = acc;
                }
    for (int oc = 0; oc < OC; ++oc) {
        double acc = 0.0;
        for (int bi = 0; bi < N; ++bi)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    acc += dout.at(bi, oc, y, x);
        db.data[oc] = acc;
    }
}

void deconv2x2_fwd(const Tensor4& in, const Tensor4& w, const Tensor4& b, Tensor4& out) {
    const int N = in.n, C = in.c, H = in.h, W = in.w, OC = w.c;
    out = Tensor4(N, OC, 2 * H, 2 * W);
    for (int bi = 0; bi < N; ++bi)
        for (int oc = 0; oc < OC; ++oc)
            for (int oy = 0; oy < 2 * H; ++oy) {
                const int y = oy / 2, ky = oy % 2;
                for (int ox = 0; ox < 2 * W; ++ox) {
                    const int x = ox / 2, kx = ox % 2;
                    double acc = b.data[oc];
                    for (int ic = 0; ic < C; ++ic)
                        acc += w.at(ic, oc, ky, kx) * in.at(bi, ic, y, x);
                    out.at(bi, oc, oy, ox) = acc;
                }
            }
}

void maxpool2x2_fwd(const Tensor4& in, Tensor4& out, std::vector<int64_t>& argmax) {
    const int N = in.n, C = in.c, OH = in.h / 2, OW = in.w / 2;
    if (OH == 0 || OW == 0) throw ShapeError("max_pool2x2 output would be empty");
    out = Tensor4(N, C, OH, OW);
    argmax.assign(out.size(), 0);
    for (int bi = 0; bi < N; ++bi)
        for (int ch = 0; ch < C; ++ch)
            for (int y = 0; y < OH; ++y)
                for (int x = 0; x < OW; ++x) {
                    double best = in.at(bi, ch, 2 * y, 2 * x);
                    int64_t best_idx = static_cast<int64_t>(in.index(bi, ch, 2 * y, 2 * x));
                    for (int ky = 0; ky < 2; ++ky)
                        for (int kx = 0; kx < 2; ++kx) {
                            double v = in.at(bi, ch, 2 * y + ky, 2 * x + kx);
                            if (v > best) {
                                best = v;
                                best_idx = static_cast<int64_t>(in.index(bi, ch, 2 * y + ky, 2 * x + kx));
                            }
                        }
                    size_t oi = out.index(bi, ch, y, x);
                    out.data[oi] = best;
                    argmax[oi] = best_idx;
                }
}

void fc_fwd(const Tensor4& in, const Tensor4& w, const Tensor4& b, Tensor4& out) {
    const int N = in.n;
    const int F = in.c * in.h * in.w;
    const int U = w.n;
    out = Tensor4(N, U, 1, 1);
    for (int bi = 0; bi < N; ++bi)
        for (int u = 0; u < U; ++u) {
            double acc = b.data[u];
            const double* src = in.data.data() + static_cast<size_t>(bi) * F;
            const double* row = w.data.data() + static_cast<size_t>(u) * F;
            for (int f = 0; f < F; ++f) acc += row[f] * src[f];
            out.at(bi, u, 0, 0) = acc;
        }
}

img::Plane gradient_magnitude(const img::Plane& p, fr::GradOp op) {
    if (p.height < 3 || p.width < 3) throw SizeError("gradient_magnitude needs 3x3");
    double gxk[3][3], gyk[3][3];
    if (op == fr::GradOp::scharr) {
        const double base[3][3] = {{3, 0, -3}, {10, 0, -10}, {3, 0, -3}};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                gxk[i][j] = base[i][j] / 16.0;
                gyk[i][j] = base[j][i] / 16.0;
            }
    } else {
        const double base[3][3] = {{1, 0, -1}, {1, 0, -1}, {1, 0, -1}};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                gxk[i][j] = base[i][j] / 3.0;
                gyk[i][j] = base[j][i] / 3.0;
            }
    }
    img::Plane out(p.height, p.width);
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) {
            double gx = 0.0, gy = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                int yy = std::clamp(y + dy, 0, p.height - 1);
                for (int dx = -1; dx <= 1; ++dx) {
                    int xx = std::clamp(x + dx, 0, p.width - 1);
                    double v = p.at(yy, xx);
                    gx += gxk[dy + 1][dx + 1] * v;
                    gy += gyk[dy + 1][dx + 1] * v;
                }
            }
            out.at(y, x) = std::sqrt(gx * gx + gy * gy);
        }
    return out;
}

img::Plane gaussian_blur(const img::Plane& p, double sigma) {
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        taps[i + radius] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        sum += taps[i + radius];
    }
    for (double& t : taps) t /= sum;

    img::Plane tmp(p.height, p.width), out(p.height, p.width);
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += taps[k + radius] * p.at(y, std::clamp(x + k, 0, p.width - 1));
            tmp.at(y, x) = acc;
        }
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += taps[k + radius] * tmp.at(std::clamp(y + k, 0, p.height - 1), x);
            out.at(y, x) = acc;
        }
    return out;
}

img::QualityMap ssim_map(const img::Image& dist, const img::Image& ref, const fr::MapConfig& cfg) {
    const int win = cfg.gaussian_window;
    const int r = win / 2;
    img::Plane a = img::to_luminance(dist);
    img::Plane b = img::to_luminance(ref);
    for (double& v : a.data) v *= cfg.dynamic_range;
    for (double& v : b.data) v *= cfg.dynamic_range;

    std::vector<double> wgt(static_cast<size_t>(win) * win);
    double sum = 0.0;
    for (int dy = 0; dy < win; ++dy)
        for (int dx = 0; dx < win; ++dx) {
            double yy = dy - r, xx = dx - r;
            double g = std::exp(-(yy * yy + xx * xx) / (2.0 * cfg.gaussian_sigma * cfg.gaussian_sigma));
            wgt[dy * win + dx] = g;
            sum += g;
        }
    for (double& v : wgt) v /= sum;

    const double c1 = (cfg.ssim_k1 * cfg.dynamic_range) * (cfg.ssim_k1 * cfg.dynamic_range);
    const double c2 = (cfg.ssim_k2 * cfg.dynamic_range) * (cfg.ssim_k2 * cfg.dynamic_range);

    img::QualityMap out(dist.height - 2 * r, dist.width - 2 * r);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
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
    return out;
}

} // namespace qmap::refk
