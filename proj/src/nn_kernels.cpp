#include "qmap/nn_kernels.hpp"
#include "qmap/errors.hpp"

#include <algorithm>

namespace qmap::nn::kern {

void conv3x3_fwd(const Tensor4& in, const Tensor4& w, const Tensor4& b, Tensor4& out) {
    const int N = in.n, C = in.c, H = in.h, W = in.w, OC = w.n;
    out = Tensor4(N, OC, H, W);
#pragma omp parallel for collapse(2) schedule(static)
    for (int bi = 0; bi < N; ++bi)
        for (int oc = 0; oc < OC; ++oc) {
            const double bias = b.data[oc];
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    double acc = bias;
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
}

void conv3x3_bwd_input(const Tensor4& dout, const Tensor4& w, Tensor4& din) {
    const int N = dout.n, OC = dout.c, H = dout.h, W = dout.w, C = w.c;
    din = Tensor4(N, C, H, W);
#pragma omp parallel for collapse(2) schedule(static)
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
#pragma omp parallel for collapse(2) schedule(static)
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
#pragma omp parallel for schedule(static)
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
#pragma omp parallel for collapse(2) schedule(static)
    for (int bi = 0; bi < N; ++bi)
        for (int oc = 0; oc < OC; ++oc) {
            const double bias = b.data[oc];
            for (int oy = 0; oy < 2 * H; ++oy) {
                const int y = oy / 2, ky = oy % 2;
                for (int ox = 0; ox < 2 * W; ++ox) {
                    const int x = ox / 2, kx = ox % 2;
                    double acc = bias;
                    for (int ic = 0; ic < C; ++ic)
                        acc += w.at(ic, oc, ky, kx) * in.at(bi, ic, y, x);
                    out.at(bi, oc, oy, ox) = acc;
                }
            }
        }
}

void deconv2x2_bwd_input(const Tensor4& dout, const Tensor4& w, Tensor4& din) {
    const int N = dout.n, OC = dout.c, H = dout.h / 2, W = dout.w / 2;
    const int C = w.n;
    din = Tensor4(N, C, H, W);
#pragma omp parallel for collapse(2) schedule(static)
    for (int bi = 0; bi < N; ++bi)
        for (int ic = 0; ic < C; ++ic)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    double acc = 0.0;
                    for (int oc = 0; oc < OC; ++oc)
                        for (int ky = 0; ky < 2; ++ky)
                            for (int kx = 0; kx < 2; ++kx)
                                acc += w.at(ic, oc, ky, kx) * dout.at(bi, oc, 2 * y + ky, 2 * x + kx);
                    din.at(bi, ic, y, x) = acc;
                }
}

void deconv2x2_bwd_params(const Tensor4& dout, const Tensor4& in, Tensor4& dw, Tensor4& db) {
    const int N = in.n, C = in.c, H = in.h, W = in.w, OC = dout.c;
    dw = Tensor4(C, OC, 2, 2);
    db = Tensor4(OC, 1, 1, 1);
#pragma omp parallel for collapse(2) schedule(static)
    for (int ic = 0; ic < C; ++ic)
        for (int oc = 0; oc < OC; ++oc)
            for (int ky = 0; ky < 2; ++ky)
                for (int kx = 0; kx < 2; ++kx) {
                    double acc = 0.0;
                    for (int bi = 0; bi < N; ++bi)
                        for (int y = 0; y < H; ++y)
                            for (int x = 0; x < W; ++x)
                                acc += in.at(bi, ic, y, x) * dout.at(bi, oc, 2 * y + ky, 2 * x + kx);
                    dw.at(ic, oc, ky, kx) = acc;
                }
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < OC; ++oc) {
        double acc = 0.0;
        for (int bi = 0; bi < N; ++bi)
            for (int oy = 0; oy < dout.h; ++oy)
                for (int ox = 0; ox < dout.w; ++ox)
                    acc += dout.at(bi, oc, oy, ox);
        db.data[oc] = acc;
    }
}

void maxpool2x2_fwd(const Tensor4& in, Tensor4& out, std::vector<int64_t>& argmax) {
    const int N = in.n, C = in.c, OH = in.h / 2, OW = in.w / 2;
    if (OH == 0 || OW == 0)
        throw ShapeError("max_pool2x2 on " + in.shape_str() + " would produce an empty output");
    out = Tensor4(N, C, OH, OW);
    argmax.assign(out.size(), 0);
#pragma omp parallel for collapse(2) schedule(static)
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

void maxpool2x2_bwd(const Tensor4& dout, const std::vector<int64_t>& argmax, Tensor4& din) {
    // din must be pre-sized to the forward input shape by the caller.
    std::fill(din.data.begin(), din.data.end(), 0.0);
    for (size_t i = 0; i < dout.size(); ++i)
        din.data[static_cast<size_t>(argmax[i])] += dout.data[i];
}

void fc_fwd(const Tensor4& in, const Tensor4& w, const Tensor4& b, Tensor4& out) {
    const int N = in.n;
    const int F = in.c * in.h * in.w;
    const int U = w.n;
    out = Tensor4(N, U, 1, 1);
#pragma omp parallel for collapse(2) schedule(static)
    for (int bi = 0; bi < N; ++bi)
        for (int u = 0; u < U; ++u) {
            double acc = b.data[u];
            const double* src = in.data.data() + static_cast<size_t>(bi) * F;
            const double* row = w.data.data() + static_cast<size_t>(u) * F;
            for (int f = 0; f < F; ++f) acc += row[f] * src[f];
            out.at(bi, u, 0, 0) = acc;
        }
}

void fc_bwd_input(const Tensor4& dout, const Tensor4& w, Tensor4& din) {
    // din sized to the forward input shape by the caller.
    const int N = dout.n, U = w.n;
    const int F = w.c * w.h * w.w;
#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < N; ++bi) {
        double* dst = din.data.data() + static_cast<size_t>(bi) * F;
        for (int f = 0; f < F; ++f) {
            double acc = 0.0;
            for (int u = 0; u < U; ++u)
                acc += w.data[static_cast<size_t>(u) * F + f] * dout.at(bi, u, 0, 0);
            dst[f] = acc;
        }
    }
}

void fc_bwd_params(const Tensor4& dout, const Tensor4& in, Tensor4& dw, Tensor4& db) {
    const int N = in.n, U = dout.c;
    const int F = in.c * in.h * in.w;
    dw = Tensor4(U, F, 1, 1);
    db = Tensor4(U, 1, 1, 1);
#pragma omp parallel for schedule(static)
    for (int u = 0; u < U; ++u) {
        double* row = dw.data.data() + static_cast<size_t>(u) * F;
        double bacc = 0.0;
        for (int bi = 0; bi < N; ++bi) {
            const double g = dout.at(bi, u, 0, 0);
            const double* src = in.data.data() + static_cast<size_t>(bi) * F;
            for (int f = 0; f < F; ++f) row[f] += g * src[f];
            bacc += g;
        }
        db.data[u] = bacc;
    }
}

} // namespace qmap::nn::kern
