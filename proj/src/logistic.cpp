#include "qmap/logistic.hpp"
#include "qmap/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace qmap::eval {

double apply_logistic(const LogisticParams& p, double x) {
    const double a4 = std::abs(p.eta4);
    double z = -(x - p.eta3) / a4;
    double denom;
    if (z > 0) {
        double e = std::exp(-z);
        denom = (1.0 + e) / e; // = 1 + exp(z), overflow-safe
    } else {
        denom = 1.0 + std::exp(z);
    }
    return (p.eta1 - p.eta2) / denom + p.eta2;
}

namespace {

using Point = std::array<double, 4>;

double sse(const Point& p, const std::vector<double>& pred, const std::vector<double>& gt) {
    LogisticParams lp{p[0], p[1], p[2], p[3]};
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = apply_logistic(lp, pred[i]) - gt[i];
        acc += d * d;
    }
    return acc;
}

// One Nelder-Mead run; returns iterations consumed.
int nelder_mead(std::vector<std::pair<Point, double>>& simplex,
                const std::vector<double>& pred, const std::vector<double>& gt,
                int max_iters) {
    const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
    int it = 0;
    for (; it < max_iters; ++it) {
        std::sort(simplex.begin(), simplex.end(),
                  [](const auto& a, const auto& b) { return a.second < b.second; });
        const double fbest = simplex.front().second;
        const double fworst = simplex.back().second;
        if (fworst - fbest <= 1e-14 * (1.0 + std::abs(fbest))) break;

        Point centroid{0, 0, 0, 0};
        for (size_t i = 0; i + 1 < simplex.size(); ++i)
            for (int d = 0; d < 4; ++d) centroid[d] += simplex[i].first[d];
        for (int d = 0; d < 4; ++d) centroid[d] /= static_cast<double>(simplex.size() - 1);

        auto blend = [&](double t) {
            Point p;
            for (int d = 0; d < 4; ++d)
                p[d] = centroid[d] + t * (simplex.back().first[d] - centroid[d]);
            return p;
        };

        Point refl = blend(-alpha);
        double frefl = sse(refl, pred, gt);
        if (frefl < simplex.front().second) {
            Point expd = blend(-gamma);
            double fexpd = sse(expd, pred, gt);
            simplex.back() = fexpd < frefl ? std::make_pair(expd, fexpd)
                                           : std::make_pair(refl, frefl);
        } else if (frefl < simplex[simplex.size() - 2].second) {
            simplex.back() = {refl, frefl};
        } else {
            Point contr = blend(frefl < simplex.back().second ? -rho : rho);
            double fcontr = sse(contr, pred, gt);
            if (fcontr < std::min(frefl, simplex.back().second)) {
                simplex.back() = {contr, fcontr};
            } else {
                for (size_t i = 1; i < simplex.size(); ++i) {
                    for (int d = 0; d < 4; ++d)
                        simplex[i].first[d] = simplex[0].first[d] +
                                              sigma * (simplex[i].first[d] - simplex[0].first[d]);
                    simplex[i].second = sse(simplex[i].first, pred, gt);
                }
            }
        }
    }
    std::sort(simplex.begin(), simplex.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    return it;
}

} // namespace

LogisticFit fit_logistic(const std::vector<double>& pred, const std::vector<double>& gt) {
    if (pred.size() != gt.size()) throw ShapeError("fit_logistic: vector lengths differ");
    if (pred.size() < 8) throw SizeError("fit_logistic needs at least 8 samples");
    const double gmin = *std::min_element(gt.begin(), gt.end());
    const double gmax = *std::max_element(gt.begin(), gt.end());
    if (gmax == gmin) throw DomainError("fit_logistic: constant ground truth is degenerate");

    std::vector<double> sorted = pred;
    std::sort(sorted.begin(), sorted.end());
    const double med = sorted[sorted.size() / 2];
    double mean = 0.0;
    for (double v : pred) mean += v;
    mean /= static_cast<double>(pred.size());
    double var = 0.0;
    for (double v : pred) var += (v - mean) * (v - mean);
    double stddev = std::sqrt(var / static_cast<double>(pred.size()));
    if (stddev == 0.0) stddev = 1.0;

    const Point init{gmax, gmin, med, stddev};
    constexpr int kMaxIters = 10000;
    int used = 0;
    Point best = init;
    double fbest = sse(init, pred, gt);

    // A few restarts around the incumbent wring out simplex stagnation.
    double scale = 1.0;
    while (used < kMaxIters) {
        std::vector<std::pair<Point, double>> simplex;
        simplex.emplace_back(best, fbest);
        for (int d = 0; d < 4; ++d) {
            Point p = best;
            double step = 0.1 * scale * (std::abs(p[d]) > 1e-8 ? std::abs(p[d]) : 1.0);
            p[d] += step;
            simplex.emplace_back(p, sse(p, pred, gt));
        }
        used += nelder_mead(simplex, pred, gt, kMaxIters - used);
        if (simplex.front().second < fbest) {
            fbest = simplex.front().second;
            best = simplex.front().first;
        }
        const double fspread = simplex.back().second - simplex.front().second;
        if (fspread <= 1e-14 * (1.0 + std::abs(fbest)) && scale < 0.02) break;
        scale *= 0.3;
    }
    if (used >= kMaxIters && fbest > 1e-6 * static_cast<double>(pred.size()) * (gmax - gmin)) {
        // Converged poorly; report the residual for diagnosis.
        throw FitError("fit_logistic did not converge in " + std::to_string(kMaxIters) +
                       " iterations (residual SSE " + std::to_string(fbest) + ")");
    }

    LogisticFit fit;
    fit.params = {best[0], best[1], best[2], std::abs(best[3])};
    fit.mapped.resize(pred.size());
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        fit.mapped[i] = apply_logistic(fit.params, pred[i]);
        const double d = fit.mapped[i] - gt[i];
        acc += d * d;
    }
    fit.rmse = std::sqrt(acc / static_cast<double>(pred.size()));
    return fit;
}

} // namespace qmap::eval
