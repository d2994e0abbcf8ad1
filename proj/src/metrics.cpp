#include "qmap/metrics.hpp"
#include "qmap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qmap::eval {

std::vector<double> average_ranks(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });

    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

namespace {

void check_pair(const std::vector<double>& a, const std::vector<double>& b, const char* what) {
    if (a.size() != b.size())
        throw ShapeError(std::string(what) + ": vector lengths differ");
    if (a.size() < 3)
        throw SizeError(std::string(what) + ": needs at least 3 samples");
}

bool is_constant(const std::vector<double>& v) {
    for (double x : v)
        if (x != v[0]) return false;
    return true;
}

} // namespace

double plcc(const std::vector<double>& pred, const std::vector<double>& gt) {
    check_pair(pred, gt, "plcc");
    if (is_constant(pred) || is_constant(gt))
        throw DomainError("plcc undefined for a constant vector");
    const size_t n = pred.size();
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += pred[i];
        my += gt[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = pred[i] - mx, dy = gt[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    return sxy / std::sqrt(sxx * syy);
}

double srcc(const std::vector<double>& pred, const std::vector<double>& gt) {
    check_pair(pred, gt, "srcc");
    if (is_constant(pred) || is_constant(gt))
        throw DomainError("srcc undefined for a constant vector");
    return plcc(average_ranks(pred), average_ranks(gt));
}

} // namespace qmap::eval
