#pragma once

#include "qmap/metrics.hpp"

#include <vector>

namespace qmap::eval {

double apply_logistic(const LogisticParams& p, double x);

struct LogisticFit {
    LogisticParams params;
    std::vector<double> mapped; // predictions after the mapping
    double rmse = 0.0;          // on the fitting data
};

// Least-squares fit of the 4-parameter logistic
//   q~ = (eta1 - eta2) / (1 + exp(-(q - eta3)/|eta4|)) + eta2
// by Nelder-Mead simplex descent from a data-driven start
// (eta1 = max gt, eta2 = min gt, eta3 = median pred, eta4 = std pred).
LogisticFit fit_logistic(const std::vector<double>& pred, const std::vector<double>& gt);

} // namespace qmap::eval
