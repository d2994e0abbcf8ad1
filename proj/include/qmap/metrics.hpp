#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qmap::eval {

// Average ranks (ties get the mean of the ranks they span), 1-based.
std::vector<double> average_ranks(const std::vector<double>& v);

// Spearman rank correlation with average ranks for ties.
double srcc(const std::vector<double>& pred, const std::vector<double>& gt);

// Pearson linear correlation.
double plcc(const std::vector<double>& pred, const std::vector<double>& gt);

struct LogisticParams {
    double eta1 = 0.0, eta2 = 0.0, eta3 = 0.0, eta4 = 1.0;
};

struct EvalReport {
    double srcc = 0.0;
    double plcc = 0.0;
    int n = 0;
    std::optional<LogisticParams> logistic;
    std::optional<double> plcc_mapped; // PLCC after the logistic mapping
    std::map<std::string, std::pair<double, double>> per_type; // type -> (srcc, plcc)
};

} // namespace qmap::eval
