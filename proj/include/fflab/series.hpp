#pragma once

#include <span>
#include <string>
#include <vector>

namespace fflab::series {

/// Labelled return series; non-empty and all values finite. Statistics require n >= 2.
struct ReturnSeries {
    std::string label;
    std::vector<double> values;

    ReturnSeries() = default;
    ReturnSeries(std::string label, std::vector<double> values);

    [[nodiscard]] std::size_t n() const { return values.size(); }
};

struct SummaryStats {
    double mean = 0.0;
    double sd = 0.0;  // n - 1 divisor
};

struct CorrelationMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> entries;

    [[nodiscard]] double at(std::size_t i, std::size_t j) const { return entries[i][j]; }
    [[nodiscard]] double at(const std::string& a, const std::string& b) const;
};

/// ln(S_t / S_{t-1}); throws DataError on non-positive prices or fewer than 2 prices.
[[nodiscard]] ReturnSeries log_returns(std::span<const double> prices, std::string label = "r");

[[nodiscard]] SummaryStats summary_stats(const ReturnSeries& series);
[[nodiscard]] SummaryStats summary_stats(std::span<const double> values);

[[nodiscard]] double mean(std::span<const double> values);
/// Sample variance with n - 1 divisor.
[[nodiscard]] double sample_variance(std::span<const double> values);

/// Pearson correlations. Throws NumericalError naming any zero-variance series.
[[nodiscard]] CorrelationMatrix correlation_matrix(const std::vector<ReturnSeries>& series);

}  // namespace fflab::series
