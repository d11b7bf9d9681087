#include "fflab/series.hpp"

#include "fflab/errors.hpp"

#include <algorithm>
#include <cmath>

namespace fflab::series {

ReturnSeries::ReturnSeries(std::string label_, std::vector<double> values_)
    : label(std::move(label_)), values(std::move(values_)) {
    if (values.empty()) throw DataError("series '" + label + "' is empty");
    for (const double v : values) {
        if (!std::isfinite(v)) throw DataError("series '" + label + "' has a non-finite value");
    }
}

double CorrelationMatrix::at(const std::string& a, const std::string& b) const {
    const auto ia = std::find(labels.begin(), labels.end(), a);
    const auto ib = std::find(labels.begin(), labels.end(), b);
    if (ia == labels.end() || ib == labels.end()) throw DataError("correlation label not found");
    return entries[static_cast<std::size_t>(ia - labels.begin())][static_cast<std::size_t>(ib - labels.begin())];
}

ReturnSeries log_returns(std::span<const double> prices, std::string label) {
    if (prices.size() < 2) throw DataError("log_returns needs at least 2 prices");
    std::vector<double> out;
    out.reserve(prices.size() - 1);
    for (std::size_t t = 0; t < prices.size(); ++t) {
        if (!(prices[t] > 0.0)) throw DataError("non-positive price at position " + std::to_string(t));
        if (t > 0) out.push_back(std::log(prices[t] / prices[t - 1]));
    }
    return {std::move(label), std::move(out)};
}

double mean(std::span<const double> values) {
    if (values.empty()) throw DataError("mean of an empty series");
    double sum = 0.0;
    for (const double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
    if (values.size() < 2) throw DataError("variance needs at least 2 values");
    const double m = mean(values);
    double ss = 0.0;
    for (const double v : values) ss += (v - m) * (v - m);
    return ss / static_cast<double>(values.size() - 1);
}

SummaryStats summary_stats(std::span<const double> values) {
    if (values.size() < 2) throw DataError("summary statistics need n >= 2");
    return {mean(values), std::sqrt(sample_variance(values))};
}

SummaryStats summary_stats(const ReturnSeries& series) { return summary_stats(series.values); }

CorrelationMatrix correlation_matrix(const std::vector<ReturnSeries>& series) {
    if (series.empty()) throw DataError("correlation matrix needs at least one series");
    const std::size_t n = series.front().n();
    if (n < 3) throw DataError("correlation needs series of length >= 3");
    const std::size_t k = series.size();

    std::vector<std::vector<double>> centered(k);
    std::vector<double> norms(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (series[i].n() != n) throw DataError("length mismatch: series '" + series[i].label + "'");
        const double m = mean(series[i].values);
        centered[i].reserve(n);
        double ss = 0.0;
        for (const double v : series[i].values) {
            centered[i].push_back(v - m);
            ss += (v - m) * (v - m);
        }
        if (!(ss > 0.0)) throw NumericalError("zero-variance series '" + series[i].label + "'");
        norms[i] = std::sqrt(ss);
    }

    CorrelationMatrix out;
    out.entries.assign(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        out.labels.push_back(series[i].label);
        out.entries[i][i] = 1.0;
        for (std::size_t j = 0; j < i; ++j) {
            double cross = 0.0;
            for (std::size_t t = 0; t < n; ++t) cross += centered[i][t] * centered[j][t];
            const double r = std::clamp(cross / (norms[i] * norms[j]), -1.0, 1.0);
            out.entries[i][j] = r;
            out.entries[j][i] = r;
        }
    }
    return out;
}

}  // namespace fflab::series
