#pragma once

#include "fflab/ingest.hpp"
#include "fflab/panel.hpp"
#include "fflab/regress.hpp"
#include "fflab/series.hpp"
#include "fflab/stests.hpp"
#include "fflab/tsmodel.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fflab::report {

enum class PlotKind { Qq, ResidualsVsFitted, ScaleLocation, ResidualsVsLeverage, CooksBar, ScatterMatrix, Heatmap };

[[nodiscard]] const char* to_string(PlotKind kind);
[[nodiscard]] PlotKind plot_kind_from_string(std::string_view s);

/// Named group of numeric records sharing one field layout.
struct PointSet {
    std::string name;
    std::vector<std::string> fields;
    std::vector<std::vector<double>> records;

    [[nodiscard]] std::vector<double> field(std::string_view name) const;
    friend bool operator==(const PointSet&, const PointSet&) = default;
};

struct ReferenceLine {
    std::string label;
    double slope = 0.0;
    double intercept = 0.0;
    friend bool operator==(const ReferenceLine&, const ReferenceLine&) = default;
};

struct PlotData {
    PlotKind kind = PlotKind::Qq;
    std::string title;
    std::vector<std::string> labels;
    std::vector<PointSet> sets;
    std::vector<ReferenceLine> lines;
    std::vector<std::size_t> flagged;

    [[nodiscard]] const PointSet& set(std::string_view name) const;
    friend bool operator==(const PlotData&, const PlotData&) = default;
};

/**
 * Sorted standardized values against standard-normal quantiles at (i - 0.5)/n.
 * The reference line passes through the quartile pair. Theoretical quantiles
 * are mirrored so they are exactly antisymmetric.
 */
[[nodiscard]] PlotData qq_plot_data(std::span<const double> residuals, std::string title = "qq");

/// Residuals-vs-fitted, scale-location, residuals-vs-leverage (with Cook's 0.5/1 contours) and Cook's bars.
[[nodiscard]] std::vector<PlotData> residual_diagnostic_data(const regress::OlsFit& fit, std::string title = "");

/// Pairwise point sets and 20-bin histograms for the given panel series (all series when empty).
[[nodiscard]] PlotData scatter_matrix_data(const Panel& panel, const std::vector<std::string>& labels = {},
                                           std::string title = "scatter");
[[nodiscard]] PlotData heatmap_data(const series::CorrelationMatrix& corr, std::string title = "heatmap");

/// CSV with '#' metadata lines; full-precision values so parse(render(x)) == x.
[[nodiscard]] std::string render_plot_csv(const PlotData& plot);
[[nodiscard]] PlotData parse_plot_csv(std::string_view text);

inline constexpr int kHistogramBins = 20;
inline constexpr std::array<double, 2> kCookContours = {0.5, 1.0};

struct ExclusionResult {
    std::vector<std::size_t> excluded;
    regress::OlsFit refit;
};

/// One regression model with its diagnostics (parallel for factors and innovations).
struct ModelSection {
    std::string name;
    regress::DesignSpec spec;
    regress::OlsFit fit;
    std::vector<double> cooks;
    std::vector<std::size_t> influential;
    stests::TestResult durbin_watson;
    stests::TestResult jarque_bera;
    std::map<std::string, stests::VifValue> vif;
    std::vector<regress::OlsFit> backward;
    double backward_alpha_out = 0.05;
    std::optional<ExclusionResult> exclusion;
    std::vector<PlotData> plots;
};

struct ModelComparison {
    std::vector<std::string> terms;
    std::vector<double> factor_coefficients;
    std::vector<double> innovation_coefficients;
    double factor_r_squared = 0.0;
    double innovation_r_squared = 0.0;
    double r_squared_delta = 0.0;  // factor minus innovation
    std::pair<double, double> durbin_watson;
    std::pair<double, double> jarque_bera;
    std::pair<double, double> jarque_bera_p;
    std::map<std::string, std::pair<double, double>> vif;
    bool heavy_tail_advisory = false;  // either JB rejects normality at 1%
};

/// Throws DataError when the fits do not share the regressor label set.
[[nodiscard]] ModelComparison compare_models(const regress::OlsFit& factor_fit, const regress::OlsFit& innovation_fit,
                                             const std::map<std::string, stests::VifValue>& factor_vif = {},
                                             const std::map<std::string, stests::VifValue>& innovation_vif = {});

struct GarchSummary {
    std::string label;
    tsmodel::ArmaGarchParams params;
    std::optional<std::array<double, 6>> standard_errors;
    double log_likelihood = 0.0;
    bool converged = true;
    int iterations = 0;
    std::string status;
    double innovation_mean = 0.0;
    double innovation_sd = 0.0;
};

struct ReportMeta {
    std::string asset;
    DateKey start = 0;
    DateKey end = 0;
    std::size_t n = 0;
    std::vector<std::string> series;       // factor panel labels
    std::vector<std::string> regressors;   // regression factors
    std::uint64_t seed = 0;
};

struct AnalysisReport {
    ReportMeta meta;
    std::vector<std::pair<std::string, series::SummaryStats>> summary;  // Table 1
    series::CorrelationMatrix factor_correlations;                      // Table 2
    series::CorrelationMatrix innovation_correlations;                  // Table 5
    std::vector<GarchSummary> garch;
    ModelSection factor_model;
    ModelSection innovation_model;
    std::vector<stests::TestResult> adf;
    std::vector<stests::TestResult> ljung_box;
    std::vector<stests::TestResult> engle_granger;
    ModelComparison comparison;
    std::vector<PlotData> panel_plots;  // scatter matrices and heatmaps
};

/// Fixed-point rendering with `decimals` places; never prints a negative zero.
[[nodiscard]] std::string format_fixed(double value, int decimals);

/// table1.csv ... table7.csv and report.json, plus plots/*.csv.
void render_tables(const AnalysisReport& report, const std::filesystem::path& dir);

[[nodiscard]] std::string table_csv(const AnalysisReport& report, int table);

}  // namespace fflab::report
