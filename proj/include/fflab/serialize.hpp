#pragma once

#include "fflab/ingest.hpp"
#include "fflab/panel.hpp"
#include "fflab/regress.hpp"
#include "fflab/report.hpp"
#include "fflab/series.hpp"
#include "fflab/stests.hpp"
#include "fflab/tsmodel.hpp"

#include <json.hpp>

// JSON documents for every artifact the pipeline persists. Non-finite
// numbers are written as null and read back as NaN.
namespace fflab::serialize {

using nlohmann::json;

[[nodiscard]] json to_json(const Panel& panel);
[[nodiscard]] Panel panel_from_json(const json& j);

[[nodiscard]] json to_json(const ingest::DatasetConfig& config);

[[nodiscard]] json to_json(const series::SummaryStats& s);
[[nodiscard]] series::SummaryStats summary_from_json(const json& j);
[[nodiscard]] json to_json(const series::CorrelationMatrix& m);
[[nodiscard]] series::CorrelationMatrix correlation_from_json(const json& j);

[[nodiscard]] json to_json(const tsmodel::ArmaGarchParams& p);
[[nodiscard]] tsmodel::ArmaGarchParams params_from_json(const json& j);
[[nodiscard]] json to_json(const tsmodel::ArmaGarchFit& fit);
[[nodiscard]] tsmodel::ArmaGarchFit garch_fit_from_json(const json& j);
[[nodiscard]] json to_json(const report::GarchSummary& s);
[[nodiscard]] report::GarchSummary garch_summary_from_json(const json& j);

[[nodiscard]] json to_json(const regress::DesignSpec& spec);
[[nodiscard]] regress::DesignSpec design_from_json(const json& j);
[[nodiscard]] json to_json(const regress::OlsFit& fit);
[[nodiscard]] regress::OlsFit ols_from_json(const json& j);

[[nodiscard]] json to_json(const stests::TestResult& r);
[[nodiscard]] stests::TestResult test_from_json(const json& j);
[[nodiscard]] json to_json(const std::map<std::string, stests::VifValue>& vif);
[[nodiscard]] std::map<std::string, stests::VifValue> vif_from_json(const json& j);

[[nodiscard]] json to_json(const report::PlotData& p);
[[nodiscard]] report::PlotData plot_from_json(const json& j);
[[nodiscard]] json to_json(const report::ModelSection& m);
[[nodiscard]] report::ModelSection model_from_json(const json& j);
[[nodiscard]] json to_json(const report::ModelComparison& c);
[[nodiscard]] report::ModelComparison comparison_from_json(const json& j);

/// report.json layout: meta, summaryStats, correlations, garchFits, factorModel,
/// innovationModel, tests, backward, plots.
[[nodiscard]] json to_json(const report::AnalysisReport& r);
[[nodiscard]] report::AnalysisReport report_from_json(const json& j);

}  // namespace fflab::serialize
