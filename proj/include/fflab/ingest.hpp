#pragma once

#include "fflab/panel.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fflab::ingest {

/**
 * @brief Monthly-keyed table as read from a CSV file.
 *
 * Invariants: every row has one value per column; date keys strictly
 * increasing.
 */
struct RawTable {
    std::vector<std::string> columns;
    std::vector<DateKey> dates;
    std::vector<std::vector<double>> rows;

    [[nodiscard]] std::size_t size() const { return dates.size(); }
    [[nodiscard]] std::vector<double> column(std::string_view name) const;
    /// Throws DataError when an invariant is broken.
    void validate() const;

    friend bool operator==(const RawTable&, const RawTable&) = default;
};

/// A factor column taken from the factor file, optionally renamed (e.g. "Mkt-RF" as "MRP").
struct FactorColumn {
    std::string source;
    std::string label;

    friend bool operator==(const FactorColumn&, const FactorColumn&) = default;
};

struct DatasetConfig {
    DateKey start = 198603;
    DateKey end = 202002;
    std::vector<FactorColumn> factors = {{"Mkt-RF", "MRP"}, {"SMB", "SMB"}, {"HML", "HML"}};
    double factor_scale = 100.0;
    double rf_divisor = 1200.0;
    std::string asset = "MSFT";
    // Input paths, resolved relative to the config file's directory.
    std::string factor_file;
    std::string price_file;
    std::string yield_file;

    void validate() const;
    [[nodiscard]] std::vector<std::string> factor_labels() const;

    /// Parses "key = value" lines; '#' starts a comment.
    [[nodiscard]] static DatasetConfig parse(std::string_view text);
    [[nodiscard]] std::string to_text() const;

    friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

/**
 * Reads a Kenneth-French-style factor file: optional preamble, a header,
 * then YYYYMM-keyed rows. The monthly block ends at a blank line or at the
 * first key that is not YYYYMM (annual summaries). Values are divided by
 * `scale`.
 */
[[nodiscard]] RawTable parse_factor_csv(std::istream& in, double scale = 100.0);
[[nodiscard]] RawTable parse_factor_csv_text(std::string_view text, double scale = 100.0);

/// "date,price" CSV; ISO-8601 or YYYYMM dates; keeps the last observation per month.
[[nodiscard]] RawTable parse_price_csv(std::istream& in);
[[nodiscard]] RawTable parse_price_csv_text(std::string_view text);

/// "date,yield" CSV with annual percent yields; last observation per month.
[[nodiscard]] RawTable parse_yield_csv(std::istream& in);
[[nodiscard]] RawTable parse_yield_csv_text(std::string_view text);

/// Serializes in the factor-file layout (header ",c1,...", full precision values).
[[nodiscard]] std::string to_csv(const RawTable& table);

/// Restricts every table to the common date keys inside [window.first, window.second].
[[nodiscard]] std::vector<RawTable> align_monthly(const std::vector<RawTable>& tables,
                                                  std::pair<DateKey, DateKey> window);

/**
 * @brief Builds the analysis panel: EXR_t = ln(S_t / S_{t-1}) - yield_t / rf_divisor.
 *
 * `riskfree` and `factors` must share a date grid. `prices` either carries
 * one extra leading month (output keeps the full grid) or shares the grid
 * (first month is consumed by the return transform).
 */
[[nodiscard]] Panel build_panel(const RawTable& prices, const RawTable& riskfree, const RawTable& factors,
                                const DatasetConfig& config);

/// Minimum panel length accepted downstream (GARCH fitting).
inline constexpr std::size_t kMinPanelLength = 30;

}  // namespace fflab::ingest
