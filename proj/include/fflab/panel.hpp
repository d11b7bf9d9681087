#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fflab {

/// Calendar month encoded as YYYYMM, e.g. 198603.
using DateKey = int;

[[nodiscard]] bool is_valid_month_key(long long key);
[[nodiscard]] DateKey previous_month(DateKey key);
[[nodiscard]] DateKey next_month(DateKey key);

/**
 * @brief Date-aligned set of named numeric series.
 *
 * Used both for the factor panel (EXR plus factors) and for the innovation
 * panel produced by ARMA-GARCH filtering (EXRN plus factor innovations).
 * All columns have the same length as `dates`.
 */
class Panel {
public:
    Panel() = default;
    explicit Panel(std::vector<DateKey> dates);

    [[nodiscard]] std::size_t size() const { return dates_.size(); }
    [[nodiscard]] const std::vector<DateKey>& dates() const { return dates_; }
    [[nodiscard]] const std::vector<std::string>& labels() const { return labels_; }

    [[nodiscard]] bool has(std::string_view label) const;
    /// Throws DataError naming the label if absent.
    [[nodiscard]] const std::vector<double>& column(std::string_view label) const;

    /// Appends a column; throws DataError on duplicate label or length mismatch.
    void add(std::string label, std::vector<double> values);

    /// Rows kept in the given order; indices must be valid.
    [[nodiscard]] Panel select_rows(std::span<const std::size_t> rows) const;

    /// Throws DataError if any value is NaN or infinite.
    void require_finite() const;

    friend bool operator==(const Panel&, const Panel&) = default;

private:
    std::vector<DateKey> dates_;
    std::vector<std::string> labels_;
    std::vector<std::vector<double>> columns_;
};

}  // namespace fflab
