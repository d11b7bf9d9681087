#include "fflab/panel.hpp"

#include "fflab/errors.hpp"

#include <algorithm>
#include <cmath>

namespace fflab {

bool is_valid_month_key(long long key) {
    if (key < 100001 || key > 999912) return false;
    const long long month = key % 100;
    return month >= 1 && month <= 12;
}

DateKey previous_month(DateKey key) {
    return key % 100 == 1 ? (key / 100 - 1) * 100 + 12 : key - 1;
}

DateKey next_month(DateKey key) {
    return key % 100 == 12 ? (key / 100 + 1) * 100 + 1 : key + 1;
}

Panel::Panel(std::vector<DateKey> dates) : dates_(std::move(dates)) {}

bool Panel::has(std::string_view label) const {
    return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

const std::vector<double>& Panel::column(std::string_view label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw DataError("panel has no series named '" + std::string(label) + "'");
    return columns_[static_cast<std::size_t>(it - labels_.begin())];
}

void Panel::add(std::string label, std::vector<double> values) {
    if (has(label)) throw DataError("duplicate panel series '" + label + "'");
    if (values.size() != dates_.size()) {
        throw DataError("series '" + label + "' has " + std::to_string(values.size()) + " values, panel has " +
                        std::to_string(dates_.size()) + " dates");
    }
    labels_.push_back(std::move(label));
    columns_.push_back(std::move(values));
}

Panel Panel::select_rows(std::span<const std::size_t> rows) const {
    std::vector<DateKey> dates;
    dates.reserve(rows.size());
    for (const auto r : rows) {
        if (r >= size()) throw DataError("row index " + std::to_string(r) + " out of range");
        dates.push_back(dates_[r]);
    }
    Panel out(std::move(dates));
    for (std::size_t c = 0; c < labels_.size(); ++c) {
        std::vector<double> values;
        values.reserve(rows.size());
        for (const auto r : rows) values.push_back(columns_[c][r]);
        out.add(labels_[c], std::move(values));
    }
    return out;
}

void Panel::require_finite() const {
    for (std::size_t c = 0; c < labels_.size(); ++c) {
        for (std::size_t t = 0; t < columns_[c].size(); ++t) {
            if (!std::isfinite(columns_[c][t])) {
                throw DataError("series '" + labels_[c] + "' has a non-finite value at " + std::to_string(dates_[t]));
            }
        }
    }
}

}  // namespace fflab
