#include "fflab/ingest.hpp"

#include "fflab/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <set>
#include <sstream>

namespace fflab::ingest {

namespace {

std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '"'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_int(std::string_view s, long long& out) {
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool is_month_key_cell(std::string_view s, DateKey& key) {
    long long v = 0;
    if (s.size() != 6 || !parse_int(s, v) || !is_valid_month_key(v)) return false;
    key = static_cast<DateKey>(v);
    return true;
}

std::string read_all(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("failed reading input stream");
    return ss.str();
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto pos = text.find('\n', start);
        if (pos == std::string_view::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    return lines;
}

struct DayKey {
    DateKey month;
    int day;  // 0 when the source gave only a month
};

bool parse_date_cell(std::string_view s, DayKey& out) {
    DateKey month = 0;
    if (is_month_key_cell(s, month)) {
        out = {month, 0};
        return true;
    }
    // YYYY-MM[-DD[...]] or YYYY/MM[/DD]
    if (s.size() < 7 || (s[4] != '-' && s[4] != '/')) return false;
    long long year = 0;
    long long mon = 0;
    long long day = 0;
    if (!parse_int(s.substr(0, 4), year) || !parse_int(s.substr(5, 2), mon)) return false;
    if (s.size() > 7) {
        if (s.size() < 10 || s[7] != s[4] || !parse_int(s.substr(8, 2), day)) return false;
        if (day < 1 || day > 31) return false;
        if (s.size() > 10 && s[10] != 'T' && s[10] != ' ') return false;
    }
    const long long key = year * 100 + mon;
    if (!is_valid_month_key(key)) return false;
    out = {static_cast<DateKey>(key), static_cast<int>(day)};
    return true;
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Shared reader for "date,value" files, month-end retention.
RawTable parse_dated_csv(std::string_view text, const std::string& value_name, bool require_positive) {
    struct Obs {
        int day;
        std::size_t order;
        double value;
    };
    std::map<DateKey, Obs> by_month;
    std::size_t value_col = 1;
    bool header_seen = false;
    std::size_t line_no = 0;
    std::size_t order = 0;
    for (const auto raw : split_lines(text)) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto cells = split_csv(line);
        DayKey date{};
        if (!parse_date_cell(cells[0], date)) {
            if (!header_seen && by_month.empty()) {
                header_seen = true;
                for (std::size_t c = 1; c < cells.size(); ++c) {
                    const auto name = lowercase(cells[c]);
                    if (name == value_name || name == "adj close" || name == "adj_close") {
                        value_col = c;
                        if (name == value_name) break;
                    }
                }
                continue;
            }
            throw DataError("unparsable date '" + std::string(cells[0]) + "' at line " + std::to_string(line_no));
        }
        if (cells.size() <= value_col) {
            throw DataError("missing " + value_name + " at line " + std::to_string(line_no));
        }
        double value = 0.0;
        if (!parse_double(cells[value_col], value)) {
            throw DataError("malformed numeric cell at line " + std::to_string(line_no) + ", column " +
                            std::to_string(value_col + 1) + " ('" + std::string(cells[value_col]) + "')");
        }
        if (require_positive && value <= 0.0) {
            throw DataError("non-positive " + value_name + " at line " + std::to_string(line_no));
        }
        const Obs obs{date.day, order++, value};
        auto [it, inserted] = by_month.try_emplace(date.month, obs);
        if (!inserted && (obs.day > it->second.day || (obs.day == it->second.day && obs.order > it->second.order))) {
            it->second = obs;
        }
    }
    if (by_month.empty()) throw DataError("no monthly rows found");
    RawTable table;
    table.columns = {value_name};
    for (const auto& [month, obs] : by_month) {
        table.dates.push_back(month);
        table.rows.push_back({obs.value});
    }
    return table;
}

}  // namespace

std::vector<double> RawTable::column(std::string_view name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw DataError("column '" + std::string(name) + "' not found");
    const auto idx = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(row[idx]);
    return out;
}

void RawTable::validate() const {
    if (dates.size() != rows.size()) throw DataError("table has mismatched date and row counts");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != columns.size()) {
            throw DataError("row " + std::to_string(dates[i]) + " has " + std::to_string(rows[i].size()) +
                            " values for " + std::to_string(columns.size()) + " columns");
        }
        if (i > 0 && dates[i] <= dates[i - 1]) {
            throw DataError(dates[i] == dates[i - 1] ? "duplicate date-key " + std::to_string(dates[i])
                                                      : "date-keys not increasing at " + std::to_string(dates[i]));
        }
    }
}

RawTable parse_factor_csv_text(std::string_view text, double scale) {
    if (!(scale > 0.0)) throw DataError("factor scale must be positive");
    RawTable table;
    bool in_monthly = false;
    std::size_t line_no = 0;
    for (const auto raw : split_lines(text)) {
        ++line_no;
        const auto line = trim(raw);
        if (!in_monthly) {
            if (line.empty()) continue;
            const auto cells = split_csv(line);
            DateKey key = 0;
            if (!is_month_key_cell(cells[0], key)) {
                // Header candidate: at least one label after the key column. Later candidates win.
                if (cells.size() >= 2) {
                    table.columns.assign(cells.begin() + 1, cells.end());
                }
                continue;
            }
            in_monthly = true;
            if (table.columns.empty() || table.columns.size() != cells.size() - 1) {
                table.columns.clear();
                for (std::size_t c = 1; c < cells.size(); ++c) table.columns.push_back("V" + std::to_string(c));
            }
        }
        if (line.empty()) break;
        const auto cells = split_csv(line);
        DateKey key = 0;
        if (!is_month_key_cell(cells[0], key)) break;
        if (cells.size() - 1 != table.columns.size()) {
            throw DataError("row at line " + std::to_string(line_no) + " has " + std::to_string(cells.size() - 1) +
                            " values, expected " + std::to_string(table.columns.size()));
        }
        std::vector<double> values(table.columns.size());
        for (std::size_t c = 1; c < cells.size(); ++c) {
            if (!parse_double(cells[c], values[c - 1])) {
                throw DataError("malformed numeric cell at line " + std::to_string(line_no) + ", column " +
                                std::to_string(c + 1) + " ('" + std::string(cells[c]) + "')");
            }
            values[c - 1] /= scale;
        }
        if (!table.dates.empty() && key == table.dates.back()) {
            throw DataError("duplicate date-key " + std::to_string(key) + " at line " + std::to_string(line_no));
        }
        table.dates.push_back(key);
        table.rows.push_back(std::move(values));
    }
    if (table.dates.empty()) throw DataError("no monthly rows found");
    {
        std::set<DateKey> seen;
        for (const auto d : table.dates) {
            if (!seen.insert(d).second) throw DataError("duplicate date-key " + std::to_string(d));
        }
    }
    table.validate();
    return table;
}

RawTable parse_factor_csv(std::istream& in, double scale) { return parse_factor_csv_text(read_all(in), scale); }

RawTable parse_price_csv_text(std::string_view text) { return parse_dated_csv(text, "price", true); }
RawTable parse_price_csv(std::istream& in) { return parse_price_csv_text(read_all(in)); }
RawTable parse_yield_csv_text(std::string_view text) { return parse_dated_csv(text, "yield", false); }
RawTable parse_yield_csv(std::istream& in) { return parse_yield_csv_text(read_all(in)); }

std::string to_csv(const RawTable& table) {
    std::string out;
    for (const auto& c : table.columns) out += "," + c;
    out += '\n';
    char buf[64];
    for (std::size_t i = 0; i < table.size(); ++i) {
        out += std::to_string(table.dates[i]);
        for (const double v : table.rows[i]) {
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

std::vector<RawTable> align_monthly(const std::vector<RawTable>& tables, std::pair<DateKey, DateKey> window) {
    if (tables.empty()) throw DataError("align_monthly needs at least one table");
    std::vector<DateKey> common;
    for (const auto d : tables.front().dates) {
        if (d >= window.first && d <= window.second) common.push_back(d);
    }
    for (std::size_t i = 1; i < tables.size(); ++i) {
        std::vector<DateKey> next;
        std::set_intersection(common.begin(), common.end(), tables[i].dates.begin(), tables[i].dates.end(),
                              std::back_inserter(next));
        common = std::move(next);
    }
    if (common.empty()) throw DataError("empty intersection");
    std::vector<RawTable> out;
    out.reserve(tables.size());
    for (const auto& t : tables) {
        t.validate();
        RawTable clipped;
        clipped.columns = t.columns;
        std::size_t j = 0;
        for (const auto d : common) {
            while (t.dates[j] != d) ++j;
            clipped.dates.push_back(d);
            clipped.rows.push_back(t.rows[j]);
        }
        out.push_back(std::move(clipped));
    }
    return out;
}

Panel build_panel(const RawTable& prices, const RawTable& riskfree, const RawTable& factors,
                  const DatasetConfig& config) {
    config.validate();
    if (riskfree.dates != factors.dates) throw DataError("risk-free and factor tables are not aligned");
    if (prices.columns.empty() || riskfree.columns.empty()) throw DataError("price or yield table has no columns");

    const std::size_t n_prices = prices.size();
    const std::size_t n_grid = factors.size();
    std::size_t grid_offset = 0;
    if (n_prices == n_grid + 1) {
        if (!std::equal(factors.dates.begin(), factors.dates.end(), prices.dates.begin() + 1)) {
            throw DataError("price dates do not match the factor grid");
        }
    } else if (n_prices == n_grid) {
        if (prices.dates != factors.dates) throw DataError("price dates do not match the factor grid");
        grid_offset = 1;
    } else {
        throw DataError("length mismatch after return transform: " + std::to_string(n_prices) + " prices for " +
                        std::to_string(n_grid) + " factor months");
    }
    if (n_prices < 2) throw DataError("length mismatch after return transform: fewer than 2 prices");

    std::vector<DateKey> dates(factors.dates.begin() + static_cast<std::ptrdiff_t>(grid_offset), factors.dates.end());
    std::vector<double> exr;
    exr.reserve(dates.size());
    for (std::size_t t = 1; t < n_prices; ++t) {
        const double s0 = prices.rows[t - 1][0];
        const double s1 = prices.rows[t][0];
        if (s0 <= 0.0 || s1 <= 0.0) throw DataError("non-positive price at " + std::to_string(prices.dates[t]));
        const std::size_t g = t - 1 + grid_offset;
        exr.push_back(std::log(s1 / s0) - riskfree.rows[g][0] / config.rf_divisor);
    }

    Panel panel(std::move(dates));
    panel.add("EXR", std::move(exr));
    for (const auto& f : config.factors) {
        if (std::find(factors.columns.begin(), factors.columns.end(), f.source) == factors.columns.end()) {
            throw DataError("requested factor column '" + f.source + "' absent from factor file");
        }
        auto values = factors.column(f.source);
        values.erase(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(grid_offset));
        panel.add(f.label, std::move(values));
    }
    panel.require_finite();
    return panel;
}

// ---------------------------------------------------------------------------
// DatasetConfig

void DatasetConfig::validate() const {
    if (!is_valid_month_key(start) || !is_valid_month_key(end)) throw DataError("sample window must be YYYYMM keys");
    if (start > end) throw DataError("sample start after end");
    if (!(factor_scale > 0.0)) throw DataError("factor_scale must be positive");
    if (!(rf_divisor > 0.0)) throw DataError("rf_divisor must be positive");
    if (factors.empty()) throw DataError("factor list is empty");
    std::set<std::string> labels;
    for (const auto& f : factors) {
        if (f.label.empty() || f.source.empty()) throw DataError("empty factor name");
        if (f.label == "EXR") throw DataError("factor label 'EXR' is reserved");
        if (!labels.insert(f.label).second) throw DataError("duplicate factor '" + f.label + "'");
    }
}

std::vector<std::string> DatasetConfig::factor_labels() const {
    std::vector<std::string> out;
    for (const auto& f : factors) out.push_back(f.label);
    return out;
}

DatasetConfig DatasetConfig::parse(std::string_view text) {
    DatasetConfig cfg;
    std::size_t line_no = 0;
    const auto as_key = [&](std::string_view v) {
        long long key = 0;
        if (!parse_int(v, key) || !is_valid_month_key(key)) {
            throw DataError("config line " + std::to_string(line_no) + ": expected YYYYMM, got '" + std::string(v) + "'");
        }
        return static_cast<DateKey>(key);
    };
    const auto as_number = [&](std::string_view v) {
        double x = 0.0;
        if (!parse_double(v, x)) {
            throw DataError("config line " + std::to_string(line_no) + ": expected a number, got '" + std::string(v) + "'");
        }
        return x;
    };
    for (auto line : split_lines(text)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw DataError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key == "start") {
            cfg.start = as_key(value);
        } else if (key == "end") {
            cfg.end = as_key(value);
        } else if (key == "factors") {
            cfg.factors.clear();
            for (const auto cell : split_csv(value)) {
                if (cell.empty()) continue;
                const auto colon = cell.find(':');
                if (colon == std::string_view::npos) {
                    cfg.factors.push_back({std::string(cell), std::string(cell)});
                } else {
                    cfg.factors.push_back({std::string(trim(cell.substr(0, colon))), std::string(trim(cell.substr(colon + 1)))});
                }
            }
        } else if (key == "factor_scale") {
            cfg.factor_scale = as_number(value);
        } else if (key == "rf_divisor") {
            cfg.rf_divisor = as_number(value);
        } else if (key == "asset") {
            cfg.asset = std::string(value);
        } else if (key == "factor_file") {
            cfg.factor_file = std::string(value);
        } else if (key == "price_file") {
            cfg.price_file = std::string(value);
        } else if (key == "yield_file") {
            cfg.yield_file = std::string(value);
        } else {
            throw DataError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
        }
    }
    cfg.validate();
    return cfg;
}

std::string DatasetConfig::to_text() const {
    std::ostringstream out;
    out.precision(17);
    out << "start = " << start << "\nend = " << end << "\nfactors = ";
    for (std::size_t i = 0; i < factors.size(); ++i) {
        if (i) out << ", ";
        out << factors[i].source;
        if (factors[i].label != factors[i].source) out << ':' << factors[i].label;
    }
    out << "\nfactor_scale = " << factor_scale << "\nrf_divisor = " << rf_divisor << "\nasset = " << asset << '\n';
    if (!factor_file.empty()) out << "factor_file = " << factor_file << '\n';
    if (!price_file.empty()) out << "price_file = " << price_file << '\n';
    if (!yield_file.empty()) out << "yield_file = " << yield_file << '\n';
    return out.str();
}

}  // namespace fflab::ingest
