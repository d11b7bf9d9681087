#include "fflab/report.hpp"

#include "fflab/errors.hpp"
#include "fflab/serialize.hpp"
#include "fflab/special.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

namespace fflab::report {

namespace {

std::string full_precision(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const std::vector<std::string>& parts, char sep = ',') {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::vector<std::string> split(std::string_view s, char sep = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_number(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw DataError("plot data: malformed number '" + s + "'");
    return v;
}

// Type-7 sample quantile of sorted data.
double sample_quantile(const std::vector<double>& sorted, double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    out.close();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

const char* to_string(PlotKind kind) {
    switch (kind) {
        case PlotKind::Qq: return "qq";
        case PlotKind::ResidualsVsFitted: return "residuals-vs-fitted";
        case PlotKind::ScaleLocation: return "scale-location";
        case PlotKind::ResidualsVsLeverage: return "residuals-vs-leverage";
        case PlotKind::CooksBar: return "cooks-bar";
        case PlotKind::ScatterMatrix: return "scatter-matrix";
        case PlotKind::Heatmap: return "heatmap";
    }
    return "qq";
}

PlotKind plot_kind_from_string(std::string_view s) {
    for (const auto k : {PlotKind::Qq, PlotKind::ResidualsVsFitted, PlotKind::ScaleLocation,
                         PlotKind::ResidualsVsLeverage, PlotKind::CooksBar, PlotKind::ScatterMatrix, PlotKind::Heatmap}) {
        if (s == to_string(k)) return k;
    }
    throw DataError("unknown plot kind '" + std::string(s) + "'");
}

std::vector<double> PointSet::field(std::string_view f) const {
    const auto it = std::find(fields.begin(), fields.end(), f);
    if (it == fields.end()) throw DataError("point set '" + name + "' has no field '" + std::string(f) + "'");
    const auto idx = static_cast<std::size_t>(it - fields.begin());
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r[idx]);
    return out;
}

const PointSet& PlotData::set(std::string_view name) const {
    for (const auto& s : sets) {
        if (s.name == name) return s;
    }
    throw DataError("plot '" + title + "' has no point set '" + std::string(name) + "'");
}

PlotData qq_plot_data(std::span<const double> residuals, std::string title) {
    const std::size_t n = residuals.size();
    if (n < 3) throw DataError("QQ data needs n >= 3");
    const auto stats = series::summary_stats(residuals);
    if (!(stats.sd > 0.0)) throw NumericalError("QQ data: zero-variance residuals");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return residuals[a] < residuals[b]; });

    std::vector<double> theoretical(n);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        theoretical[i] = special::normal_quantile(p);
        theoretical[n - 1 - i] = -theoretical[i];
    }
    if (n % 2 == 1) theoretical[n / 2] = 0.0;

    PlotData plot;
    plot.kind = PlotKind::Qq;
    plot.title = std::move(title);
    PointSet pts{"points", {"index", "theoretical", "sample"}, {}};
    std::vector<double> sorted(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = (residuals[order[i]] - stats.mean) / stats.sd;
        sorted[i] = z;
        pts.records.push_back({static_cast<double>(order[i]), theoretical[i], z});
    }
    plot.sets.push_back(std::move(pts));

    const double x1 = special::normal_quantile(0.25);
    const double x3 = -x1;
    const double y1 = sample_quantile(sorted, 0.25);
    const double y3 = sample_quantile(sorted, 0.75);
    const double slope = (y3 - y1) / (x3 - x1);
    plot.lines.push_back({"quartile", slope, y1 - slope * x1});
    return plot;
}

std::vector<PlotData> residual_diagnostic_data(const regress::OlsFit& fit, std::string title) {
    const auto std_resid = regress::standardized_residuals(fit);
    const auto cooks = regress::cooks_distance(fit);
    const std::size_t n = fit.n;
    const std::string prefix = title.empty() ? std::string() : title + ":";

    PlotData rvf;
    rvf.kind = PlotKind::ResidualsVsFitted;
    rvf.title = prefix + "residuals-vs-fitted";
    PointSet p1{"points", {"index", "fitted", "residual"}, {}};
    for (std::size_t t = 0; t < n; ++t) p1.records.push_back({static_cast<double>(t), fit.fitted[t], fit.residuals[t]});
    rvf.sets.push_back(std::move(p1));
    rvf.lines.push_back({"zero", 0.0, 0.0});

    PlotData sl;
    sl.kind = PlotKind::ScaleLocation;
    sl.title = prefix + "scale-location";
    PointSet p2{"points", {"index", "fitted", "sqrt_abs_std_residual"}, {}};
    for (std::size_t t = 0; t < n; ++t) {
        p2.records.push_back({static_cast<double>(t), fit.fitted[t], std::sqrt(std::fabs(std_resid[t]))});
    }
    sl.sets.push_back(std::move(p2));

    PlotData rvl;
    rvl.kind = PlotKind::ResidualsVsLeverage;
    rvl.title = prefix + "residuals-vs-leverage";
    PointSet p3{"points", {"index", "leverage", "std_residual"}, {}};
    double hmax = 0.0;
    double hmin = 1.0;
    for (std::size_t t = 0; t < n; ++t) {
        p3.records.push_back({static_cast<double>(t), fit.leverage[t], std_resid[t]});
        hmax = std::max(hmax, fit.leverage[t]);
        hmin = std::min(hmin, fit.leverage[t]);
    }
    rvl.sets.push_back(std::move(p3));
    rvl.lines.push_back({"zero", 0.0, 0.0});
    // D(h, r) = r^2 h / (p (1 - h)) = c  =>  r = +-sqrt(c p (1 - h) / h)
    const double p = static_cast<double>(fit.num_params());
    constexpr int kContourPoints = 50;
    const double h_lo = std::max(hmin, 1e-6);
    const double h_hi = std::min(std::max(hmax * 1.05, h_lo * 1.01), 1.0 - 1e-6);
    for (const double c : kCookContours) {
        PointSet upper{"cook-" + full_precision(c) + "-upper", {"leverage", "std_residual"}, {}};
        PointSet lower{"cook-" + full_precision(c) + "-lower", {"leverage", "std_residual"}, {}};
        for (int i = 0; i < kContourPoints; ++i) {
            const double h = h_lo + (h_hi - h_lo) * i / (kContourPoints - 1);
            const double r = std::sqrt(c * p * (1.0 - h) / h);
            upper.records.push_back({h, r});
            lower.records.push_back({h, -r});
        }
        rvl.sets.push_back(std::move(upper));
        rvl.sets.push_back(std::move(lower));
    }
    const auto flagged = regress::influential_points(cooks);
    rvl.flagged = flagged;

    PlotData cb;
    cb.kind = PlotKind::CooksBar;
    cb.title = prefix + "cooks-distance";
    PointSet p4{"points", {"index", "cooks_distance"}, {}};
    for (std::size_t t = 0; t < n; ++t) p4.records.push_back({static_cast<double>(t), cooks[t]});
    cb.sets.push_back(std::move(p4));
    cb.lines.push_back({"threshold-4/n", 0.0, 4.0 / static_cast<double>(n)});
    cb.flagged = flagged;

    return {rvf, sl, rvl, cb};
}

PlotData scatter_matrix_data(const Panel& panel, const std::vector<std::string>& labels, std::string title) {
    const auto& names = labels.empty() ? panel.labels() : labels;
    if (names.size() < 2) throw DataError("scatter matrix needs at least 2 series");
    PlotData plot;
    plot.kind = PlotKind::ScatterMatrix;
    plot.title = std::move(title);
    plot.labels = names;
    for (std::size_t i = 0; i < names.size(); ++i) {
        for (std::size_t j = i + 1; j < names.size(); ++j) {
            const auto& x = panel.column(names[i]);
            const auto& y = panel.column(names[j]);
            PointSet ps{"pair:" + names[i] + "|" + names[j], {"x", "y"}, {}};
            for (std::size_t t = 0; t < x.size(); ++t) ps.records.push_back({x[t], y[t]});
            plot.sets.push_back(std::move(ps));
        }
    }
    for (const auto& name : names) {
        const auto& v = panel.column(name);
        const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
        const double lo = *mn;
        const double width = (*mx - *mn) / kHistogramBins;
        std::vector<double> counts(kHistogramBins, 0.0);
        for (const double x : v) {
            int b = width > 0.0 ? static_cast<int>((x - lo) / width) : 0;
            b = std::clamp(b, 0, kHistogramBins - 1);
            counts[static_cast<std::size_t>(b)] += 1.0;
        }
        PointSet hs{"hist:" + name, {"lower", "upper", "count"}, {}};
        for (int b = 0; b < kHistogramBins; ++b) {
            const double upper = b == kHistogramBins - 1 ? *mx : lo + width * (b + 1);
            hs.records.push_back({lo + width * b, upper, counts[static_cast<std::size_t>(b)]});
        }
        plot.sets.push_back(std::move(hs));
    }
    return plot;
}

PlotData heatmap_data(const series::CorrelationMatrix& corr, std::string title) {
    PlotData plot;
    plot.kind = PlotKind::Heatmap;
    plot.title = std::move(title);
    plot.labels = corr.labels;
    PointSet cells{"cells", {"row", "col", "value"}, {}};
    for (std::size_t i = 0; i < corr.labels.size(); ++i) {
        for (std::size_t j = 0; j < corr.labels.size(); ++j) {
            cells.records.push_back({static_cast<double>(i), static_cast<double>(j), corr.entries[i][j]});
        }
    }
    plot.sets.push_back(std::move(cells));
    return plot;
}

std::string render_plot_csv(const PlotData& plot) {
    std::string out = "# kind: " + std::string(to_string(plot.kind)) + "\n";
    out += "# title: " + plot.title + "\n";
    if (!plot.labels.empty()) out += "# labels: " + join(plot.labels) + "\n";
    for (const auto& l : plot.lines) {
        out += "# line: " + l.label + "," + full_precision(l.slope) + "," + full_precision(l.intercept) + "\n";
    }
    if (!plot.flagged.empty()) {
        std::vector<std::string> f;
        for (const auto i : plot.flagged) f.push_back(std::to_string(i));
        out += "# flagged: " + join(f) + "\n";
    }
    for (const auto& s : plot.sets) {
        out += "# set: " + s.name + "\n";
        out += join(s.fields) + "\n";
        for (const auto& rec : s.records) {
            for (std::size_t i = 0; i < rec.size(); ++i) {
                if (i) out += ',';
                out += full_precision(rec[i]);
            }
            out += '\n';
        }
    }
    return out;
}

PlotData parse_plot_csv(std::string_view text) {
    PlotData plot;
    bool kind_seen = false;
    PointSet* current = nullptr;
    bool expect_fields = false;
    for (const auto& line : split(text, '\n')) {
        if (line.empty()) continue;
        if (line.rfind("# ", 0) == 0) {
            const auto colon = line.find(": ");
            if (colon == std::string::npos) throw DataError("plot data: malformed metadata line '" + line + "'");
            const auto key = line.substr(2, colon - 2);
            const auto value = line.substr(colon + 2);
            if (key == "kind") {
                plot.kind = plot_kind_from_string(value);
                kind_seen = true;
            } else if (key == "title") {
                plot.title = value;
            } else if (key == "labels") {
                plot.labels = split(value);
            } else if (key == "line") {
                const auto parts = split(value);
                if (parts.size() != 3) throw DataError("plot data: malformed reference line");
                plot.lines.push_back({parts[0], parse_number(parts[1]), parse_number(parts[2])});
            } else if (key == "flagged") {
                for (const auto& p : split(value)) plot.flagged.push_back(static_cast<std::size_t>(std::stoull(p)));
            } else if (key == "set") {
                plot.sets.push_back({value, {}, {}});
                current = &plot.sets.back();
                expect_fields = true;
            } else {
                throw DataError("plot data: unknown metadata key '" + key + "'");
            }
            continue;
        }
        if (current == nullptr) throw DataError("plot data: record outside a point set");
        if (expect_fields) {
            current->fields = split(line);
            expect_fields = false;
            continue;
        }
        std::vector<double> rec;
        for (const auto& cell : split(line)) rec.push_back(parse_number(cell));
        if (rec.size() != current->fields.size()) throw DataError("plot data: record width mismatch in '" + current->name + "'");
        current->records.push_back(std::move(rec));
    }
    if (!kind_seen) throw DataError("plot data: missing kind line");
    return plot;
}

ModelComparison compare_models(const regress::OlsFit& factor_fit, const regress::OlsFit& innovation_fit,
                               const std::map<std::string, stests::VifValue>& factor_vif,
                               const std::map<std::string, stests::VifValue>& innovation_vif) {
    const auto fr = factor_fit.regressors();
    const auto ir = innovation_fit.regressors();
    if (std::set<std::string>(fr.begin(), fr.end()) != std::set<std::string>(ir.begin(), ir.end()) ||
        factor_fit.intercept != innovation_fit.intercept) {
        throw DataError("compare_models: fits do not share the regressor label set");
    }
    ModelComparison c;
    c.terms = factor_fit.terms;
    for (const auto& term : c.terms) {
        c.factor_coefficients.push_back(factor_fit.coefficient(term));
        c.innovation_coefficients.push_back(innovation_fit.coefficient(term));
    }
    c.factor_r_squared = factor_fit.r_squared;
    c.innovation_r_squared = innovation_fit.r_squared;
    c.r_squared_delta = factor_fit.r_squared - innovation_fit.r_squared;
    const auto dw_f = stests::durbin_watson(factor_fit.residuals);
    const auto dw_i = stests::durbin_watson(innovation_fit.residuals);
    const auto jb_f = stests::jarque_bera(factor_fit.residuals, 0.01);
    const auto jb_i = stests::jarque_bera(innovation_fit.residuals, 0.01);
    c.durbin_watson = {dw_f.statistic, dw_i.statistic};
    c.jarque_bera = {jb_f.statistic, jb_i.statistic};
    c.jarque_bera_p = {*jb_f.p_value, *jb_i.p_value};
    for (const auto& [name, v] : factor_vif) {
        const auto it = innovation_vif.find(name);
        c.vif[name] = {v.value, it == innovation_vif.end() ? std::nan("") : it->second.value};
    }
    c.heavy_tail_advisory =
        jb_f.verdict == stests::Verdict::Reject || jb_i.verdict == stests::Verdict::Reject;
    return c;
}

std::string format_fixed(double value, int decimals) {
    if (std::isnan(value)) return "NaN";
    if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    std::string s = buf;
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

namespace {

std::string stats_table(const AnalysisReport& r) {
    std::string out;
    for (const auto& [label, _] : r.summary) out += "," + label;
    out += "\nMean";
    for (const auto& [_, s] : r.summary) out += "," + format_fixed(s.mean, 4);
    out += "\nStandard deviation";
    for (const auto& [_, s] : r.summary) out += "," + format_fixed(s.sd, 4);
    return out + "\n";
}

std::string correlation_table(const series::CorrelationMatrix& m) {
    std::string out;
    for (const auto& l : m.labels) out += "," + l;
    out += '\n';
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        out += m.labels[i];
        for (std::size_t j = 0; j < m.labels.size(); ++j) out += "," + format_fixed(m.entries[i][j], 3);
        out += '\n';
    }
    return out;
}

std::string coefficient_table(const regress::OlsFit& f, int decimals) {
    std::string out = "term,Coefficients,Standard Error,t Stat,P-value\n";
    for (std::size_t j = 0; j < f.terms.size(); ++j) {
        out += f.terms[j] + "," + format_fixed(f.coefficients[j], decimals) + "," +
               format_fixed(f.standard_errors[j], decimals) + "," + format_fixed(f.t_stats[j], 3) + "," +
               format_fixed(f.p_values[j], decimals) + "\n";
    }
    return out;
}

std::string statistics_table(const regress::OlsFit& f, int decimals) {
    return "Regression Statistics,Value\nMultiple R," + format_fixed(f.multiple_r, decimals) + "\nR Square," +
           format_fixed(f.r_squared, decimals) + "\nAdjusted R Square," + format_fixed(f.adj_r_squared, decimals) +
           "\nStandard Error," + format_fixed(f.residual_se, decimals) + "\n";
}

std::string plot_file_name(const std::string& section, const PlotData& p, std::size_t index) {
    return section + "-" + std::to_string(index) + "-" + to_string(p.kind) + ".csv";
}

}  // namespace

std::string table_csv(const AnalysisReport& report, int table) {
    switch (table) {
        case 1: return stats_table(report);
        case 2: return correlation_table(report.factor_correlations);
        case 3: return coefficient_table(report.factor_model.fit, 3);
        case 4: return statistics_table(report.factor_model.fit, 3);
        case 5: return correlation_table(report.innovation_correlations);
        case 6: return coefficient_table(report.innovation_model.fit, 4);
        case 7: return statistics_table(report.innovation_model.fit, 4);
        default: throw DataError("no table " + std::to_string(table));
    }
}

void render_tables(const AnalysisReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "plots", ec);
    if (ec) throw IoError("cannot create '" + (dir / "plots").string() + "': " + ec.message());
    for (int t = 1; t <= 7; ++t) write_file(dir / ("table" + std::to_string(t) + ".csv"), table_csv(report, t));
    write_file(dir / "report.json", serialize::to_json(report).dump(2) + "\n");
    const auto emit = [&](const std::string& section, const std::vector<PlotData>& plots) {
        for (std::size_t i = 0; i < plots.size(); ++i) {
            write_file(dir / "plots" / plot_file_name(section, plots[i], i), render_plot_csv(plots[i]));
        }
    };
    emit("panel", report.panel_plots);
    emit("factors", report.factor_model.plots);
    emit("innovations", report.innovation_model.plots);
}

}  // namespace fflab::report
