#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fflab/errors.hpp"
#include "fflab/report.hpp"
#include "fflab/serialize.hpp"
#include "fflab/special.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace fflab;
using namespace fflab::report;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = z(rng);
    return v;
}

Panel factor_panel(std::size_t n, std::uint64_t seed) {
    std::vector<DateKey> dates;
    DateKey d = 199001;
    for (std::size_t t = 0; t < n; ++t, d = next_month(d)) dates.push_back(d);
    Panel p(dates);
    const auto mrp = normals(n, seed, 0.04);
    const auto smb = normals(n, seed + 1, 0.03);
    const auto hml = normals(n, seed + 2, 0.03);
    const auto e = normals(n, seed + 3, 0.02);
    std::vector<double> y(n);
    for (std::size_t t = 0; t < n; ++t) y[t] = 0.002 + 1.1 * mrp[t] - 0.3 * smb[t] - 0.4 * hml[t] + e[t];
    p.add("EXR", y);
    p.add("MRP", mrp);
    p.add("SMB", smb);
    p.add("HML", hml);
    return p;
}

ModelSection section(const Panel& p, const std::string& name) {
    ModelSection m;
    m.name = name;
    m.spec = {"EXR", {"MRP", "SMB", "HML"}, true};
    m.fit = regress::ols_fit(p, m.spec);
    m.cooks = regress::cooks_distance(m.fit);
    m.influential = regress::influential_points(m.cooks);
    m.durbin_watson = stests::durbin_watson(m.fit.residuals);
    m.jarque_bera = stests::jarque_bera(m.fit.residuals);
    m.vif = stests::vif(p, m.spec.regressors);
    m.backward = regress::backward_eliminate(p, m.spec, m.backward_alpha_out);
    m.exclusion = ExclusionResult{{0, 1, 2}, regress::exclude_and_refit(p, m.spec, {0, 1, 2})};
    m.plots.push_back(qq_plot_data(regress::standardized_residuals(m.fit), name + ":qq"));
    for (auto& pd : residual_diagnostic_data(m.fit, name)) m.plots.push_back(std::move(pd));
    return m;
}

AnalysisReport small_report() {
    const auto p = factor_panel(120, 5);
    AnalysisReport r;
    r.meta = {"SYNTH", p.dates().front(), p.dates().back(), p.size(), p.labels(), {"MRP", "SMB", "HML"}, 7};
    std::vector<series::ReturnSeries> cols;
    for (const auto& l : p.labels()) {
        cols.emplace_back(l, p.column(l));
        r.summary.emplace_back(l, series::summary_stats(cols.back()));
    }
    r.factor_correlations = series::correlation_matrix(cols);
    r.innovation_correlations = r.factor_correlations;
    tsmodel::ArmaGarchParams g{0.001, 0.1, -0.05, 1e-5, 0.1, 0.8};
    r.garch.push_back({"MRP", g, std::array<double, 6>{1e-3, 0.05, 0.05, 1e-6, 0.02, 0.03}, 250.5, true, 321, "ok", 0.01, 0.99});
    r.factor_model = section(p, "factors");
    r.innovation_model = section(p, "innovations");
    r.adf.push_back(stests::adf_test(cols[0]));
    r.ljung_box.push_back(stests::ljung_box(cols[0].values, 12));
    r.engle_granger.push_back(stests::engle_granger(cols[0], cols[1]));
    r.comparison = compare_models(r.factor_model.fit, r.innovation_model.fit, r.factor_model.vif, r.innovation_model.vif);
    r.panel_plots.push_back(scatter_matrix_data(p));
    r.panel_plots.push_back(heatmap_data(r.factor_correlations));
    return r;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("fflab_report_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("QQ data for n = 3") {
    const auto q = qq_plot_data(std::vector<double>{2.0, -1.0, 0.5});
    const auto th = q.set("points").field("theoretical");
    REQUIRE(th.size() == 3);
    CHECK(th[0] == doctest::Approx(-0.9674).epsilon(1e-4));
    CHECK(th[1] == 0.0);
    CHECK(th[2] == doctest::Approx(0.9674).epsilon(1e-4));
    CHECK(th[0] == doctest::Approx(special::normal_quantile(1.0 / 6.0)).epsilon(1e-12));
    CHECK(q.set("points").field("index") == std::vector<double>{1, 2, 0});
    CHECK(q.kind == PlotKind::Qq);
}

TEST_CASE("QQ data: symmetric input, antisymmetric quantiles, errors") {
    const auto q = qq_plot_data(std::vector<double>{-3.0, 0.0, 3.0});
    const auto s = q.set("points").field("sample");
    CHECK(s[0] == -s[2]);
    CHECK(s[1] == 0.0);
    for (const std::size_t n : {4u, 7u, 100u, 501u}) {
        const auto th = qq_plot_data(normals(n, n)).set("points").field("theoretical");
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(th[i] + th[n - 1 - i]) <= 1e-12);
            if (i > 0) CHECK(th[i] > th[i - 1]);
        }
    }
    CHECK_THROWS_AS(qq_plot_data(std::vector<double>{1.0, 2.0}), DataError);
    CHECK_THROWS_AS(qq_plot_data(std::vector<double>{1.0, 1.0, 1.0}), NumericalError);
}

TEST_CASE("QQ data: Gaussian sample hugs the reference line, heavy tails leave it") {
    auto max_dev = [](const PlotData& q, bool tails_only) {
        const auto th = q.set("points").field("theoretical");
        const auto s = q.set("points").field("sample");
        const auto& line = q.lines.at(0);
        double m = 0;
        for (std::size_t i = 0; i < th.size(); ++i) {
            if (tails_only && i >= 5 && i + 5 < th.size()) continue;
            m = std::max(m, std::abs(s[i] - (line.intercept + line.slope * th[i])));
        }
        return m;
    };
    const auto gauss = qq_plot_data(normals(1000, 21));
    std::mt19937_64 rng(22);
    std::student_t_distribution<double> t2(2.0);
    std::vector<double> heavy(1000);
    for (auto& x : heavy) x = t2(rng);
    const auto ht = qq_plot_data(heavy);
    MESSAGE("Gaussian max deviation " << max_dev(gauss, false) << ", t(2) tail deviation " << max_dev(ht, true));
    CHECK(max_dev(gauss, false) < 0.5);
    CHECK(max_dev(ht, true) > 2.0);
    // Lower tail below the line, upper tail above it.
    const auto th = ht.set("points").field("theoretical");
    const auto s = ht.set("points").field("sample");
    const auto& line = ht.lines.at(0);
    CHECK(s.front() < line.intercept + line.slope * th.front());
    CHECK(s.back() > line.intercept + line.slope * th.back());
}

TEST_CASE("residual diagnostics: perfect fit, contours, flags, shared n") {
    std::vector<double> x(10), y(10);
    for (int i = 0; i < 10; ++i) {
        x[i] = i * 0.5;
        y[i] = 3.0 - x[i];
    }
    const auto perfect = residual_diagnostic_data(regress::ols_fit(y, {x}, {"x"}, true));
    for (const double e : perfect[0].set("points").field("residual")) CHECK(std::abs(e) < 1e-12);

    const auto p = factor_panel(80, 30);
    const auto fit = regress::ols_fit(p, {"EXR", {"MRP", "SMB", "HML"}, true});
    const auto plots = residual_diagnostic_data(fit, "m");
    REQUIRE(plots.size() == 4);
    CHECK(plots[0].kind == PlotKind::ResidualsVsFitted);
    CHECK(plots[1].kind == PlotKind::ScaleLocation);
    CHECK(plots[2].kind == PlotKind::ResidualsVsLeverage);
    CHECK(plots[3].kind == PlotKind::CooksBar);
    for (const auto& pd : plots) CHECK(pd.set("points").records.size() == fit.n);

    for (const double c : kCookContours) {
        for (const std::string side : {"upper", "lower"}) {
            std::ostringstream name;
            name << "cook-" << c << "-" << side;
            const auto& set = plots[2].set(name.str());
            const auto h = set.field("leverage");
            const auto r = set.field("std_residual");
            for (std::size_t i = 0; i < h.size(); ++i) {
                CHECK(r[i] * r[i] * h[i] / (4.0 * (1.0 - h[i])) == doctest::Approx(c).epsilon(1e-12));
            }
        }
    }

    const auto d = regress::cooks_distance(fit);
    std::vector<std::size_t> expect;
    for (std::size_t t = 0; t < d.size(); ++t) {
        if (d[t] > 4.0 / static_cast<double>(d.size())) expect.push_back(t);
    }
    CHECK(plots[3].flagged == expect);
    CHECK(plots[2].flagged == expect);
    CHECK(plots[3].set("points").field("cooks_distance") == d);
}

TEST_CASE("scatter matrix and heatmap") {
    const auto p = factor_panel(60, 40);
    const auto sm = scatter_matrix_data(p);
    std::size_t pairs = 0, hists = 0;
    for (const auto& s : sm.sets) {
        if (s.name.rfind("pair:", 0) == 0) {
            ++pairs;
            CHECK(s.records.size() == 60);
        }
        if (s.name.rfind("hist:", 0) == 0) {
            ++hists;
            CHECK(s.records.size() == static_cast<std::size_t>(kHistogramBins));
            double total = 0;
            for (const double c : s.field("count")) total += c;
            CHECK(total == 60.0);
        }
    }
    CHECK(pairs == 4 * 3 / 2);
    CHECK(hists == 4);
    CHECK(scatter_matrix_data(p, {"MRP", "HML"}).sets.size() == 1 + 2);
    CHECK_THROWS_AS(scatter_matrix_data(p, {"MRP"}), DataError);

    std::vector<series::ReturnSeries> cols;
    for (const auto& l : p.labels()) cols.emplace_back(l, p.column(l));
    const auto corr = series::correlation_matrix(cols);
    const auto hm = heatmap_data(corr);
    const auto& cells = hm.set("cells");
    CHECK(cells.records.size() == 16);
    for (const auto& rec : cells.records) {
        CHECK(rec[2] == corr.at(static_cast<std::size_t>(rec[0]), static_cast<std::size_t>(rec[1])));
    }
}

TEST_CASE("plot data round-trips through CSV") {
    const auto r = small_report();
    std::vector<PlotData> all = r.panel_plots;
    for (const auto& pd : r.factor_model.plots) all.push_back(pd);
    for (const auto& pd : all) {
        const auto text = render_plot_csv(pd);
        CHECK(text.rfind("# kind: " + std::string(to_string(pd.kind)) + "\n", 0) == 0);
        CHECK(parse_plot_csv(text) == pd);
        CHECK(serialize::plot_from_json(serialize::to_json(pd)) == pd);
    }
    for (const auto k : {PlotKind::Qq, PlotKind::ResidualsVsFitted, PlotKind::ScaleLocation, PlotKind::ResidualsVsLeverage,
                         PlotKind::CooksBar, PlotKind::ScatterMatrix, PlotKind::Heatmap}) {
        CHECK(plot_kind_from_string(to_string(k)) == k);
    }
}

TEST_CASE("fixed-point formatting follows the table rounding") {
    CHECK(format_fixed(0.50432, 3) == "0.504");
    CHECK(format_fixed(0.50432, 4) == "0.5043");
    CHECK(format_fixed(-0.0001, 3) == "0.000");
    CHECK(format_fixed(-2.5274, 3) == "-2.527");
}

TEST_CASE("tables carry the expected headers and rounding") {
    auto r = small_report();
    r.factor_model.fit.coefficients[1] = 0.50432;
    r.innovation_model.fit.coefficients[1] = 0.50432;
    const auto t3 = table_csv(r, 3);
    const auto t6 = table_csv(r, 6);
    CHECK(t3.rfind("term,Coefficients,Standard Error,t Stat,P-value\n", 0) == 0);
    CHECK(t6.rfind("term,Coefficients,Standard Error,t Stat,P-value\n", 0) == 0);
    CHECK(t3.find("\nMRP,0.504,") != std::string::npos);
    CHECK(t6.find("\nMRP,0.5043,") != std::string::npos);
    CHECK(table_csv(r, 4).find("R Square,") != std::string::npos);
    CHECK(table_csv(r, 7).find("Adjusted R Square,") != std::string::npos);
    CHECK(table_csv(r, 1).rfind(",EXR,MRP,SMB,HML\nMean,", 0) == 0);
    CHECK(table_csv(r, 2).find("\nMRP,") != std::string::npos);
    CHECK_THROWS_AS(table_csv(r, 8), DataError);

    // No cell carries more digits than its table allows.
    for (int t = 1; t <= 7; ++t) {
        const int max_decimals = (t == 1 || t >= 5) ? 4 : 3;
        std::istringstream lines(table_csv(r, t));
        std::string line;
        std::getline(lines, line);
        while (std::getline(lines, line)) {
            std::istringstream cells(line);
            std::string cell;
            std::getline(cells, cell, ',');
            while (std::getline(cells, cell, ',')) {
                const auto dot = cell.find('.');
                REQUIRE(dot != std::string::npos);
                CHECK(static_cast<int>(cell.size() - dot - 1) <= max_decimals);
            }
        }
    }
}

TEST_CASE("render writes the table set, report.json and plots deterministically") {
    const auto r = small_report();
    const auto a = scratch("a");
    const auto b = scratch("b");
    render_tables(r, a);
    render_tables(r, b);
    for (int t = 1; t <= 7; ++t) {
        const auto name = "table" + std::to_string(t) + ".csv";
        CHECK(slurp(a / name) == table_csv(r, t));
        CHECK(slurp(a / name) == slurp(b / name));
    }
    CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
    std::size_t plots = 0;
    for (const auto& e : std::filesystem::directory_iterator(a / "plots")) {
        ++plots;
        CHECK(slurp(e.path()) == slurp(b / "plots" / e.path().filename()));
    }
    CHECK(plots == r.panel_plots.size() + r.factor_model.plots.size() + r.innovation_model.plots.size());

    const auto j = nlohmann::json::parse(slurp(a / "report.json"));
    for (const char* key : {"meta", "summaryStats", "correlations", "garchFits", "factorModel", "innovationModel", "tests",
                            "backward", "plots"}) {
        CHECK(j.contains(key));
    }
    CHECK(serialize::to_json(serialize::report_from_json(j)) == j);
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
}

TEST_CASE("render failures surface with the path") {
    const auto dir = scratch("blocked");
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "plots") << "a file where a directory should be";
    CHECK_THROWS_WITH_AS(render_tables(small_report(), dir), doctest::Contains("plots"), IoError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("compare models") {
    const auto p = factor_panel(150, 50);
    const regress::DesignSpec spec{"EXR", {"MRP", "SMB", "HML"}, true};
    const auto f = regress::ols_fit(p, spec);
    const auto same = compare_models(f, f);
    CHECK(same.r_squared_delta == 0.0);
    CHECK(same.factor_coefficients == same.innovation_coefficients);
    CHECK(same.durbin_watson.first == same.durbin_watson.second);
    CHECK(same.terms == f.terms);
    // Residuals here are Gaussian, so JB should not reject at 1%.
    CHECK(same.jarque_bera_p.first > 0.01);
    CHECK_FALSE(same.heavy_tail_advisory);

    Panel q = p;
    std::mt19937_64 rng(51);
    std::student_t_distribution<double> t2(2.0);
    std::vector<double> heavy = p.column("EXR");
    for (auto& v : heavy) v += 0.02 * t2(rng);
    q.add("EXRH", heavy);
    const auto g = regress::ols_fit(q, {"EXRH", {"MRP", "SMB", "HML"}, true});
    const auto c = compare_models(f, g);
    CHECK(c.heavy_tail_advisory);
    CHECK(c.r_squared_delta == doctest::Approx(f.r_squared - g.r_squared));

    const auto two = regress::ols_fit(p, {"EXR", {"MRP", "HML"}, true});
    CHECK_THROWS_AS(compare_models(f, two), DataError);
}
