#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fflab/errors.hpp"
#include "fflab/stests.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <numeric>
#include <random>

using namespace fflab;
using namespace fflab::stests;
using fflab::series::ReturnSeries;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::vector<double> v(n);
    for (auto& x : v) x = z(rng);
    return v;
}

std::vector<double> ar1(std::size_t n, double phi, std::uint64_t seed) {
    auto e = normals(n + 100, seed);
    std::vector<double> out;
    double y = 0;
    for (std::size_t t = 0; t < e.size(); ++t) {
        y = phi * y + e[t];
        if (t >= 100) out.push_back(y);
    }
    return out;
}

std::vector<double> random_walk(std::size_t n, std::uint64_t seed) {
    auto e = normals(n, seed);
    std::partial_sum(e.begin(), e.end(), e.begin());
    return e;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

// Ljung-Box Q written directly from its definition.
double ljung_box_oracle(const std::vector<double>& x, int m) {
    const double n = x.size();
    const double mu = mean(x);
    double c0 = 0;
    for (const double v : x) c0 += (v - mu) * (v - mu);
    double q = 0;
    for (int k = 1; k <= m; ++k) {
        double ck = 0;
        for (std::size_t t = k; t < x.size(); ++t) ck += (x[t] - mu) * (x[t - k] - mu);
        const double rho = ck / c0;
        q += rho * rho / (n - k);
    }
    return n * (n + 2) * q;
}

double jarque_bera_oracle(const std::vector<double>& x) {
    const double n = x.size();
    const double mu = mean(x);
    double m2 = 0, m3 = 0, m4 = 0;
    for (const double v : x) {
        const double d = v - mu;
        m2 += d * d / n;
        m3 += d * d * d / n;
        m4 += d * d * d * d / n;
    }
    const double s = m3 / std::pow(m2, 1.5);
    const double k = m4 / (m2 * m2);
    return n / 6.0 * (s * s + (k - 3) * (k - 3) / 4.0);
}

// R^2 of y on (1, x) for a single regressor, closed form.
double simple_r2(const std::vector<double>& y, const std::vector<double>& x) {
    const double my = mean(y), mx = mean(x);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy * sxy / (sxx * syy);
}

Panel panel_of(const std::vector<std::pair<std::string, std::vector<double>>>& cols) {
    std::vector<DateKey> dates;
    DateKey d = 200001;
    for (std::size_t t = 0; t < cols.front().second.size(); ++t, d = next_month(d)) dates.push_back(d);
    Panel p(dates);
    for (const auto& [name, v] : cols) p.add(name, v);
    return p;
}

}  // namespace

TEST_CASE("Durbin-Watson hand values and range") {
    CHECK(durbin_watson(std::vector<double>{1, -1, 1, -1}).statistic == doctest::Approx(3.0));
    CHECK(durbin_watson(std::vector<double>{1, 1, 1, 1}).statistic == 0.0);
    const auto r = durbin_watson(normals(300, 1));
    CHECK_FALSE(r.p_value.has_value());
    CHECK(r.verdict == Verdict::FailToReject);
    CHECK(durbin_watson(std::vector<double>{1, 1, 1, 1}).verdict == Verdict::Reject);
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto e = normals(20, 100 + s);
        const double d = durbin_watson(e).statistic;
        CHECK(d >= 0.0);
        CHECK(d <= 4.0);
        double num = 0, den = 0;
        for (std::size_t t = 0; t < e.size(); ++t) {
            den += e[t] * e[t];
            if (t > 0) num += (e[t] - e[t - 1]) * (e[t] - e[t - 1]);
        }
        CHECK(std::abs(d - num / den) < 1e-10);
    }
    CHECK_THROWS_AS(durbin_watson(std::vector<double>{0, 0, 0}), NumericalError);
    CHECK_THROWS_AS(durbin_watson(std::vector<double>{1}), DataError);
}

TEST_CASE("Jarque-Bera: formula oracle, identity, affine invariance") {
    const auto x = normals(400, 2);
    const auto r = jarque_bera(x);
    CHECK(std::abs(r.statistic - jarque_bera_oracle(x)) < 1e-10);
    CHECK(*r.p_value == doctest::Approx(boost::math::cdf(boost::math::complement(boost::math::chi_squared(2), r.statistic))).epsilon(1e-10));

    // Zero with weight 2/3 and +-1 with weight 1/6 each: S = 0 and m4 / m2^2 = (1/3) / (1/9) = 3 exactly.
    const std::vector<double> sym = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, -1, -1};
    const auto rs = jarque_bera(sym);
    CHECK(rs.aux.at("skewness") == 0.0);
    CHECK(rs.aux.at("kurtosis") == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(std::abs(rs.statistic) < 1e-14);
    CHECK(*rs.p_value == doctest::Approx(1.0));

    auto y = x;
    for (auto& v : y) v = -3.0 * v + 11.0;
    CHECK(jarque_bera(y).statistic == doctest::Approx(r.statistic).epsilon(1e-9));

    CHECK_THROWS_AS(jarque_bera(std::vector<double>(10, 1.0)), NumericalError);
    CHECK_THROWS_AS(jarque_bera(std::vector<double>{1, 2, 3}), DataError);
}

TEST_CASE("Jarque-Bera rejects Student-t(3) samples") {
    int rejects = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        std::mt19937_64 rng(500 + s);
        std::student_t_distribution<double> t3(3.0);
        std::vector<double> v(1000);
        for (auto& x : v) x = t3(rng);
        if (*jarque_bera(v, 0.01).p_value < 0.01) ++rejects;
    }
    CHECK(rejects >= 95);
}

TEST_CASE("Ljung-Box: hand instance, zero autocorrelation, scale invariance") {
    const std::vector<double> x = {0.3, -1.2, 0.8, 2.1, -0.4};
    const auto r = ljung_box(x, 2);
    CHECK(std::abs(r.statistic - ljung_box_oracle(x, 2)) < 1e-10);
    CHECK(r.aux.at("df") == 2);

    // Every lag-1 product of (1, 0, -1, 0, ...) involves a zero, so rho_1 = 0 exactly.
    const auto q0 = ljung_box(std::vector<double>{1, 0, -1, 0, 1, 0, -1, 0}, 1);
    CHECK(std::abs(q0.statistic) < 1e-15);
    CHECK(*q0.p_value == doctest::Approx(1.0));

    auto y = normals(200, 3);
    const double q = ljung_box(y, 12).statistic;
    for (auto& v : y) v *= -0.37;
    CHECK(ljung_box(y, 12).statistic == doctest::Approx(q).epsilon(1e-12));
    CHECK(std::abs(q - ljung_box_oracle(y, 12)) < 1e-10);

    const auto c = ljung_box(y, 12, 2);
    CHECK(c.aux.at("df") == 10);
    CHECK(*c.p_value == doctest::Approx(boost::math::cdf(boost::math::complement(boost::math::chi_squared(10), c.statistic))).epsilon(1e-10));

    CHECK_THROWS_AS(ljung_box(y, 0), DataError);
    CHECK_THROWS_AS(ljung_box(y, 3, 3), DataError);
    CHECK_THROWS_AS(ljung_box(std::vector<double>{1, 2, 3}, 2), DataError);
}

TEST_CASE("Ljung-Box rejects AR(1) phi = 0.8 at 1%") {
    int rejects = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        if (ljung_box(ar1(1000, 0.8, 700 + s), 12, 0, 0.01).verdict == Verdict::Reject) ++rejects;
    }
    CHECK(rejects >= 99);
}

TEST_CASE("VIF: auxiliary-regression oracle, orthogonal design") {
    const auto x1 = normals(100, 4);
    auto x2 = normals(100, 5);
    for (std::size_t i = 0; i < x2.size(); ++i) x2[i] = x1[i] + 0.01 * x2[i];
    const auto v = vif(panel_of({{"x1", x1}, {"x2", x2}}), {"x1", "x2"});
    const double oracle = 1.0 / (1.0 - simple_r2(x2, x1));
    CHECK(v.at("x2").value == doctest::Approx(oracle).epsilon(1e-8));
    CHECK(v.at("x1").value == doctest::Approx(oracle).epsilon(1e-8));
    CHECK(v.at("x2").value > 5.0);

    // Centered, mutually orthogonal columns.
    const std::vector<double> a = {1, -1, 1, -1, 1, -1, 1, -1};
    const std::vector<double> b = {1, 1, -1, -1, 1, 1, -1, -1};
    const std::vector<double> c = {1, 1, 1, 1, -1, -1, -1, -1};
    for (const auto& [name, value] : vif(panel_of({{"a", a}, {"b", b}, {"c", c}}), {"a", "b", "c"})) {
        CHECK(value.value == doctest::Approx(1.0).epsilon(1e-12));
    }

    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto p = panel_of({{"p", normals(30, 40 + s)}, {"q", normals(30, 80 + s)}, {"r", normals(30, 120 + s)}});
        for (const auto& [name, value] : vif(p, {"p", "q", "r"})) CHECK(value.value >= 1.0);
    }

    auto dup = x1;
    for (auto& d : dup) d = 2.0 * d + 1.0;
    const auto perfect = vif(panel_of({{"x1", x1}, {"d", dup}}), {"x1", "d"});
    CHECK(perfect.at("d").perfectly_collinear);
    CHECK(std::isinf(perfect.at("d").value));
    CHECK_THROWS_AS(vif(panel_of({{"x1", x1}}), {"x1"}), DataError);
}

TEST_CASE("ADF: fixed-lag statistic equals the t-ratio of a hand-computed Dickey-Fuller regression") {
    const auto y = ar1(120, 0.7, 6);
    AdfOptions o;
    o.max_lag = 0;
    o.aic_prune = false;
    const auto r = adf_test(ReturnSeries("y", y), o);
    // dy_t = c + g y_{t-1}: simple regression closed form.
    std::vector<double> dy, lag;
    for (std::size_t t = 1; t < y.size(); ++t) {
        dy.push_back(y[t] - y[t - 1]);
        lag.push_back(y[t - 1]);
    }
    const double n = dy.size();
    const double mx = mean(lag), my = mean(dy);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < dy.size(); ++i) {
        sxx += (lag[i] - mx) * (lag[i] - mx);
        sxy += (lag[i] - mx) * (dy[i] - my);
    }
    const double g = sxy / sxx;
    double ssr = 0;
    for (std::size_t i = 0; i < dy.size(); ++i) {
        const double e = dy[i] - my - g * (lag[i] - mx);
        ssr += e * e;
    }
    const double se = std::sqrt(ssr / (n - 2) / sxx);
    CHECK(r.statistic == doctest::Approx(g / se).epsilon(1e-10));
    CHECK(r.aux.at("lags") == 0);
}

TEST_CASE("ADF statistic is invariant under adding a constant") {
    auto y = ar1(300, 0.6, 7);
    const auto a = adf_test(ReturnSeries("y", y));
    for (auto& v : y) v += 42.0;
    const auto b = adf_test(ReturnSeries("y", y));
    CHECK(b.statistic == doctest::Approx(a.statistic).epsilon(1e-8));
    CHECK(b.aux.at("lags") == a.aux.at("lags"));
}

TEST_CASE("ADF critical values approach the asymptotic constant-only values") {
    const auto cv = adf_critical_values(1000000);
    CHECK(cv.one == doctest::Approx(-3.43).epsilon(0.01));
    CHECK(cv.five == doctest::Approx(-2.86).epsilon(0.01));
    CHECK(cv.ten == doctest::Approx(-2.57).epsilon(0.01));
    const auto small = adf_critical_values(50);
    CHECK(small.one < cv.one);
    const auto eg = engle_granger_critical_values(1000000);
    CHECK(eg.one == doctest::Approx(-3.90).epsilon(0.01));
    CHECK(eg.five == doctest::Approx(-3.34).epsilon(0.01));
    CHECK(eg.ten == doctest::Approx(-3.04).epsilon(0.01));
}

TEST_CASE("ADF p-values are interpolated or clamped and agree with the verdict") {
    for (std::uint64_t s = 0; s < 40; ++s) {
        const auto r = adf_test(ReturnSeries("y", ar1(200, s % 2 ? 0.97 : 0.3, 900 + s)));
        if (r.p_value) {
            CHECK(*r.p_value >= 0.01);
            CHECK(*r.p_value <= 0.10);
            CHECK(r.p_value_text.empty());
            CHECK((r.verdict == Verdict::Reject) == (*r.p_value <= r.level));
        } else {
            CHECK((r.p_value_text == "< 0.01" || r.p_value_text == "> 0.10"));
            CHECK((r.verdict == Verdict::Reject) == (r.p_value_text == "< 0.01"));
        }
        CHECK(r.aux.count("cv_5pct") == 1);
    }
    CHECK_THROWS_AS(adf_test(ReturnSeries("short", normals(10, 1))), DataError);
}

TEST_CASE("ADF power: stationary AR(1) rejected, random walk not") {
    int ar_rejects = 0, rw_fails = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        if (adf_test(ReturnSeries("ar", ar1(500, 0.5, 1000 + s))).verdict == Verdict::Reject) ++ar_rejects;
        if (adf_test(ReturnSeries("rw", random_walk(500, 2000 + s))).verdict == Verdict::FailToReject) ++rw_fails;
    }
    MESSAGE("AR(1) rejections " << ar_rejects << "/100, random-walk non-rejections " << rw_fails << "/100");
    CHECK(ar_rejects >= 95);
    CHECK(rw_fails >= 90);
}

TEST_CASE("Engle-Granger: cointegrated vs independent random walks") {
    int coint = 0, indep = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto x = random_walk(500, 3000 + s);
        auto y = normals(500, 4000 + s);
        for (std::size_t t = 0; t < y.size(); ++t) y[t] += 2.0 * x[t];
        if (engle_granger(ReturnSeries("y", y), ReturnSeries("x", x)).verdict == Verdict::Reject) ++coint;
        const auto z = random_walk(500, 5000 + s);
        if (engle_granger(ReturnSeries("z", z), ReturnSeries("x", x)).verdict == Verdict::FailToReject) ++indep;
    }
    MESSAGE("cointegrated rejections " << coint << "/100, independent non-rejections " << indep << "/100");
    CHECK(coint >= 90);
    CHECK(indep >= 85);
}

TEST_CASE("Engle-Granger degenerate and error cases") {
    const auto x = random_walk(60, 8);
    const auto r = engle_granger(ReturnSeries("y", x), ReturnSeries("x", x));
    CHECK(r.verdict == Verdict::Indeterminate);
    CHECK(r.aux.at("degenerate_residuals") == 1);
    CHECK(r.subject == "y~x");
    CHECK_THROWS_AS(engle_granger(ReturnSeries("y", random_walk(40, 1)), ReturnSeries("x", x)), DataError);
    CHECK_THROWS_AS(engle_granger(ReturnSeries("y", random_walk(20, 1)), ReturnSeries("x", random_walk(20, 2))), DataError);
}

TEST_CASE("autocorrelations and verdict strings") {
    const auto x = normals(50, 9);
    const auto rho = autocorrelations(x, 3);
    REQUIRE(rho.size() == 3);
    const double mu = mean(x);
    double c0 = 0, c1 = 0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        c0 += (x[t] - mu) * (x[t] - mu);
        if (t > 0) c1 += (x[t] - mu) * (x[t - 1] - mu);
    }
    CHECK(rho[0] == doctest::Approx(c1 / c0).epsilon(1e-12));
    for (const auto v : {Verdict::Reject, Verdict::FailToReject, Verdict::Indeterminate}) {
        CHECK(verdict_from_string(to_string(v)) == v);
    }
    CHECK_THROWS_AS(verdict_from_string("maybe"), DataError);
}
