#include "fflab/stests.hpp"

#include "fflab/errors.hpp"
#include "fflab/regress.hpp"
#include "fflab/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fflab::stests {

namespace {

// MacKinnon (2010) response surfaces: cv(T) = b_inf + b1/T + b2/T^2 + b3/T^3.
struct Surface {
    double b_inf, b1, b2, b3;
    [[nodiscard]] double at(double t) const { return b_inf + b1 / t + b2 / (t * t) + b3 / (t * t * t); }
};
// One variable, constant, no trend.
constexpr Surface kAdf[3] = {{-3.43035, -6.5393, -16.786, -79.433},
                             {-2.86154, -2.8903, -4.234, -40.040},
                             {-2.56677, -1.5384, -2.809, 0.0}};
// Two variables (cointegrating regression with constant).
constexpr Surface kEngleGranger[3] = {{-3.89644, -10.9519, -22.527, 0.0},
                                      {-3.33613, -6.1101, -6.823, 0.0},
                                      {-3.04445, -4.2412, -2.720, 0.0}};

CriticalValues evaluate(const Surface (&s)[3], std::size_t n) {
    const double t = static_cast<double>(n);
    return {s[0].at(t), s[1].at(t), s[2].at(t)};
}

struct AdfRegression {
    double tau = 0.0;
    std::size_t nobs = 0;
    int lag = 0;
};

// Rows t = first..n-2 of the differenced system; returns the design for lag p.
regress::OlsFit adf_fit(std::span<const double> y, int lag, std::size_t first_row, bool constant) {
    const std::size_t n = y.size();
    std::vector<double> dy(n - 1);
    for (std::size_t t = 1; t < n; ++t) dy[t - 1] = y[t] - y[t - 1];
    // Observation i uses dy[i] as response, y[i] as lagged level, dy[i-1..i-lag] as lagged differences.
    std::vector<double> response;
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(lag) + 1);
    for (std::size_t i = first_row; i < dy.size(); ++i) {
        response.push_back(dy[i]);
        cols[0].push_back(y[i]);
        for (int l = 1; l <= lag; ++l) cols[static_cast<std::size_t>(l)].push_back(dy[i - static_cast<std::size_t>(l)]);
    }
    std::vector<std::string> names{"level"};
    for (int l = 1; l <= lag; ++l) names.push_back("dlag" + std::to_string(l));
    return regress::ols_fit(response, cols, names, constant, "diff");
}

AdfRegression run_adf(std::span<const double> y, const AdfOptions& options, bool constant) {
    const std::size_t n = y.size();
    const int extra = constant ? 2 : 1;
    // Keep at least 10 residual degrees of freedom.
    const auto max_feasible = [&](int p) {
        return static_cast<long long>(n) - 1 - p - (p + extra) >= 10;
    };
    int max_lag = options.max_lag;
    if (max_lag < 0) {
        max_lag = static_cast<int>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
        while (max_lag > 0 && !max_feasible(max_lag)) --max_lag;
    } else if (!max_feasible(max_lag)) {
        throw DataError("series of length " + std::to_string(n) + " too short for ADF lag " + std::to_string(max_lag));
    }

    int lag = max_lag;
    if (options.aic_prune && max_lag > 0) {
        double best_aic = std::numeric_limits<double>::infinity();
        for (int p = max_lag; p >= 0; --p) {
            const auto f = adf_fit(y, p, static_cast<std::size_t>(max_lag), constant);
            double ssr = 0.0;
            for (const double e : f.residuals) ssr += e * e;
            const double nobs = static_cast<double>(f.n);
            const double aic = nobs * std::log(ssr / nobs) + 2.0 * static_cast<double>(f.num_params());
            if (aic < best_aic) {
                best_aic = aic;
                lag = p;
            }
        }
    }
    const auto f = adf_fit(y, lag, static_cast<std::size_t>(lag), constant);
    return {f.t_stats[f.term_index("level")], f.n, lag};
}

void apply_table(TestResult& r, const CriticalValues& cv) {
    r.aux["cv_1pct"] = cv.one;
    r.aux["cv_5pct"] = cv.five;
    r.aux["cv_10pct"] = cv.ten;
    const double s = r.statistic;
    if (s <= cv.one) {
        r.p_value_text = "< 0.01";
        r.verdict = r.level >= 0.01 ? Verdict::Reject : Verdict::Indeterminate;
        return;
    }
    if (s > cv.ten) {
        r.p_value_text = "> 0.10";
        r.verdict = r.level <= 0.10 ? Verdict::FailToReject : Verdict::Indeterminate;
        return;
    }
    const double p = s <= cv.five ? 0.01 + 0.04 * (s - cv.one) / (cv.five - cv.one)
                                  : 0.05 + 0.05 * (s - cv.five) / (cv.ten - cv.five);
    r.p_value = p;
    r.verdict = p <= r.level ? Verdict::Reject : Verdict::FailToReject;
}

double sum_squares_centered(std::span<const double> x, double& mean_out) {
    double m = 0.0;
    for (const double v : x) m += v;
    m /= static_cast<double>(x.size());
    double ss = 0.0;
    for (const double v : x) ss += (v - m) * (v - m);
    mean_out = m;
    return ss;
}

}  // namespace

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Reject: return "reject";
        case Verdict::FailToReject: return "fail-to-reject";
        case Verdict::Indeterminate: return "indeterminate";
    }
    return "indeterminate";
}

Verdict verdict_from_string(std::string_view s) {
    if (s == "reject") return Verdict::Reject;
    if (s == "fail-to-reject") return Verdict::FailToReject;
    if (s == "indeterminate") return Verdict::Indeterminate;
    throw DataError("unknown verdict '" + std::string(s) + "'");
}

CriticalValues adf_critical_values(std::size_t n) { return evaluate(kAdf, n); }
CriticalValues engle_granger_critical_values(std::size_t n) { return evaluate(kEngleGranger, n); }

TestResult adf_test(const series::ReturnSeries& series, const AdfOptions& options) {
    if (series.n() < 20) throw DataError("ADF needs n >= 20 (series '" + series.label + "')");
    const auto reg = run_adf(series.values, options, true);
    TestResult r;
    r.name = "ADF";
    r.subject = series.label;
    r.statistic = reg.tau;
    r.level = options.level;
    r.aux["lags"] = reg.lag;
    r.aux["nobs"] = static_cast<double>(reg.nobs);
    apply_table(r, adf_critical_values(reg.nobs));
    r.note = "H0: unit root (constant, no trend)";
    return r;
}

std::vector<double> autocorrelations(std::span<const double> x, int max_lag) {
    double m = 0.0;
    const double denom = sum_squares_centered(x, m);
    if (!(denom > 0.0)) throw NumericalError("autocorrelation of a zero-variance series");
    std::vector<double> rho(static_cast<std::size_t>(max_lag));
    for (int k = 1; k <= max_lag; ++k) {
        double num = 0.0;
        for (std::size_t t = static_cast<std::size_t>(k); t < x.size(); ++t) {
            num += (x[t] - m) * (x[t - static_cast<std::size_t>(k)] - m);
        }
        rho[static_cast<std::size_t>(k - 1)] = num / denom;
    }
    return rho;
}

TestResult ljung_box(std::span<const double> x, int lags, int fitted_params, double level) {
    if (lags < 1) throw DataError("Ljung-Box needs lags >= 1");
    if (fitted_params < 0 || fitted_params >= lags) throw DataError("Ljung-Box needs 0 <= fitted params < lags");
    if (x.size() <= static_cast<std::size_t>(lags) + 1) throw DataError("Ljung-Box needs n > lags + 1");
    const auto rho = autocorrelations(x, lags);
    const double n = static_cast<double>(x.size());
    double q = 0.0;
    for (int k = 1; k <= lags; ++k) q += rho[static_cast<std::size_t>(k - 1)] * rho[static_cast<std::size_t>(k - 1)] / (n - k);
    q *= n * (n + 2.0);
    const double df = lags - fitted_params;
    TestResult r;
    r.name = "Ljung-Box";
    r.statistic = q;
    r.p_value = special::chi_squared_sf(q, df);
    r.level = level;
    r.aux["lags"] = lags;
    r.aux["df"] = df;
    r.aux["critical_value"] = special::chi_squared_quantile(1.0 - level, df);
    r.verdict = *r.p_value <= level ? Verdict::Reject : Verdict::FailToReject;
    r.note = "H0: no autocorrelation up to the given lag";
    return r;
}

TestResult durbin_watson(std::span<const double> e) {
    if (e.size() < 2) throw DataError("Durbin-Watson needs n >= 2");
    double num = 0.0;
    double den = e[0] * e[0];
    for (std::size_t t = 1; t < e.size(); ++t) {
        num += (e[t] - e[t - 1]) * (e[t] - e[t - 1]);
        den += e[t] * e[t];
    }
    if (!(den > 0.0)) throw NumericalError("Durbin-Watson: residuals are all zero");
    TestResult r;
    r.name = "Durbin-Watson";
    r.statistic = num / den;
    r.aux["lower"] = 1.5;
    r.aux["upper"] = 2.5;
    const bool ok = r.statistic >= 1.5 && r.statistic <= 2.5;
    r.verdict = ok ? Verdict::FailToReject : Verdict::Reject;
    r.note = ok ? "no discernible autocorrelation" : "autocorrelation indicated";
    return r;
}

TestResult jarque_bera(std::span<const double> e, double level) {
    if (e.size() < 8) throw DataError("Jarque-Bera needs n >= 8");
    double m = 0.0;
    const double n = static_cast<double>(e.size());
    const double ss = sum_squares_centered(e, m);
    if (!(ss > 0.0)) throw NumericalError("Jarque-Bera: zero variance");
    double m3 = 0.0;
    double m4 = 0.0;
    for (const double v : e) {
        const double d = v - m;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    const double m2 = ss / n;
    m3 /= n;
    m4 /= n;
    const double skew = m3 / std::pow(m2, 1.5);
    const double kurt = m4 / (m2 * m2);
    TestResult r;
    r.name = "Jarque-Bera";
    r.statistic = n / 6.0 * (skew * skew + 0.25 * (kurt - 3.0) * (kurt - 3.0));
    r.p_value = special::chi_squared_sf(r.statistic, 2.0);
    r.level = level;
    r.aux["skewness"] = skew;
    r.aux["kurtosis"] = kurt;
    r.aux["df"] = 2;
    r.verdict = *r.p_value <= level ? Verdict::Reject : Verdict::FailToReject;
    r.note = "H0: normally distributed";
    return r;
}

std::map<std::string, VifValue> vif(const Panel& panel, const std::vector<std::string>& regressors) {
    if (regressors.size() < 2) throw DataError("VIF needs at least 2 regressors");
    std::map<std::string, VifValue> out;
    for (std::size_t j = 0; j < regressors.size(); ++j) {
        regress::DesignSpec spec;
        spec.dependent = regressors[j];
        for (std::size_t i = 0; i < regressors.size(); ++i) {
            if (i != j) spec.regressors.push_back(regressors[i]);
        }
        VifValue v;
        try {
            const auto aux = regress::ols_fit(panel, spec);
            if (aux.r_squared >= 1.0) {
                v = {std::numeric_limits<double>::infinity(), true};
            } else {
                v.value = 1.0 / (1.0 - aux.r_squared);
            }
        } catch (const NumericalError&) {
            v = {std::numeric_limits<double>::infinity(), true};
        }
        out[regressors[j]] = v;
    }
    return out;
}

TestResult engle_granger(const series::ReturnSeries& y, const series::ReturnSeries& x, const AdfOptions& options) {
    if (y.n() != x.n()) throw DataError("Engle-Granger: series lengths differ");
    if (y.n() < 30) throw DataError("Engle-Granger needs n >= 30");
    TestResult r;
    r.name = "Engle-Granger";
    r.subject = y.label + "~" + x.label;
    r.level = options.level;
    const auto step1 = regress::ols_fit(y.values, {x.values}, {x.label}, true, y.label);
    r.aux["slope"] = step1.coefficients[1];
    r.aux["intercept"] = step1.coefficients[0];

    double ybar = 0.0;
    const double sst = sum_squares_centered(y.values, ybar);
    double ssr = 0.0;
    for (const double e : step1.residuals) ssr += e * e;
    if (!(ssr > 1e-20 * std::max(sst, 1e-300)) || !(sst > 0.0)) {
        r.statistic = std::numeric_limits<double>::quiet_NaN();
        r.verdict = Verdict::Indeterminate;
        r.aux["degenerate_residuals"] = 1;
        r.note = "degenerate residuals: cointegrating regression fits exactly";
        return r;
    }
    const auto reg = run_adf(step1.residuals, options, false);
    r.statistic = reg.tau;
    r.aux["lags"] = reg.lag;
    r.aux["nobs"] = static_cast<double>(reg.nobs);
    apply_table(r, engle_granger_critical_values(reg.nobs));
    r.note = "H0: no cointegration";
    return r;
}

}  // namespace fflab::stests
