#pragma once

#include "fflab/panel.hpp"
#include "fflab/series.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fflab::stests {

enum class Verdict { Reject, FailToReject, Indeterminate };

[[nodiscard]] const char* to_string(Verdict v);
[[nodiscard]] Verdict verdict_from_string(std::string_view s);

/// Outcome of one hypothesis test. `aux` carries lags, degrees of freedom and critical values.
struct TestResult {
    std::string name;
    std::string subject;  // series or model the test was applied to
    double statistic = 0.0;
    std::optional<double> p_value;
    std::string p_value_text;  // "< 0.01" / "> 0.10" when the p-value is only bounded
    std::map<std::string, double> aux;
    Verdict verdict = Verdict::Indeterminate;
    double level = 0.05;
    std::string note;

    friend bool operator==(const TestResult&, const TestResult&) = default;
};

struct AdfOptions {
    /// Negative selects the Schwert rule floor(12 (n/100)^{1/4}).
    int max_lag = -1;
    /// Prune from max_lag downward by AIC; otherwise use max_lag as given.
    bool aic_prune = true;
    double level = 0.05;
};

/**
 * Augmented Dickey-Fuller test with constant and no trend. The p-value is
 * interpolated in MacKinnon's finite-sample 1/5/10% critical values and
 * clamped outside that range.
 */
[[nodiscard]] TestResult adf_test(const series::ReturnSeries& series, const AdfOptions& options = {});

/// Q = n(n+2) sum_k rho_k^2 / (n - k); chi-squared with lags - fitted_params degrees of freedom.
[[nodiscard]] TestResult ljung_box(std::span<const double> series, int lags, int fitted_params = 0,
                                   double level = 0.05);

/// d = sum (e_t - e_{t-1})^2 / sum e_t^2; verdict by the 1.5 <= d <= 2.5 rule, no p-value.
[[nodiscard]] TestResult durbin_watson(std::span<const double> residuals);

/// JB = n/6 (S^2 + (K - 3)^2 / 4) with moment (n-divisor) skewness and kurtosis.
[[nodiscard]] TestResult jarque_bera(std::span<const double> residuals, double level = 0.05);

struct VifValue {
    double value = 0.0;
    bool perfectly_collinear = false;
};

/// VIF_j = 1 / (1 - R_j^2) from regressing each regressor on the others with intercept.
[[nodiscard]] std::map<std::string, VifValue> vif(const Panel& panel, const std::vector<std::string>& regressors);

/// Two-step residual-based cointegration test of y on x.
[[nodiscard]] TestResult engle_granger(const series::ReturnSeries& y, const series::ReturnSeries& x,
                                       const AdfOptions& options = {});

/// Sample autocorrelation at lags 1..max_lag (mean-centred, n-divisor autocovariances).
[[nodiscard]] std::vector<double> autocorrelations(std::span<const double> series, int max_lag);

/// Critical value tables (1%, 5%, 10%) for sample size n.
struct CriticalValues {
    double one;
    double five;
    double ten;
};
[[nodiscard]] CriticalValues adf_critical_values(std::size_t n);
[[nodiscard]] CriticalValues engle_granger_critical_values(std::size_t n);

}  // namespace fflab::stests
