#pragma once

#include "fflab/panel.hpp"

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fflab::regress {

struct DesignSpec {
    std::string dependent;
    std::vector<std::string> regressors;
    bool intercept = true;

    /// Regressors non-empty and duplicate-free.
    void validate() const;
};

inline constexpr const char* kInterceptTerm = "Intercept";

/**
 * @brief Ordinary least squares fit with inference and influence quantities.
 *
 * Terms are ordered intercept first (when present), then regressors in the
 * order given by the design. `k` counts regressors only.
 */
struct OlsFit {
    std::string dependent;
    std::vector<std::string> terms;
    bool intercept = true;

    std::vector<double> coefficients;
    std::vector<double> standard_errors;
    std::vector<double> t_stats;
    std::vector<double> p_values;  // two-sided, n - k - 1 degrees of freedom

    std::vector<DateKey> dates;
    std::vector<double> observed;
    std::vector<double> fitted;
    std::vector<double> residuals;
    std::vector<double> leverage;  // hat-matrix diagonal

    double r_squared = 0.0;
    double adj_r_squared = 0.0;
    double multiple_r = 0.0;
    double residual_se = 0.0;  // s = sqrt(SSR / df)
    std::size_t n = 0;
    std::size_t k = 0;

    [[nodiscard]] std::size_t num_params() const { return k + (intercept ? 1 : 0); }
    [[nodiscard]] double df_resid() const { return static_cast<double>(n - num_params()); }
    [[nodiscard]] std::vector<std::string> regressors() const;
    [[nodiscard]] std::size_t term_index(std::string_view term) const;
    [[nodiscard]] double coefficient(std::string_view term) const { return coefficients[term_index(term)]; }
    [[nodiscard]] double p_value(std::string_view term) const { return p_values[term_index(term)]; }
};

/**
 * Solves through a Householder QR of the column-normalized design matrix.
 * Rank deficiency (|R_jj| < 1e-10 max|R_ii|) throws NumericalError naming the
 * offending columns; n <= k + 1 throws DataError.
 */
[[nodiscard]] OlsFit ols_fit(const Panel& panel, const DesignSpec& spec);

/// Matrix-level entry point used by the panel overload and by the tests.
[[nodiscard]] OlsFit ols_fit(std::span<const double> y, const std::vector<std::vector<double>>& columns,
                             const std::vector<std::string>& names, bool intercept, std::string dependent = "y");

/// D_t = e_t^2 h_t / (p s^2 (1 - h_t)^2). Exact-leverage points yield +infinity.
[[nodiscard]] std::vector<double> cooks_distance(const OlsFit& fit);

/// Indices with D_t > 4 / n.
[[nodiscard]] std::vector<std::size_t> influential_points(std::span<const double> cooks);

/// Internally studentized residuals e_t / (s sqrt(1 - h_t)); throws NumericalError when some h_t = 1.
[[nodiscard]] std::vector<double> standardized_residuals(const OlsFit& fit);

/**
 * Removes, one at a time, the regressor with the largest p-value above
 * `alpha_out`, refitting after each removal. The intercept is never removed
 * and at least one regressor is kept. Returns every fit, initial first.
 */
[[nodiscard]] std::vector<OlsFit> backward_eliminate(const Panel& panel, const DesignSpec& spec, double alpha_out);

/// Refit with the listed observation indices removed.
[[nodiscard]] OlsFit exclude_and_refit(const Panel& panel, const DesignSpec& spec,
                                       const std::set<std::size_t>& excluded);

/// Student-t CDF via the regularized incomplete beta function.
[[nodiscard]] double student_t_cdf(double x, double df);

inline constexpr double kRankTolerance = 1e-10;

}  // namespace fflab::regress
