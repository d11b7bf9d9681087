#pragma once

namespace fflab::special {

/**
 * @brief Regularized incomplete beta function I_x(a, b).
 *
 * Evaluated with the Lentz continued fraction, using the symmetry
 * I_x(a, b) = 1 - I_{1-x}(b, a) to stay in the fast-converging region.
 */
[[nodiscard]] double incomplete_beta(double a, double b, double x);

/// Regularized lower incomplete gamma P(a, x).
[[nodiscard]] double incomplete_gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
[[nodiscard]] double incomplete_gamma_q(double a, double x);

/// Student-t CDF with `df` degrees of freedom (df may be fractional, > 0).
[[nodiscard]] double student_t_cdf(double x, double df);

/// Two-sided p-value 2 * P(T > |t|).
[[nodiscard]] double student_t_two_sided_p(double t, double df);

[[nodiscard]] double chi_squared_cdf(double x, double df);

/// Upper tail P(X > x) for X ~ chi-squared(df).
[[nodiscard]] double chi_squared_sf(double x, double df);

/// Inverse of chi_squared_cdf; used for critical values.
[[nodiscard]] double chi_squared_quantile(double p, double df);

[[nodiscard]] double normal_cdf(double x);

/**
 * @brief Standard normal quantile.
 *
 * Acklam's rational approximation followed by one Halley refinement step
 * against erfc, giving absolute error well below 1e-9 on (0, 1).
 */
[[nodiscard]] double normal_quantile(double p);

}  // namespace fflab::special
