#pragma once

#include "fflab/series.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fflab::tsmodel {

/**
 * @brief ARMA(1,1)-GARCH(1,1) parameters.
 *
 *   r_t       = mu + phi (r_{t-1} - mu) + theta a_{t-1} + a_t
 *   a_t       = sigma_t eps_t,  eps_t ~ iid N(0, 1)
 *   sigma_t^2 = gamma + alpha a_{t-1}^2 + beta sigma_{t-1}^2
 */
struct ArmaGarchParams {
    double mu = 0.0;
    double phi = 0.0;
    double theta = 0.0;
    double gamma = 1.0;
    double alpha = 0.0;
    double beta = 0.0;

    static constexpr std::array<const char*, 6> kNames = {"mu", "phi", "theta", "gamma", "alpha", "beta"};

    /// |phi| < 1, |theta| < 1, gamma > 0, alpha, beta >= 0, alpha + beta < 1.
    [[nodiscard]] bool valid() const;
    void validate() const;  // throws DataError with the violated constraint

    [[nodiscard]] std::array<double, 6> to_array() const { return {mu, phi, theta, gamma, alpha, beta}; }
    [[nodiscard]] static ArmaGarchParams from_array(const std::array<double, 6>& a) {
        return {a[0], a[1], a[2], a[3], a[4], a[5]};
    }
    /// gamma / (1 - alpha - beta)
    [[nodiscard]] double unconditional_variance() const { return gamma / (1.0 - alpha - beta); }

    friend bool operator==(const ArmaGarchParams&, const ArmaGarchParams&) = default;
};

struct FitOptions {
    int max_iterations = 5000;
    double f_tol = 1e-8;
    double x_tol = 1e-6;
    int restarts = 4;          // jittered restarts in addition to the default start
    std::uint64_t seed = 0;    // drives the restart jitter
    bool restandardize = false;  // rescale innovations to zero mean, unit sample sd
    bool standard_errors = true;
};

struct ArmaGarchFit {
    std::string label;
    ArmaGarchParams params;
    double log_likelihood = 0.0;
    std::vector<double> sigma;        // conditional volatility sigma_t
    std::vector<double> shocks;       // a_t
    std::vector<double> innovations;  // a_t / sigma_t (unless restandardized)
    bool converged = true;
    int iterations = 0;
    int evaluations = 0;
    std::string status = "ok";
    /// Asymptotic standard errors from the inverse observed information; NaN when unavailable.
    std::optional<std::array<double, 6>> standard_errors;
    bool restandardized = false;
};

/// Minimum sample size accepted by neg_log_likelihood.
inline constexpr std::size_t kMinLikelihoodLength = 10;
/// Minimum sample size accepted by fit.
inline constexpr std::size_t kMinFitLength = 30;
/// The fit keeps alpha + beta at or below this; a fit that ends on the cap is flagged as not converged.
inline constexpr double kPersistenceCap = 0.999;

/**
 * Gaussian negative log-likelihood. The recursion starts from a_0 = 0,
 * sigma_0^2 = sample variance and r_0 - mu = 0. Returns +infinity when the
 * recursion blows up.
 */
[[nodiscard]] double neg_log_likelihood(const ArmaGarchParams& params, std::span<const double> series);
[[nodiscard]] double neg_log_likelihood(const ArmaGarchParams& params, const series::ReturnSeries& series);

/// Deterministic forward recursion; no optimization.
[[nodiscard]] ArmaGarchFit filter(const ArmaGarchParams& params, const series::ReturnSeries& series);

[[nodiscard]] ArmaGarchFit fit(const series::ReturnSeries& series, const FitOptions& options = {});

/// Eq. recursion driven by standard-normal draws; 500 burn-in draws are discarded.
[[nodiscard]] series::ReturnSeries simulate(const ArmaGarchParams& params, std::size_t n, std::uint64_t seed,
                                            std::string label = "sim");

/// Standard errors sqrt(diag(H^{-1})) with H the finite-difference Hessian of the negative log-likelihood.
[[nodiscard]] std::array<double, 6> standard_errors(const ArmaGarchParams& params, std::span<const double> series);

/**
 * @brief Bijection between R^6 and the valid parameter region.
 *
 * phi, theta via scaled tanh; gamma via exp (relative to the sample
 * variance); (alpha, beta) via a softmax whose total is scaled by
 * kPersistenceCap, so alpha + beta never exceeds the cap.
 * mu is centred and scaled by the sample mean and sd.
 */
class ParameterTransform {
public:
    ParameterTransform(double location, double scale);

    [[nodiscard]] ArmaGarchParams to_params(std::span<const double> u) const;
    [[nodiscard]] std::vector<double> to_unconstrained(const ArmaGarchParams& p) const;

private:
    double location_;
    double scale_;
};

}  // namespace fflab::tsmodel
