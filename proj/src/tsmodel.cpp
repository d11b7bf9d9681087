#include "fflab/tsmodel.hpp"

#include "fflab/errors.hpp"
#include "fflab/optimize.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace fflab::tsmodel {

namespace {

constexpr double kTanhScale = 1.0 - 1e-5;
constexpr double kCapSlack = 1e-6;  // relative distance from the persistence cap that counts as "at the cap"
constexpr double kLogGammaBound = 700.0;
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)
constexpr std::size_t kBurnIn = 500;

// Shared recursion. When the output vectors are non-null they receive a_t and sigma_t.
double run_recursion(const ArmaGarchParams& p, std::span<const double> r, double initial_variance,
                     std::vector<double>* shocks, std::vector<double>* sigma) {
    double prev_dev = 0.0;  // r_{t-1} - mu
    double prev_a = 0.0;
    double prev_var = initial_variance;
    double nll = 0.0;
    for (std::size_t t = 0; t < r.size(); ++t) {
        const double var = p.gamma + p.alpha * prev_a * prev_a + p.beta * prev_var;
        const double dev = r[t] - p.mu;
        const double a = dev - p.phi * prev_dev - p.theta * prev_a;
        nll += kHalfLog2Pi + 0.5 * std::log(var) + 0.5 * a * a / var;
        if (shocks) (*shocks)[t] = a;
        if (sigma) (*sigma)[t] = std::sqrt(var);
        prev_dev = dev;
        prev_a = a;
        prev_var = var;
    }
    return std::isfinite(nll) ? nll : std::numeric_limits<double>::infinity();
}

double variance_of(std::span<const double> r) {
    double m = 0.0;
    for (const double v : r) m += v;
    m /= static_cast<double>(r.size());
    double ss = 0.0;
    for (const double v : r) ss += (v - m) * (v - m);
    return ss / static_cast<double>(r.size() - 1);
}

}  // namespace

bool ArmaGarchParams::valid() const {
    return std::isfinite(mu) && std::fabs(phi) < 1.0 && std::fabs(theta) < 1.0 && gamma > 0.0 && alpha >= 0.0 &&
           beta >= 0.0 && alpha + beta < 1.0 && std::isfinite(gamma);
}

void ArmaGarchParams::validate() const {
    if (!std::isfinite(mu)) throw DataError("mu must be finite");
    if (!(std::fabs(phi) < 1.0)) throw DataError("|phi| must be < 1");
    if (!(std::fabs(theta) < 1.0)) throw DataError("|theta| must be < 1");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DataError("gamma must be positive");
    if (!(alpha >= 0.0) || !(beta >= 0.0)) throw DataError("alpha and beta must be non-negative");
    if (!(alpha + beta < 1.0)) throw DataError("alpha + beta must be < 1");
}

double neg_log_likelihood(const ArmaGarchParams& params, std::span<const double> series) {
    params.validate();
    if (series.size() < kMinLikelihoodLength) throw DataError("likelihood needs at least 10 observations");
    return run_recursion(params, series, variance_of(series), nullptr, nullptr);
}

double neg_log_likelihood(const ArmaGarchParams& params, const series::ReturnSeries& series) {
    return neg_log_likelihood(params, std::span<const double>(series.values));
}

ArmaGarchFit filter(const ArmaGarchParams& params, const series::ReturnSeries& series) {
    params.validate();
    const auto& r = series.values;
    ArmaGarchFit out;
    out.label = series.label;
    out.params = params;
    out.shocks.resize(r.size());
    out.sigma.resize(r.size());
    const double nll = run_recursion(params, r, variance_of(r), &out.shocks, &out.sigma);
    out.log_likelihood = -nll;
    out.innovations.resize(r.size());
    for (std::size_t t = 0; t < r.size(); ++t) out.innovations[t] = out.shocks[t] / out.sigma[t];
    out.iterations = 0;
    return out;
}

ParameterTransform::ParameterTransform(double location, double scale) : location_(location), scale_(scale) {
    if (!(scale > 0.0)) throw NumericalError("parameter transform needs a positive scale");
}

ArmaGarchParams ParameterTransform::to_params(std::span<const double> u) const {
    ArmaGarchParams p;
    p.mu = location_ + scale_ * u[0];
    p.phi = kTanhScale * std::tanh(u[1]);
    p.theta = kTanhScale * std::tanh(u[2]);
    p.gamma = scale_ * scale_ * std::exp(std::clamp(u[3], -kLogGammaBound, kLogGammaBound));
    const double m = std::max({0.0, u[4], u[5]});
    const double e0 = std::exp(-m);
    const double e4 = std::exp(u[4] - m);
    const double e5 = std::exp(u[5] - m);
    const double den = e0 + e4 + e5;
    p.alpha = kPersistenceCap * e4 / den;
    p.beta = kPersistenceCap * e5 / den;
    return p;
}

std::vector<double> ParameterTransform::to_unconstrained(const ArmaGarchParams& p) const {
    constexpr double floor = 1e-12;
    const double alpha = p.alpha / kPersistenceCap;
    const double beta = p.beta / kPersistenceCap;
    const double rest = std::max(1.0 - alpha - beta, floor);
    return {(p.mu - location_) / scale_,
            std::atanh(std::clamp(p.phi / kTanhScale, -1.0 + floor, 1.0 - floor)),
            std::atanh(std::clamp(p.theta / kTanhScale, -1.0 + floor, 1.0 - floor)),
            std::log(p.gamma / (scale_ * scale_)),
            std::log(std::max(alpha, floor) / rest),
            std::log(std::max(beta, floor) / rest)};
}

ArmaGarchFit fit(const series::ReturnSeries& series, const FitOptions& options) {
    const auto& r = series.values;
    if (r.size() < kMinFitLength) {
        throw DataError("series '" + series.label + "' has " + std::to_string(r.size()) + " observations; fit needs >= 30");
    }
    const double var = variance_of(r);
    double m = 0.0;
    for (const double v : r) m += v;
    m /= static_cast<double>(r.size());
    if (!(var > 1e-14 * std::max(1.0, m * m)) || !std::isfinite(var)) {
        throw NumericalError("degenerate input: series '" + series.label + "' has zero variance");
    }

    const ParameterTransform transform(m, std::sqrt(var));
    const auto objective = [&](std::span<const double> u) {
        return run_recursion(transform.to_params(u), r, var, nullptr, nullptr);
    };

    optimize::NelderMeadOptions nm;
    nm.f_tol = options.f_tol;
    nm.x_tol = options.x_tol;
    nm.max_iterations = options.max_iterations;

    const ArmaGarchParams start{m, 0.1, 0.0, 0.05 * var, 0.05, 0.90};
    const auto base = transform.to_unconstrained(start);

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> jitter(0.0, 0.5);

    optimize::NelderMeadResult best;
    best.value = std::numeric_limits<double>::infinity();
    int total_evaluations = 0;
    for (int run = 0; run <= options.restarts; ++run) {
        auto u = base;
        if (run > 0) {
            for (auto& x : u) x += jitter(rng);
        }
        auto result = optimize::nelder_mead(objective, u, nm);
        total_evaluations += result.evaluations;
        if (result.value < best.value) best = std::move(result);
    }
    // Polish: restart the simplex at the winner to escape premature collapse.
    {
        auto polished = optimize::nelder_mead(objective, best.x, nm);
        total_evaluations += polished.evaluations;
        polished.iterations += best.iterations;
        if (polished.value <= best.value) {
            best = std::move(polished);
        } else {
            best.iterations = polished.iterations;
        }
    }

    const ArmaGarchParams params = transform.to_params(best.x);
    bool converged = best.converged;
    std::string status = converged ? "ok" : "max iterations reached";
    // The transform caps alpha + beta at kPersistenceCap; an optimum on the cap is flagged.
    if (params.alpha + params.beta >= kPersistenceCap * (1.0 - kCapSlack)) {
        converged = false;
        status = "alpha + beta clamped at 0.999 (near-integrated variance)";
    }

    ArmaGarchFit out = filter(params, series);
    out.converged = converged;
    out.status = status;
    out.iterations = best.iterations;
    out.evaluations = total_evaluations;
    if (options.standard_errors) out.standard_errors = standard_errors(params, r);
    if (options.restandardize) {
        const auto stats = series::summary_stats(out.innovations);
        for (auto& e : out.innovations) e = (e - stats.mean) / stats.sd;
        out.restandardized = true;
    }
    return out;
}

series::ReturnSeries simulate(const ArmaGarchParams& params, std::size_t n, std::uint64_t seed, std::string label) {
    params.validate();
    if (n < 1) throw DataError("simulate needs n >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    double prev_dev = 0.0;
    double prev_a = 0.0;
    double prev_var = params.unconditional_variance();
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t t = 0; t < n + kBurnIn; ++t) {
        const double var = params.gamma + params.alpha * prev_a * prev_a + params.beta * prev_var;
        const double a = std::sqrt(var) * z(rng);
        const double dev = params.phi * prev_dev + params.theta * prev_a + a;
        if (t >= kBurnIn) out.push_back(params.mu + dev);
        prev_dev = dev;
        prev_a = a;
        prev_var = var;
    }
    return series::ReturnSeries(std::move(label), std::move(out));
}

std::array<double, 6> standard_errors(const ArmaGarchParams& params, std::span<const double> series) {
    std::array<double, 6> se;
    se.fill(std::numeric_limits<double>::quiet_NaN());
    const double var = variance_of(series);
    const auto x0 = params.to_array();
    const std::array<double, 6> scale = {std::sqrt(var), 1.0, 1.0, std::max(params.gamma, 1e-300), 1.0, 1.0};
    std::array<double, 6> h;
    for (std::size_t i = 0; i < 6; ++i) h[i] = 1e-4 * std::max(std::fabs(x0[i]), 1e-2 * scale[i]);
    if (params.gamma > 0) h[3] = 1e-4 * params.gamma;

    bool ok = true;
    const auto f = [&](std::array<double, 6> x) {
        const auto p = ArmaGarchParams::from_array(x);
        if (!p.valid()) {
            ok = false;
            return 0.0;
        }
        return run_recursion(p, series, var, nullptr, nullptr);
    };
    const auto shifted = [&](std::size_t i, double di, std::size_t j, double dj) {
        auto x = x0;
        x[i] += di * h[i];
        x[j] += dj * h[j];
        return f(x);
    };

    Eigen::Matrix<double, 6, 6> hess;
    const double f0 = f(x0);
    for (std::size_t i = 0; i < 6; ++i) {
        auto xp = x0;
        auto xm = x0;
        xp[i] += h[i];
        xm[i] -= h[i];
        hess(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h[i] * h[i]);
        for (std::size_t j = 0; j < i; ++j) {
            const double v =
                (shifted(i, 1, j, 1) - shifted(i, 1, j, -1) - shifted(i, -1, j, 1) + shifted(i, -1, j, -1)) /
                (4.0 * h[i] * h[j]);
            hess(i, j) = v;
            hess(j, i) = v;
        }
    }
    if (!ok || !hess.allFinite()) return se;
    // Scale to unit diagonal before inverting; parameters differ by orders of magnitude.
    Eigen::Matrix<double, 6, 1> d;
    for (int i = 0; i < 6; ++i) {
        if (!(hess(i, i) > 0.0)) return se;
        d(i) = 1.0 / std::sqrt(hess(i, i));
    }
    const Eigen::Matrix<double, 6, 6> scaled = d.asDiagonal() * hess * d.asDiagonal();
    const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(scaled);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() <= 0.0).any()) return se;
    const Eigen::Matrix<double, 6, 6> inv = ldlt.solve(Eigen::Matrix<double, 6, 6>::Identity());
    for (int i = 0; i < 6; ++i) {
        const double v = inv(i, i) * d(i) * d(i);
        se[static_cast<std::size_t>(i)] = v > 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
    }
    return se;
}

}  // namespace fflab::tsmodel
