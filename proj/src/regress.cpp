#include "fflab/regress.hpp"

#include "fflab/errors.hpp"
#include "fflab/special.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace fflab::regress {

void DesignSpec::validate() const {
    if (regressors.empty()) throw DataError("design needs at least one regressor");
    std::set<std::string> seen;
    for (const auto& r : regressors) {
        if (!seen.insert(r).second) throw DataError("duplicate regressor '" + r + "'");
        if (r == dependent) throw DataError("regressor '" + r + "' is also the dependent variable");
    }
}

std::vector<std::string> OlsFit::regressors() const {
    return {terms.begin() + (intercept ? 1 : 0), terms.end()};
}

std::size_t OlsFit::term_index(std::string_view term) const {
    const auto it = std::find(terms.begin(), terms.end(), term);
    if (it == terms.end()) throw DataError("fit has no term '" + std::string(term) + "'");
    return static_cast<std::size_t>(it - terms.begin());
}

OlsFit ols_fit(std::span<const double> y, const std::vector<std::vector<double>>& columns,
               const std::vector<std::string>& names, bool intercept, std::string dependent) {
    const std::size_t n = y.size();
    const std::size_t k = columns.size();
    const std::size_t p = k + (intercept ? 1 : 0);
    if (names.size() != k) throw DataError("regressor names do not match columns");
    if (k == 0 && !intercept) throw DataError("empty design");
    if (n <= p) {
        throw DataError("insufficient observations: n = " + std::to_string(n) + " for " + std::to_string(p) +
                        " parameters");
    }

    std::vector<std::string> terms;
    if (intercept) terms.emplace_back(kInterceptTerm);
    terms.insert(terms.end(), names.begin(), names.end());

    Eigen::MatrixXd x(n, p);
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));
    if (intercept) x.col(0).setOnes();
    for (std::size_t j = 0; j < k; ++j) {
        if (columns[j].size() != n) throw DataError("regressor '" + names[j] + "' length mismatch");
        x.col(static_cast<Eigen::Index>(j + (intercept ? 1 : 0))) =
            Eigen::Map<const Eigen::VectorXd>(columns[j].data(), static_cast<Eigen::Index>(n));
    }
    if (!x.allFinite() || !yv.allFinite()) throw DataError("design contains non-finite values");

    // Normalize columns so the rank test does not depend on units.
    Eigen::VectorXd norms = x.colwise().norm().transpose();
    std::vector<std::string> zero_cols;
    for (std::size_t j = 0; j < p; ++j) {
        if (!(norms(static_cast<Eigen::Index>(j)) > 0.0)) zero_cols.push_back(terms[j]);
    }
    if (!zero_cols.empty()) {
        std::string msg = "rank deficiency: zero column(s)";
        for (const auto& c : zero_cols) msg += " '" + c + "'";
        throw NumericalError(msg);
    }
    const Eigen::MatrixXd xs = x * norms.cwiseInverse().asDiagonal();

    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(xs);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(static_cast<Eigen::Index>(p)).triangularView<Eigen::Upper>();
    const Eigen::VectorXd rdiag = r.diagonal().cwiseAbs();
    const double rmax = rdiag.maxCoeff();
    std::vector<std::string> collinear;
    for (std::size_t j = 0; j < p; ++j) {
        if (rdiag(static_cast<Eigen::Index>(j)) < kRankTolerance * rmax) collinear.push_back(terms[j]);
    }
    if (!collinear.empty()) {
        std::string msg = "rank deficiency: column(s)";
        for (const auto& c : collinear) msg += " '" + c + "'";
        msg += " collinear with preceding columns";
        throw NumericalError(msg);
    }

    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                                              static_cast<Eigen::Index>(p));
    const auto rtri = r.triangularView<Eigen::Upper>();
    const Eigen::VectorXd beta_scaled = rtri.solve(q.transpose() * yv);
    const Eigen::VectorXd beta = beta_scaled.cwiseQuotient(norms);
    const Eigen::MatrixXd rinv = rtri.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p),
                                                                       static_cast<Eigen::Index>(p)));
    // (X'X)^{-1} = D^{-1} R^{-1} R^{-T} D^{-1}
    const Eigen::VectorXd cov_diag_unit = (rinv.array().square().rowwise().sum()).matrix();

    OlsFit fit;
    fit.dependent = std::move(dependent);
    fit.terms = terms;
    fit.intercept = intercept;
    fit.n = n;
    fit.k = k;

    const Eigen::VectorXd fitted = x * beta;
    const Eigen::VectorXd resid = yv - fitted;
    const Eigen::VectorXd lev = q.array().square().rowwise().sum().matrix();

    const double ssr = resid.squaredNorm();
    double sst = 0.0;
    if (intercept) {
        const double ybar = yv.mean();
        sst = (yv.array() - ybar).square().sum();
    } else {
        sst = yv.squaredNorm();
    }
    const double df = static_cast<double>(n - p);
    const double s2 = ssr / df;
    fit.residual_se = std::sqrt(s2);
    fit.r_squared = sst > 0.0 ? std::clamp(1.0 - ssr / sst, 0.0, 1.0) : 1.0;
    const double df_total = static_cast<double>(intercept ? n - 1 : n);
    fit.adj_r_squared = 1.0 - (1.0 - fit.r_squared) * df_total / df;
    fit.multiple_r = std::sqrt(fit.r_squared);

    for (std::size_t j = 0; j < p; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double coef = beta(jj);
        const double se = std::sqrt(s2 * cov_diag_unit(jj)) / norms(jj);
        const double t = se > 0.0 ? coef / se : (coef == 0.0 ? 0.0 : std::copysign(INFINITY, coef));
        fit.coefficients.push_back(coef);
        fit.standard_errors.push_back(se);
        fit.t_stats.push_back(t);
        fit.p_values.push_back(std::isfinite(t) ? special::student_t_two_sided_p(t, df) : 0.0);
    }
    fit.observed.assign(y.begin(), y.end());
    fit.fitted.assign(fitted.data(), fitted.data() + n);
    fit.residuals.assign(resid.data(), resid.data() + n);
    fit.leverage.assign(lev.data(), lev.data() + n);
    return fit;
}

OlsFit ols_fit(const Panel& panel, const DesignSpec& spec) {
    spec.validate();
    std::vector<std::vector<double>> columns;
    columns.reserve(spec.regressors.size());
    for (const auto& r : spec.regressors) columns.push_back(panel.column(r));
    const auto& y = panel.column(spec.dependent);
    auto fit = ols_fit(y, columns, spec.regressors, spec.intercept, spec.dependent);
    fit.dates = panel.dates();
    return fit;
}

std::vector<double> cooks_distance(const OlsFit& fit) {
    const double p = static_cast<double>(fit.num_params());
    const double s2 = fit.residual_se * fit.residual_se;
    std::vector<double> out(fit.n);
    for (std::size_t t = 0; t < fit.n; ++t) {
        const double h = fit.leverage[t];
        const double e = fit.residuals[t];
        if (1.0 - h <= 0.0) {
            out[t] = std::numeric_limits<double>::infinity();
        } else if (e == 0.0) {
            out[t] = 0.0;
        } else {
            out[t] = e * e * h / (p * s2 * (1.0 - h) * (1.0 - h));
        }
    }
    return out;
}

std::vector<std::size_t> influential_points(std::span<const double> cooks) {
    const double cutoff = 4.0 / static_cast<double>(cooks.size());
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < cooks.size(); ++t) {
        if (cooks[t] > cutoff) out.push_back(t);
    }
    return out;
}

std::vector<double> standardized_residuals(const OlsFit& fit) {
    std::vector<double> out(fit.n);
    for (std::size_t t = 0; t < fit.n; ++t) {
        const double h = fit.leverage[t];
        if (1.0 - h <= 0.0) {
            throw NumericalError("standardized residual undefined: observation " + std::to_string(t) +
                                 " has leverage 1");
        }
        out[t] = fit.residuals[t] == 0.0 ? 0.0 : fit.residuals[t] / (fit.residual_se * std::sqrt(1.0 - h));
    }
    return out;
}

std::vector<OlsFit> backward_eliminate(const Panel& panel, const DesignSpec& spec, double alpha_out) {
    if (!(alpha_out > 0.0 && alpha_out < 1.0)) throw DataError("alpha_out must be in (0, 1)");
    std::vector<OlsFit> trail;
    DesignSpec current = spec;
    trail.push_back(ols_fit(panel, current));
    while (current.regressors.size() > 1) {
        const auto& last = trail.back();
        const std::size_t offset = last.intercept ? 1 : 0;
        std::size_t worst = 0;
        double worst_p = -1.0;
        for (std::size_t j = 0; j < current.regressors.size(); ++j) {
            const double pv = last.p_values[j + offset];
            if (pv > worst_p) {
                worst_p = pv;
                worst = j;
            }
        }
        if (!(worst_p > alpha_out)) break;
        current.regressors.erase(current.regressors.begin() + static_cast<std::ptrdiff_t>(worst));
        trail.push_back(ols_fit(panel, current));
    }
    return trail;
}

OlsFit exclude_and_refit(const Panel& panel, const DesignSpec& spec, const std::set<std::size_t>& excluded) {
    std::vector<std::size_t> keep;
    for (std::size_t t = 0; t < panel.size(); ++t) {
        if (!excluded.contains(t)) keep.push_back(t);
    }
    for (const auto e : excluded) {
        if (e >= panel.size()) throw DataError("excluded index " + std::to_string(e) + " out of range");
    }
    const std::size_t p = spec.regressors.size() + (spec.intercept ? 1 : 0);
    if (keep.size() <= p) throw DataError("too few rows remain after exclusion");
    return ols_fit(panel.select_rows(keep), spec);
}

double student_t_cdf(double x, double df) {
    if (!(df >= 1.0)) throw DataError("student_t_cdf needs df >= 1");
    return special::student_t_cdf(x, df);
}

}  // namespace fflab::regress
