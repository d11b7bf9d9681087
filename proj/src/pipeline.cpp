#include "fflab/pipeline.hpp"

#include "fflab/errors.hpp"
#include "fflab/regress.hpp"
#include "fflab/report.hpp"
#include "fflab/serialize.hpp"
#include "fflab/series.hpp"
#include "fflab/stests.hpp"
#include "fflab/tsmodel.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace fflab::pipeline {

namespace fs = std::filesystem;
using serialize::json;

namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kPanelFile = "panel.json";
constexpr const char* kSummaryFile = "summary.json";
constexpr const char* kFitsFile = "fits.json";
constexpr const char* kRegressFile = "regress.json";
constexpr const char* kDiagnoseFile = "diagnose.json";
constexpr const char* kInnovationSuffix = "N";  // EXR -> EXRN
constexpr std::size_t kExcludedTop = 3;         // observations dropped in the influence refit

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
    return ss.str();
}

json read_json(const fs::path& path) {
    const auto text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw DataError("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void log_line(const std::string& msg) { std::cerr << "fflab: " << msg << '\n'; }

std::uint64_t series_seed(std::uint64_t seed, std::size_t index) {
    // splitmix64 finalizer over (seed, index)
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

bool close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(1.0, std::max(std::abs(a), std::abs(b))); }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

Check make_check(std::string name, std::string stage, bool passed, std::string detail = "") {
    return {std::move(name), std::move(stage), passed, std::move(detail)};
}

// ---------------------------------------------------------------------------
// Run context: manifest, declared inputs and prior-stage artifacts.

class Context {
public:
    Context(Stage stage, const RunOptions& options) : stage_(stage), options_(options), dir_(options.out_dir) {
        if (dir_.empty()) throw DataError("no output directory given (--out or FFLAB_OUT)");
    }

    const RunOptions& options() const { return options_; }
    const fs::path& dir() const { return dir_; }
    const char* stage_name() const { return to_string(stage_); }

    void load_manifest() {
        const auto path = dir_ / kManifestFile;
        if (!fs::exists(path)) {
            throw DataError(std::string("stage ") + stage_name() + " requires artifacts of stage ingest (missing " +
                            path.string() + ")");
        }
        manifest_ = read_json(path);
        for (const auto& input : manifest_.at("inputs")) {
            const fs::path p = input.at("path").get<std::string>();
            if (!fs::exists(p)) throw IoError("declared input '" + p.string() + "' no longer exists");
            if (sha256_file(p) != input.at("sha256").get<std::string>()) {
                throw DataError("declared input '" + p.string() + "' changed since ingest (hash mismatch); rerun ingest");
            }
        }
    }

    void new_manifest(json inputs, json dataset) {
        manifest_ = json::object();
        manifest_["inputs"] = std::move(inputs);
        manifest_["dataset"] = std::move(dataset);
        manifest_["outDir"] = dir_.string();
        manifest_["seed"] = options_.seed;
        manifest_["stages"] = json::object();
        for (const auto s : {Stage::Ingest, Stage::Summarize, Stage::FitGarch, Stage::Regress, Stage::Diagnose,
                             Stage::Report}) {
            manifest_["stages"][to_string(s)] = false;
        }
        manifest_["artifacts"] = json::object();
        manifest_["checks"] = json::array();
    }

    const json& manifest() const { return manifest_; }

    bool has_artifact(const char* name) const {
        return manifest_.at("artifacts").contains(name) && fs::exists(dir_ / name);
    }

    json artifact(const char* name, Stage producer) const {
        const auto path = dir_ / name;
        if (!manifest_.at("artifacts").contains(name) || !fs::exists(path)) {
            throw DataError(std::string("stage ") + stage_name() + " requires artifacts of stage " + to_string(producer) +
                            " (missing " + path.string() + "); run " + to_string(producer) + " first");
        }
        const auto text = read_text(path);
        if (sha256_hex(text) != manifest_["artifacts"][name].get<std::string>()) {
            throw DataError("artifact '" + path.string() + "' does not match the manifest hash; rerun stage " +
                            to_string(producer));
        }
        return json::parse(text);
    }

    void stage_artifact(const char* name, const json& doc) { pending_.emplace_back(name, dump(doc)); }

    void add_check(Check c) { checks_.push_back(std::move(c)); }

    // Artifacts are written only after the stage body has succeeded.
    void commit() {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create '" + dir_.string() + "': " + ec.message());
        for (const auto& [name, text] : pending_) {
            write_atomic(dir_ / name, text);
            manifest_["artifacts"][name] = sha256_hex(text);
        }
        json kept = json::array();
        for (const auto& c : manifest_["checks"]) {
            if (c.at("stage").get<std::string>() != stage_name()) kept.push_back(c);
        }
        for (const auto& c : checks_) {
            kept.push_back({{"name", c.name}, {"stage", c.stage}, {"passed", c.passed}, {"detail", c.detail}});
        }
        manifest_["checks"] = kept;
        manifest_["stages"][stage_name()] = true;
        manifest_["seed"] = options_.seed;
        write_atomic(dir_ / kManifestFile, dump(manifest_));
        const auto failed = std::count_if(checks_.begin(), checks_.end(), [](const Check& c) { return !c.passed; });
        if (failed > 0) {
            std::string names;
            for (const auto& c : checks_) {
                if (!c.passed) names += (names.empty() ? "" : ", ") + c.name;
            }
            throw NumericalError(std::to_string(failed) + " self-check(s) failed: " + names);
        }
    }

private:
    Stage stage_;
    RunOptions options_;
    fs::path dir_;
    json manifest_;
    std::vector<std::pair<std::string, std::string>> pending_;
    std::vector<Check> checks_;
};

series::ReturnSeries series_of(const Panel& panel, const std::string& label) {
    return series::ReturnSeries(label, panel.column(label));
}

std::vector<std::string> require_factors(const Panel& panel, const std::vector<std::string>& factors) {
    if (factors.empty()) throw DataError("no regression factors given");
    for (const auto& f : factors) {
        if (!panel.has(f)) throw DataError("factor '" + f + "' is not in the panel");
    }
    return factors;
}

series::CorrelationMatrix correlations(const Panel& panel, const std::vector<std::string>& labels) {
    std::vector<series::ReturnSeries> cols;
    for (const auto& l : labels) cols.push_back(series_of(panel, l));
    return series::correlation_matrix(cols);
}

void check_correlation(Context& ctx, const series::CorrelationMatrix& m, const std::string& name) {
    bool ok = m.entries.size() == m.labels.size();
    for (std::size_t i = 0; ok && i < m.entries.size(); ++i) {
        ok = m.entries[i][i] == 1.0;
        for (std::size_t j = 0; ok && j < m.entries.size(); ++j) {
            ok = m.entries[i][j] == m.entries[j][i] && std::abs(m.entries[i][j]) <= 1.0;
        }
    }
    ctx.add_check(make_check(name + "_correlation_well_formed", ctx.stage_name(), ok, "unit diagonal, symmetric, |r| <= 1"));
}

// ---------------------------------------------------------------------------
// Stages

void stage_ingest(Context& ctx) {
    const auto& opt = ctx.options();
    if (opt.config_path.empty()) throw DataError("ingest requires --config");
    const auto config_text = read_text(opt.config_path);
    auto config = ingest::DatasetConfig::parse(config_text);
    const auto base = opt.config_path.parent_path();
    const auto resolve = [&](const std::string& p, const char* key) {
        if (p.empty()) throw DataError(std::string("config is missing '") + key + "'");
        const fs::path path(p);
        return (path.is_absolute() ? path : base / path).lexically_normal();
    };
    const auto factor_path = resolve(config.factor_file, "factor_file");
    const auto price_path = resolve(config.price_file, "price_file");
    const auto yield_path = resolve(config.yield_file, "yield_file");

    const auto parse_with = [](const fs::path& path, auto&& parser) {
        try {
            return parser(read_text(path));
        } catch (const DataError& e) {
            throw DataError(path.string() + ": " + e.what());
        }
    };
    const auto factors = parse_with(factor_path, [&](const std::string& t) {
        return ingest::parse_factor_csv_text(t, config.factor_scale);
    });
    const auto prices = parse_with(price_path, [](const std::string& t) { return ingest::parse_price_csv_text(t); });
    const auto yields = parse_with(yield_path, [](const std::string& t) { return ingest::parse_yield_csv_text(t); });

    const auto aligned = ingest::align_monthly({factors, yields, prices}, {config.start, config.end});
    const auto& grid = aligned[0].dates;
    for (std::size_t t = 1; t < grid.size(); ++t) {
        if (grid[t] != next_month(grid[t - 1])) {
            throw DataError("gap in the aligned monthly grid: " + std::to_string(next_month(grid[t - 1])) +
                            " missing from at least one input");
        }
    }
    // Keep the month before the window when the price file has it, so no month is consumed.
    ingest::RawTable price_table = aligned[2];
    const auto lead = previous_month(grid.front());
    if (const auto it = std::find(prices.dates.begin(), prices.dates.end(), lead); it != prices.dates.end()) {
        const auto idx = static_cast<std::size_t>(it - prices.dates.begin());
        price_table.dates.insert(price_table.dates.begin(), lead);
        price_table.rows.insert(price_table.rows.begin(), prices.rows[idx]);
    }
    const auto panel = ingest::build_panel(price_table, aligned[1], aligned[0], config);
    if (panel.size() < ingest::kMinPanelLength) {
        throw DataError("panel has " + std::to_string(panel.size()) + " months; at least " +
                        std::to_string(ingest::kMinPanelLength) + " are required");
    }

    json inputs = json::array();
    const auto declare = [&](const char* role, const fs::path& p) {
        inputs.push_back({{"role", role}, {"path", p.string()}, {"sha256", sha256_file(p)}});
    };
    declare("config", opt.config_path.lexically_normal());
    declare("factors", factor_path);
    declare("prices", price_path);
    declare("yields", yield_path);
    ctx.new_manifest(std::move(inputs), serialize::to_json(config));

    bool finite = true;
    for (const auto& l : panel.labels()) {
        for (const double v : panel.column(l)) finite = finite && std::isfinite(v);
    }
    ctx.add_check(make_check("panel_finite", "ingest", finite));
    ctx.add_check(make_check("panel_min_length", "ingest", panel.size() >= ingest::kMinPanelLength,
                             "n = " + std::to_string(panel.size())));
    const auto realigned = ingest::align_monthly(aligned, {config.start, config.end});
    ctx.add_check(make_check("align_idempotent", "ingest", realigned == aligned));

    ctx.stage_artifact(kPanelFile, {{"panel", serialize::to_json(panel)}, {"asset", config.asset}});
    log_line("ingest: " + std::to_string(panel.size()) + " months " + std::to_string(panel.dates().front()) + ".." +
             std::to_string(panel.dates().back()) + ", series " + std::to_string(panel.labels().size()));
}

Panel load_panel(const Context& ctx) { return serialize::panel_from_json(ctx.artifact(kPanelFile, Stage::Ingest).at("panel")); }

void stage_summarize(Context& ctx) {
    const auto& opt = ctx.options();
    const auto panel = load_panel(ctx);
    const auto factors = require_factors(panel, opt.factors);

    json stats = json::array();
    for (const auto& l : panel.labels()) {
        const auto s = series::summary_stats(panel.column(l));
        if (!(s.sd > 1e-12 * std::max(1.0, std::abs(s.mean)))) {
            throw NumericalError("series '" + l + "' has zero variance");
        }
        stats.push_back({{"label", l}, {"mean", s.mean}, {"sd", s.sd}});
    }
    std::vector<std::string> table2 = {"EXR"};
    table2.insert(table2.end(), factors.begin(), factors.end());
    const auto corr = correlations(panel, table2);
    check_correlation(ctx, corr, "factor");

    stests::AdfOptions adf_opt;
    adf_opt.max_lag = opt.adf_maxlag;
    json adf = json::array();
    json lb = json::array();
    for (const auto& l : panel.labels()) {
        adf.push_back(serialize::to_json(stests::adf_test(series_of(panel, l), adf_opt)));
        const auto& x = panel.column(l);
        auto r = stests::ljung_box(x, opt.lb_lags, 0);
        r.subject = l;
        lb.push_back(serialize::to_json(r));
        const double m = series::mean(x);
        std::vector<double> sq(x.size());
        std::transform(x.begin(), x.end(), sq.begin(), [m](double v) { return (v - m) * (v - m); });
        auto r2 = stests::ljung_box(sq, opt.lb_lags, 0);
        r2.subject = l + "^2";
        lb.push_back(serialize::to_json(r2));
    }
    json eg = json::array();
    const auto& labels = panel.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (std::size_t j = i + 1; j < labels.size(); ++j) {
            eg.push_back(serialize::to_json(stests::engle_granger(series_of(panel, labels[i]), series_of(panel, labels[j]), adf_opt)));
        }
    }
    ctx.stage_artifact(kSummaryFile, {{"summaryStats", stats},
                                     {"correlations", serialize::to_json(corr)},
                                     {"adf", adf},
                                     {"ljungBox", lb},
                                     {"engleGranger", eg}});
    log_line("summarize: " + std::to_string(labels.size()) + " series, " + std::to_string(eg.size()) +
             " Engle-Granger pairs");
}

std::string innovation_label(const std::string& label) { return label == "EXR" ? label + kInnovationSuffix : label; }

void stage_fit_garch(Context& ctx) {
    const auto& opt = ctx.options();
    const auto panel = load_panel(ctx);
    const auto& labels = panel.labels();
    const std::size_t m = labels.size();

    std::vector<tsmodel::ArmaGarchFit> fits(m);
    std::vector<std::exception_ptr> errors(m);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < m; i = next++) {
            try {
                tsmodel::FitOptions fo;
                fo.seed = series_seed(opt.seed, i);
                fo.restandardize = opt.restandardize;
                const auto t0 = std::chrono::steady_clock::now();
                fits[i] = tsmodel::fit(series_of(panel, labels[i]), fo);
                const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
                log_line("fit-garch: " + labels[i] + " logL " + fmt(fits[i].log_likelihood) + " (" + fmt(dt.count()) + " s)");
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    unsigned n_threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, m));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (std::size_t i = 0; i < m; ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const DataError& e) {
            throw DataError("series " + labels[i] + ": " + e.what());
        } catch (const NumericalError& e) {
            throw NumericalError("series " + labels[i] + ": " + e.what());
        }
    }
    for (const auto& f : fits) {
        if (f.converged) continue;
        if (!opt.allow_unconverged) {
            throw NumericalError("series " + f.label + " did not converge (" + f.status +
                                 "); pass --allow-unconverged to keep the best-found fit");
        }
        log_line("fit-garch: warning: " + f.label + " not converged (" + f.status + ")");
    }

    Panel innov(panel.dates());
    for (const auto& f : fits) innov.add(innovation_label(f.label), f.innovations);

    bool sigma_ok = true;
    bool recon_ok = true;
    bool filter_ok = true;
    bool lik_ok = true;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& f = fits[i];
        for (const double s : f.sigma) sigma_ok = sigma_ok && s > 0.0 && std::isfinite(s);
        const auto x = panel.column(labels[i]);
        const auto re = tsmodel::filter(f.params, series_of(panel, labels[i]));
        double nll = 0.0;
        for (std::size_t t = 0; t < x.size(); ++t) {
            const double a = re.shocks[t];
            const double s = re.sigma[t];
            recon_ok = recon_ok && std::abs(re.innovations[t] * s - a) <= 1e-10 * std::max(1.0, std::abs(a));
            nll += 0.5 * std::log(2.0 * M_PI) + std::log(s) + a * a / (2.0 * s * s);
        }
        filter_ok = filter_ok && re.shocks == f.shocks && re.sigma == f.sigma &&
                    (f.restandardized || re.innovations == f.innovations);
        lik_ok = lik_ok && close(nll, tsmodel::neg_log_likelihood(f.params, x), 1e-10) &&
                 close(-nll, f.log_likelihood, 1e-10);
    }
    ctx.add_check(make_check("garch_sigma_positive", "fit-garch", sigma_ok));
    ctx.add_check(make_check("garch_shock_reconstruction", "fit-garch", recon_ok, "|eps*sigma - a| <= 1e-10"));
    ctx.add_check(make_check("garch_filter_reproduces_fit", "fit-garch", filter_ok));
    ctx.add_check(make_check("garch_likelihood_consistency", "fit-garch", lik_ok, "relative 1e-10"));

    json fj = json::array();
    for (const auto& f : fits) fj.push_back(serialize::to_json(f));
    ctx.stage_artifact(kFitsFile, {{"seed", opt.seed}, {"fits", fj}, {"innovationPanel", serialize::to_json(innov)}});
}

struct Fits {
    std::uint64_t seed = 0;
    std::vector<tsmodel::ArmaGarchFit> fits;
    Panel innovations;
};

Fits load_fits(const Context& ctx) {
    const auto j = ctx.artifact(kFitsFile, Stage::FitGarch);
    Fits out;
    out.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& f : j.at("fits")) out.fits.push_back(serialize::garch_fit_from_json(f));
    out.innovations = serialize::panel_from_json(j.at("innovationPanel"));
    return out;
}

void add_ols_checks(Context& ctx, const regress::OlsFit& f, const std::string& model) {
    bool ident = true;
    for (std::size_t t = 0; t < f.n; ++t) {
        ident = ident && std::abs(f.observed[t] - f.fitted[t] - f.residuals[t]) <= 1e-10 * std::max(1.0, std::abs(f.observed[t]));
    }
    const double trace = std::accumulate(f.leverage.begin(), f.leverage.end(), 0.0);
    ctx.add_check(make_check(model + "_residual_identity", ctx.stage_name(), ident, "y = fitted + residual"));
    ctx.add_check(make_check(model + "_leverage_trace", ctx.stage_name(),
                             std::abs(trace - static_cast<double>(f.num_params())) < 1e-8,
                             "sum h = " + fmt(trace)));
}

void stage_regress(Context& ctx) {
    const auto& opt = ctx.options();
    const auto panel = load_panel(ctx);
    const auto factors = require_factors(panel, opt.factors);
    const regress::DesignSpec spec{"EXR", factors, true};
    const auto factor_fit = regress::ols_fit(panel, spec);
    add_ols_checks(ctx, factor_fit, "factor_model");
    json out = {{"factorModel", {{"spec", serialize::to_json(spec)}, {"fit", serialize::to_json(factor_fit)}}},
                {"innovationModel", nullptr}};
    if (opt.use_innovations) {
        if (!ctx.has_artifact(kFitsFile)) {
            throw DataError("stage regress with --use-innovations requires artifacts of stage fit-garch (missing " +
                            (ctx.dir() / kFitsFile).string() + "); run fit-garch first");
        }
        const auto fits = load_fits(ctx);
        const regress::DesignSpec ispec{innovation_label("EXR"), require_factors(fits.innovations, factors), true};
        const auto innov_fit = regress::ols_fit(fits.innovations, ispec);
        add_ols_checks(ctx, innov_fit, "innovation_model");
        out["innovationModel"] = {{"spec", serialize::to_json(ispec)}, {"fit", serialize::to_json(innov_fit)}};
        log_line("regress: innovation model R^2 " + fmt(innov_fit.r_squared));
    }
    ctx.stage_artifact(kRegressFile, out);
    log_line("regress: factor model R^2 " + fmt(factor_fit.r_squared));
}

report::ModelSection diagnose_model(Context& ctx, const std::string& name, const Panel& panel,
                                    const regress::DesignSpec& spec, const regress::OlsFit& fit) {
    const auto& opt = ctx.options();
    report::ModelSection m;
    m.name = name;
    m.spec = spec;
    m.fit = fit;
    m.cooks = regress::cooks_distance(fit);
    m.influential = regress::influential_points(m.cooks);
    m.durbin_watson = stests::durbin_watson(fit.residuals);
    m.durbin_watson.subject = name;
    m.jarque_bera = stests::jarque_bera(fit.residuals);
    m.jarque_bera.subject = name;
    m.vif = stests::vif(panel, spec.regressors);
    m.backward_alpha_out = opt.alpha_out;
    m.backward = regress::backward_eliminate(panel, spec, opt.alpha_out);

    std::vector<std::size_t> order(fit.n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return m.cooks[a] > m.cooks[b]; });
    const std::set<std::size_t> top(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(kExcludedTop, order.size())));
    m.exclusion = report::ExclusionResult{{top.begin(), top.end()}, regress::exclude_and_refit(panel, spec, top)};

    const auto title = name == "factors" ? std::string("factor model") : std::string("innovation model");
    m.plots.push_back(report::qq_plot_data(regress::standardized_residuals(fit), title + " residual QQ"));
    for (auto& p : report::residual_diagnostic_data(fit, title)) m.plots.push_back(std::move(p));

    const double cut = 4.0 / static_cast<double>(fit.n);
    std::vector<std::size_t> expected;
    for (std::size_t t = 0; t < fit.n; ++t) {
        if (m.cooks[t] > cut) expected.push_back(t);
    }
    ctx.add_check(make_check(name + "_cooks_flags", "diagnose", expected == m.influential, "D > 4/n"));
    const auto theo = m.plots.front().set("points").field("theoretical");
    bool anti = true;
    for (std::size_t i = 0; i < theo.size(); ++i) {
        anti = anti && std::abs(theo[i] + theo[theo.size() - 1 - i]) <= 1e-12;
        if (i > 0) anti = anti && theo[i] > theo[i - 1];
    }
    ctx.add_check(make_check(name + "_qq_antisymmetric", "diagnose", anti, "1e-12"));
    bool roundtrip = true;
    bool same_n = true;
    for (const auto& p : m.plots) {
        roundtrip = roundtrip && report::parse_plot_csv(report::render_plot_csv(p)) == p;
        same_n = same_n && p.sets.front().records.size() == fit.n;
    }
    ctx.add_check(make_check(name + "_plot_roundtrip", "diagnose", roundtrip));
    ctx.add_check(make_check(name + "_plots_share_n", "diagnose", same_n));
    return m;
}

void stage_diagnose(Context& ctx) {
    const auto reg = ctx.artifact(kRegressFile, Stage::Regress);
    const auto panel = load_panel(ctx);
    const auto& fm = reg.at("factorModel");
    const auto factor = diagnose_model(ctx, "factors", panel, serialize::design_from_json(fm.at("spec")),
                                       serialize::ols_from_json(fm.at("fit")));
    json out = {{"factorModel", serialize::to_json(factor)}, {"innovationModel", nullptr}, {"comparison", nullptr},
                {"innovationCorrelations", nullptr}, {"innovationLjungBox", nullptr}};
    log_line("diagnose: factor model DW " + fmt(factor.durbin_watson.statistic) + ", JB " +
             fmt(factor.jarque_bera.statistic) + ", " + std::to_string(factor.influential.size()) + " influential");

    if (const auto& im = reg.at("innovationModel"); !im.is_null()) {
        const auto fits = load_fits(ctx);
        const auto innov = diagnose_model(ctx, "innovations", fits.innovations, serialize::design_from_json(im.at("spec")),
                                          serialize::ols_from_json(im.at("fit")));
        const auto cmp = report::compare_models(factor.fit, innov.fit, factor.vif, innov.vif);
        const auto corr = correlations(fits.innovations, fits.innovations.labels());
        check_correlation(ctx, corr, "innovation");
        json lb = json::array();
        for (const auto& f : fits.fits) {
            auto r = stests::ljung_box(f.innovations, ctx.options().lb_lags, 2);
            r.subject = innovation_label(f.label) + " innovations";
            lb.push_back(serialize::to_json(r));
            std::vector<double> sq(f.innovations.size());
            std::transform(f.innovations.begin(), f.innovations.end(), sq.begin(), [](double e) { return e * e; });
            auto r2 = stests::ljung_box(sq, ctx.options().lb_lags, 2);
            r2.subject = innovation_label(f.label) + " innovations^2";
            lb.push_back(serialize::to_json(r2));
        }
        out["innovationModel"] = serialize::to_json(innov);
        out["comparison"] = serialize::to_json(cmp);
        out["innovationCorrelations"] = serialize::to_json(corr);
        out["innovationLjungBox"] = lb;
        log_line("diagnose: innovation model DW " + fmt(innov.durbin_watson.statistic) + ", R^2 delta " +
                 fmt(cmp.r_squared_delta));
    }
    ctx.stage_artifact(kDiagnoseFile, out);
}

void stage_report(Context& ctx) {
    const auto panel_doc = ctx.artifact(kPanelFile, Stage::Ingest);
    const auto panel = serialize::panel_from_json(panel_doc.at("panel"));
    const auto summary = ctx.artifact(kSummaryFile, Stage::Summarize);
    const auto fits = load_fits(ctx);
    const auto diag = ctx.artifact(kDiagnoseFile, Stage::Diagnose);
    if (diag.at("innovationModel").is_null()) {
        throw DataError("stage report requires the innovation model; rerun regress with --use-innovations, then diagnose");
    }

    report::AnalysisReport r;
    r.meta.asset = panel_doc.at("asset").get<std::string>();
    r.meta.start = panel.dates().front();
    r.meta.end = panel.dates().back();
    r.meta.n = panel.size();
    r.meta.series = panel.labels();
    r.factor_model = serialize::model_from_json(diag.at("factorModel"));
    r.innovation_model = serialize::model_from_json(diag.at("innovationModel"));
    r.meta.regressors = r.factor_model.spec.regressors;
    r.meta.seed = fits.seed;
    for (const auto& s : summary.at("summaryStats")) {
        r.summary.emplace_back(s.at("label").get<std::string>(), serialize::summary_from_json(s));
    }
    r.factor_correlations = serialize::correlation_from_json(summary.at("correlations"));
    r.innovation_correlations = serialize::correlation_from_json(diag.at("innovationCorrelations"));
    for (const auto& f : fits.fits) {
        report::GarchSummary g;
        g.label = f.label;
        g.params = f.params;
        g.standard_errors = f.standard_errors;
        g.log_likelihood = f.log_likelihood;
        g.converged = f.converged;
        g.iterations = f.iterations;
        g.status = f.status;
        const auto st = series::summary_stats(f.innovations);
        g.innovation_mean = st.mean;
        g.innovation_sd = st.sd;
        r.garch.push_back(std::move(g));
    }
    for (const auto& t : summary.at("adf")) r.adf.push_back(serialize::test_from_json(t));
    for (const auto& t : summary.at("ljungBox")) r.ljung_box.push_back(serialize::test_from_json(t));
    for (const auto& t : diag.at("innovationLjungBox")) r.ljung_box.push_back(serialize::test_from_json(t));
    for (const auto& t : summary.at("engleGranger")) r.engle_granger.push_back(serialize::test_from_json(t));
    r.comparison = serialize::comparison_from_json(diag.at("comparison"));

    std::vector<std::string> factor_cols = {"EXR"};
    std::vector<std::string> innov_cols = {innovation_label("EXR")};
    for (const auto& f : r.meta.regressors) {
        factor_cols.push_back(f);
        innov_cols.push_back(f);
    }
    r.panel_plots.push_back(report::scatter_matrix_data(panel, factor_cols, "factor scatter matrix"));
    r.panel_plots.push_back(report::heatmap_data(r.factor_correlations, "factor correlation heatmap"));
    r.panel_plots.push_back(report::scatter_matrix_data(fits.innovations, innov_cols, "innovation scatter matrix"));
    r.panel_plots.push_back(report::heatmap_data(correlations(fits.innovations, innov_cols), "innovation correlation heatmap"));

    const auto doc = serialize::to_json(r);
    ctx.add_check(make_check("report_json_roundtrip", "report", serialize::to_json(serialize::report_from_json(doc)) == doc));
    bool hist_ok = true;
    for (const auto* p : {&r.panel_plots[0], &r.panel_plots[2]}) {
        for (const auto& s : p->sets) {
            if (s.name.rfind("hist:", 0) != 0) continue;
            double total = 0.0;
            for (const auto& rec : s.records) total += rec.back();
            hist_ok = hist_ok && total == static_cast<double>(r.meta.n);
        }
    }
    ctx.add_check(make_check("histogram_counts_sum_to_n", "report", hist_ok));

    report::render_tables(r, ctx.dir());
    log_line("report: tables and report.json written to " + ctx.dir().string());
}

}  // namespace

const char* to_string(Stage s) {
    switch (s) {
        case Stage::Ingest: return "ingest";
        case Stage::Summarize: return "summarize";
        case Stage::FitGarch: return "fit-garch";
        case Stage::Regress: return "regress";
        case Stage::Diagnose: return "diagnose";
        case Stage::Report: return "report";
    }
    return "?";
}

void run_stage(Stage stage, const RunOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string name = to_string(stage);
    try {
        Context ctx(stage, options);
        if (stage != Stage::Ingest) ctx.load_manifest();
        switch (stage) {
            case Stage::Ingest: stage_ingest(ctx); break;
            case Stage::Summarize: stage_summarize(ctx); break;
            case Stage::FitGarch: stage_fit_garch(ctx); break;
            case Stage::Regress: stage_regress(ctx); break;
            case Stage::Diagnose: stage_diagnose(ctx); break;
            case Stage::Report: stage_report(ctx); break;
        }
        ctx.commit();
    } catch (const DataError& e) {
        throw DataError(name + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(name + ": " + e.what());
    } catch (const IoError& e) {
        throw IoError(name + ": " + e.what());
    } catch (const json::exception& e) {
        throw DataError(name + ": malformed artifact: " + e.what());
    }
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    log_line("stage " + name + " done in " + fmt(dt.count()) + " s");
}

void run_all(const RunOptions& options) {
    RunOptions opt = options;
    opt.use_innovations = true;
    for (const auto s : {Stage::Ingest, Stage::Summarize, Stage::FitGarch, Stage::Regress, Stage::Diagnose, Stage::Report}) {
        run_stage(s, opt);
    }
}

std::vector<Check> manifest_checks(const fs::path& out_dir) {
    const auto j = read_json(out_dir / kManifestFile);
    std::vector<Check> out;
    for (const auto& c : j.at("checks")) {
        out.push_back({c.at("name").get<std::string>(), c.at("stage").get<std::string>(), c.at("passed").get<bool>(),
                       c.at("detail").get<std::string>()});
    }
    return out;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw IoError("SHA-256 computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

void write_atomic(const fs::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.close();
        if (!out) throw IoError("failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// Synthetic fixture

namespace {

int days_in_month(DateKey key) {
    static constexpr int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const int year = key / 100;
    const int month = key % 100;
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    return month == 2 && leap ? 29 : days[month - 1];
}

std::string iso(DateKey key, int day) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", key / 100, key % 100, day);
    return buf;
}

}  // namespace

void write_fixture(const fs::path& dir, const FixtureOptions& options) {
    if (options.months < ingest::kMinPanelLength) throw DataError("fixture needs at least 30 months");
    if (!is_valid_month_key(options.start)) throw DataError("fixture start must be YYYYMM");
    const std::size_t n = options.months;

    const tsmodel::ArmaGarchParams mkt{0.006, 0.10, 0.0, 1.2e-4, 0.10, 0.85};
    const tsmodel::ArmaGarchParams smb{0.0005, 0.05, 0.05, 1.0e-4, 0.12, 0.80};
    const tsmodel::ArmaGarchParams hml{0.001, 0.15, -0.05, 8.0e-5, 0.12, 0.78};
    const tsmodel::ArmaGarchParams noise{0.0, 0.0, 0.0, 1.5e-4, 0.12, 0.80};
    const auto f_mkt = tsmodel::simulate(mkt, n, series_seed(options.seed, 1), "MRP").values;
    const auto f_smb = tsmodel::simulate(smb, n, series_seed(options.seed, 2), "SMB").values;
    const auto f_hml = tsmodel::simulate(hml, n, series_seed(options.seed, 3), "HML").values;
    const auto u = tsmodel::simulate(noise, n, series_seed(options.seed, 4), "u").values;

    std::mt19937_64 rng(series_seed(options.seed, 5));
    std::normal_distribution<double> z(0.0, 1.0);

    std::vector<DateKey> months(n);
    months[0] = options.start;
    for (std::size_t t = 1; t < n; ++t) months[t] = next_month(months[t - 1]);

    std::vector<double> yields(n);
    double y = 4.0;
    for (std::size_t t = 0; t < n; ++t) {
        y = std::clamp(y + 0.15 * z(rng), 0.5, 12.0);
        yields[t] = y;
    }

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    char buf[256];

    // Factor file in percent, with preamble and an annual block.
    std::ostringstream fac;
    fac << "This file was generated synthetically for pipeline tests.\n"
        << "Monthly factor values are in percent.\n\n"
        << ",Mkt-RF,SMB,HML,RF\n";
    for (std::size_t t = 0; t < n; ++t) {
        std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f\n", months[t], 100 * f_mkt[t], 100 * f_smb[t],
                      100 * f_hml[t], yields[t] / 12.0);
        fac << buf;
    }
    fac << "\n Annual Factors: January-December \n,Mkt-RF,SMB,HML,RF\n";
    for (std::size_t t = 0; t + 12 <= n; t += 12) {
        double a = 0, b = 0, c = 0, d = 0;
        for (std::size_t k = t; k < t + 12; ++k) {
            a += 100 * f_mkt[k];
            b += 100 * f_smb[k];
            c += 100 * f_hml[k];
            d += yields[k] / 12.0;
        }
        std::snprintf(buf, sizeof buf, "%d,%.2f,%.2f,%.2f,%.2f\n", months[t] / 100, a, b, c, d);
        fac << buf;
    }
    fac << "\nCopyright notice line\n";
    write_atomic(dir / "factors.csv", fac.str());

    // Rounded factor values are what the pipeline sees; build returns from those.
    const auto rounded = [](double pct) { return std::round(pct * 1e6) / 1e8; };

    // Daily-ish prices: three quotes per month, month-end last; one leading month.
    std::ostringstream px;
    px << "Date,Adj Close\n";
    double log_s = std::log(50.0);
    const DateKey lead = previous_month(months[0]);
    std::snprintf(buf, sizeof buf, "%s,%.10f\n%s,%.10f\n", iso(lead, 10).c_str(), std::exp(log_s - 0.01),
                  iso(lead, days_in_month(lead)).c_str(), std::exp(log_s));
    px << buf;
    std::ostringstream yl;
    yl << "DATE,DGS10\n";
    for (std::size_t t = 0; t < n; ++t) {
        const double exr = kFixtureAlpha + kFixtureBetas[0] * rounded(100 * f_mkt[t]) +
                           kFixtureBetas[1] * rounded(100 * f_smb[t]) + kFixtureBetas[2] * rounded(100 * f_hml[t]) + u[t];
        const double mid = log_s + 0.5 * exr + 0.01 * z(rng);
        log_s += exr + yields[t] / 1200.0;
        std::snprintf(buf, sizeof buf, "%s,%.10f\n%s,%.10f\n%s,%.10f\n", iso(months[t], 5).c_str(),
                      std::exp(mid - 0.005), iso(months[t], 15).c_str(), std::exp(mid),
                      iso(months[t], days_in_month(months[t]) - 1).c_str(), std::exp(log_s));
        px << buf;
        std::snprintf(buf, sizeof buf, "%s,%.4f\n%s,%.4f\n", iso(months[t], 2).c_str(), yields[t] + 0.05,
                      iso(months[t], days_in_month(months[t]) - 1).c_str(), yields[t]);
        yl << buf;
    }
    write_atomic(dir / "prices.csv", px.str());
    write_atomic(dir / "yields.csv", yl.str());

    ingest::DatasetConfig cfg;
    cfg.start = months.front();
    cfg.end = months.back();
    cfg.asset = "SYNTH";
    cfg.factor_file = "factors.csv";
    cfg.price_file = "prices.csv";
    cfg.yield_file = "yields.csv";
    write_atomic(dir / "config.cfg", "# synthetic fixture\n" + cfg.to_text());
}

}  // namespace fflab::pipeline
