#include "fflab/serialize.hpp"

#include "fflab/errors.hpp"

#include <cmath>
#include <limits>

namespace fflab::serialize {

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double num_from(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json nums(const std::vector<double>& v) {
    json a = json::array();
    for (const double x : v) a.push_back(num(x));
    return a;
}

std::vector<double> nums_from(const json& j) {
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& x : j) out.push_back(num_from(x));
    return out;
}

const json& field(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end()) throw DataError(std::string("JSON document missing key '") + key + "'");
    return *it;
}

template <typename T, typename F>
std::vector<T> list_from(const json& j, F&& f) {
    std::vector<T> out;
    for (const auto& x : j) out.push_back(f(x));
    return out;
}

template <typename T>
json list_to(const std::vector<T>& v) {
    json a = json::array();
    for (const auto& x : v) a.push_back(to_json(x));
    return a;
}

}  // namespace

json to_json(const Panel& panel) {
    json series = json::object();
    for (const auto& label : panel.labels()) series[label] = nums(panel.column(label));
    return {{"dates", panel.dates()}, {"labels", panel.labels()}, {"series", series}};
}

Panel panel_from_json(const json& j) {
    Panel p(field(j, "dates").get<std::vector<DateKey>>());
    const auto& series = field(j, "series");
    for (const auto& label : field(j, "labels").get<std::vector<std::string>>()) {
        p.add(label, nums_from(field(series, label.c_str())));
    }
    return p;
}

json to_json(const ingest::DatasetConfig& c) {
    json factors = json::array();
    for (const auto& f : c.factors) factors.push_back({{"source", f.source}, {"label", f.label}});
    return {{"start", c.start},         {"end", c.end},         {"factors", factors},
            {"factorScale", c.factor_scale}, {"rfDivisor", c.rf_divisor}, {"asset", c.asset}};
}

json to_json(const series::SummaryStats& s) { return {{"mean", num(s.mean)}, {"sd", num(s.sd)}}; }

series::SummaryStats summary_from_json(const json& j) {
    return {num_from(field(j, "mean")), num_from(field(j, "sd"))};
}

json to_json(const series::CorrelationMatrix& m) {
    json rows = json::array();
    for (const auto& r : m.entries) rows.push_back(nums(r));
    return {{"labels", m.labels}, {"entries", rows}};
}

series::CorrelationMatrix correlation_from_json(const json& j) {
    series::CorrelationMatrix m;
    m.labels = field(j, "labels").get<std::vector<std::string>>();
    for (const auto& r : field(j, "entries")) m.entries.push_back(nums_from(r));
    return m;
}

json to_json(const tsmodel::ArmaGarchParams& p) {
    return {{"mu", num(p.mu)},       {"phi", num(p.phi)},     {"theta", num(p.theta)},
            {"gamma", num(p.gamma)}, {"alpha", num(p.alpha)}, {"beta", num(p.beta)}};
}

tsmodel::ArmaGarchParams params_from_json(const json& j) {
    return {num_from(field(j, "mu")),    num_from(field(j, "phi")),   num_from(field(j, "theta")),
            num_from(field(j, "gamma")), num_from(field(j, "alpha")), num_from(field(j, "beta"))};
}

namespace {

json se_to_json(const std::optional<std::array<double, 6>>& se) {
    if (!se) return nullptr;
    json o = json::object();
    for (std::size_t i = 0; i < 6; ++i) o[tsmodel::ArmaGarchParams::kNames[i]] = num((*se)[i]);
    return o;
}

std::optional<std::array<double, 6>> se_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    std::array<double, 6> se{};
    for (std::size_t i = 0; i < 6; ++i) se[i] = num_from(field(j, tsmodel::ArmaGarchParams::kNames[i]));
    return se;
}

}  // namespace

json to_json(const tsmodel::ArmaGarchFit& f) {
    return {{"label", f.label},
            {"params", to_json(f.params)},
            {"standardErrors", se_to_json(f.standard_errors)},
            {"logLikelihood", num(f.log_likelihood)},
            {"converged", f.converged},
            {"iterations", f.iterations},
            {"evaluations", f.evaluations},
            {"status", f.status},
            {"restandardized", f.restandardized},
            {"sigma", nums(f.sigma)},
            {"shocks", nums(f.shocks)},
            {"innovations", nums(f.innovations)}};
}

tsmodel::ArmaGarchFit garch_fit_from_json(const json& j) {
    tsmodel::ArmaGarchFit f;
    f.label = field(j, "label").get<std::string>();
    f.params = params_from_json(field(j, "params"));
    f.standard_errors = se_from_json(field(j, "standardErrors"));
    f.log_likelihood = num_from(field(j, "logLikelihood"));
    f.converged = field(j, "converged").get<bool>();
    f.iterations = field(j, "iterations").get<int>();
    f.evaluations = field(j, "evaluations").get<int>();
    f.status = field(j, "status").get<std::string>();
    f.restandardized = field(j, "restandardized").get<bool>();
    f.sigma = nums_from(field(j, "sigma"));
    f.shocks = nums_from(field(j, "shocks"));
    f.innovations = nums_from(field(j, "innovations"));
    return f;
}

json to_json(const report::GarchSummary& s) {
    return {{"label", s.label},
            {"params", to_json(s.params)},
            {"standardErrors", se_to_json(s.standard_errors)},
            {"logLikelihood", num(s.log_likelihood)},
            {"converged", s.converged},
            {"iterations", s.iterations},
            {"status", s.status},
            {"innovationMean", num(s.innovation_mean)},
            {"innovationSd", num(s.innovation_sd)}};
}

report::GarchSummary garch_summary_from_json(const json& j) {
    report::GarchSummary s;
    s.label = field(j, "label").get<std::string>();
    s.params = params_from_json(field(j, "params"));
    s.standard_errors = se_from_json(field(j, "standardErrors"));
    s.log_likelihood = num_from(field(j, "logLikelihood"));
    s.converged = field(j, "converged").get<bool>();
    s.iterations = field(j, "iterations").get<int>();
    s.status = field(j, "status").get<std::string>();
    s.innovation_mean = num_from(field(j, "innovationMean"));
    s.innovation_sd = num_from(field(j, "innovationSd"));
    return s;
}

json to_json(const regress::DesignSpec& s) {
    return {{"dependent", s.dependent}, {"regressors", s.regressors}, {"intercept", s.intercept}};
}

regress::DesignSpec design_from_json(const json& j) {
    return {field(j, "dependent").get<std::string>(), field(j, "regressors").get<std::vector<std::string>>(),
            field(j, "intercept").get<bool>()};
}

json to_json(const regress::OlsFit& f) {
    return {{"dependent", f.dependent},
            {"terms", f.terms},
            {"intercept", f.intercept},
            {"coefficients", nums(f.coefficients)},
            {"standardErrors", nums(f.standard_errors)},
            {"tStats", nums(f.t_stats)},
            {"pValues", nums(f.p_values)},
            {"rSquared", num(f.r_squared)},
            {"adjRSquared", num(f.adj_r_squared)},
            {"multipleR", num(f.multiple_r)},
            {"residualStandardError", num(f.residual_se)},
            {"n", f.n},
            {"k", f.k},
            {"dates", f.dates},
            {"observed", nums(f.observed)},
            {"fitted", nums(f.fitted)},
            {"residuals", nums(f.residuals)},
            {"leverage", nums(f.leverage)}};
}

regress::OlsFit ols_from_json(const json& j) {
    regress::OlsFit f;
    f.dependent = field(j, "dependent").get<std::string>();
    f.terms = field(j, "terms").get<std::vector<std::string>>();
    f.intercept = field(j, "intercept").get<bool>();
    f.coefficients = nums_from(field(j, "coefficients"));
    f.standard_errors = nums_from(field(j, "standardErrors"));
    f.t_stats = nums_from(field(j, "tStats"));
    f.p_values = nums_from(field(j, "pValues"));
    f.r_squared = num_from(field(j, "rSquared"));
    f.adj_r_squared = num_from(field(j, "adjRSquared"));
    f.multiple_r = num_from(field(j, "multipleR"));
    f.residual_se = num_from(field(j, "residualStandardError"));
    f.n = field(j, "n").get<std::size_t>();
    f.k = field(j, "k").get<std::size_t>();
    f.dates = field(j, "dates").get<std::vector<DateKey>>();
    f.observed = nums_from(field(j, "observed"));
    f.fitted = nums_from(field(j, "fitted"));
    f.residuals = nums_from(field(j, "residuals"));
    f.leverage = nums_from(field(j, "leverage"));
    return f;
}

json to_json(const stests::TestResult& r) {
    json aux = json::object();
    for (const auto& [k, v] : r.aux) aux[k] = num(v);
    json out = {{"name", r.name},
                {"subject", r.subject},
                {"statistic", num(r.statistic)},
                {"aux", aux},
                {"verdict", stests::to_string(r.verdict)},
                {"level", r.level},
                {"note", r.note}};
    if (r.p_value) out["pValue"] = num(*r.p_value);
    if (!r.p_value_text.empty()) out["pValueText"] = r.p_value_text;
    return out;
}

stests::TestResult test_from_json(const json& j) {
    stests::TestResult r;
    r.name = field(j, "name").get<std::string>();
    r.subject = field(j, "subject").get<std::string>();
    r.statistic = num_from(field(j, "statistic"));
    if (j.contains("pValue") && !j["pValue"].is_null()) r.p_value = j["pValue"].get<double>();
    if (j.contains("pValueText")) r.p_value_text = j["pValueText"].get<std::string>();
    for (const auto& [k, v] : field(j, "aux").items()) r.aux[k] = num_from(v);
    r.verdict = stests::verdict_from_string(field(j, "verdict").get<std::string>());
    r.level = field(j, "level").get<double>();
    r.note = field(j, "note").get<std::string>();
    return r;
}

json to_json(const std::map<std::string, stests::VifValue>& vif) {
    json o = json::object();
    for (const auto& [k, v] : vif) o[k] = {{"value", num(v.value)}, {"perfectlyCollinear", v.perfectly_collinear}};
    return o;
}

std::map<std::string, stests::VifValue> vif_from_json(const json& j) {
    std::map<std::string, stests::VifValue> out;
    for (const auto& [k, v] : j.items()) {
        stests::VifValue x{num_from(field(v, "value")), field(v, "perfectlyCollinear").get<bool>()};
        if (x.perfectly_collinear) x.value = std::numeric_limits<double>::infinity();
        out[k] = x;
    }
    return out;
}

json to_json(const report::PlotData& p) {
    json sets = json::array();
    for (const auto& s : p.sets) {
        json recs = json::array();
        for (const auto& r : s.records) recs.push_back(nums(r));
        sets.push_back({{"name", s.name}, {"fields", s.fields}, {"records", recs}});
    }
    json lines = json::array();
    for (const auto& l : p.lines) lines.push_back({{"label", l.label}, {"slope", num(l.slope)}, {"intercept", num(l.intercept)}});
    return {{"kind", report::to_string(p.kind)}, {"title", p.title}, {"labels", p.labels},
            {"sets", sets},                      {"lines", lines},   {"flagged", p.flagged}};
}

report::PlotData plot_from_json(const json& j) {
    report::PlotData p;
    p.kind = report::plot_kind_from_string(field(j, "kind").get<std::string>());
    p.title = field(j, "title").get<std::string>();
    p.labels = field(j, "labels").get<std::vector<std::string>>();
    for (const auto& s : field(j, "sets")) {
        report::PointSet ps{field(s, "name").get<std::string>(), field(s, "fields").get<std::vector<std::string>>(), {}};
        for (const auto& r : field(s, "records")) ps.records.push_back(nums_from(r));
        p.sets.push_back(std::move(ps));
    }
    for (const auto& l : field(j, "lines")) {
        p.lines.push_back({field(l, "label").get<std::string>(), num_from(field(l, "slope")), num_from(field(l, "intercept"))});
    }
    p.flagged = field(j, "flagged").get<std::vector<std::size_t>>();
    return p;
}

json to_json(const report::ModelSection& m) {
    json exclusion = nullptr;
    if (m.exclusion) exclusion = {{"excluded", m.exclusion->excluded}, {"refit", to_json(m.exclusion->refit)}};
    return {{"name", m.name},
            {"spec", to_json(m.spec)},
            {"fit", to_json(m.fit)},
            {"cooksDistance", nums(m.cooks)},
            {"influential", m.influential},
            {"durbinWatson", to_json(m.durbin_watson)},
            {"jarqueBera", to_json(m.jarque_bera)},
            {"vif", to_json(m.vif)},
            {"backwardAlphaOut", m.backward_alpha_out},
            {"backward", list_to(m.backward)},
            {"exclusion", exclusion},
            {"plots", list_to(m.plots)}};
}

report::ModelSection model_from_json(const json& j) {
    report::ModelSection m;
    m.name = field(j, "name").get<std::string>();
    m.spec = design_from_json(field(j, "spec"));
    m.fit = ols_from_json(field(j, "fit"));
    m.cooks = nums_from(field(j, "cooksDistance"));
    for (std::size_t t = 0; t < m.cooks.size(); ++t) {
        if (std::isnan(m.cooks[t])) m.cooks[t] = std::numeric_limits<double>::infinity();
    }
    m.influential = field(j, "influential").get<std::vector<std::size_t>>();
    m.durbin_watson = test_from_json(field(j, "durbinWatson"));
    m.jarque_bera = test_from_json(field(j, "jarqueBera"));
    m.vif = vif_from_json(field(j, "vif"));
    m.backward_alpha_out = field(j, "backwardAlphaOut").get<double>();
    m.backward = list_from<regress::OlsFit>(field(j, "backward"), ols_from_json);
    if (const auto& e = field(j, "exclusion"); !e.is_null()) {
        m.exclusion = report::ExclusionResult{field(e, "excluded").get<std::vector<std::size_t>>(),
                                              ols_from_json(field(e, "refit"))};
    }
    m.plots = list_from<report::PlotData>(field(j, "plots"), plot_from_json);
    return m;
}

json to_json(const report::ModelComparison& c) {
    json vif = json::object();
    for (const auto& [k, v] : c.vif) vif[k] = {{"factors", num(v.first)}, {"innovations", num(v.second)}};
    return {{"terms", c.terms},
            {"factorCoefficients", nums(c.factor_coefficients)},
            {"innovationCoefficients", nums(c.innovation_coefficients)},
            {"factorRSquared", num(c.factor_r_squared)},
            {"innovationRSquared", num(c.innovation_r_squared)},
            {"rSquaredDelta", num(c.r_squared_delta)},
            {"durbinWatson", {{"factors", num(c.durbin_watson.first)}, {"innovations", num(c.durbin_watson.second)}}},
            {"jarqueBera", {{"factors", num(c.jarque_bera.first)}, {"innovations", num(c.jarque_bera.second)}}},
            {"jarqueBeraP", {{"factors", num(c.jarque_bera_p.first)}, {"innovations", num(c.jarque_bera_p.second)}}},
            {"vif", vif},
            {"heavyTailAdvisory", c.heavy_tail_advisory}};
}

report::ModelComparison comparison_from_json(const json& j) {
    report::ModelComparison c;
    c.terms = field(j, "terms").get<std::vector<std::string>>();
    c.factor_coefficients = nums_from(field(j, "factorCoefficients"));
    c.innovation_coefficients = nums_from(field(j, "innovationCoefficients"));
    c.factor_r_squared = num_from(field(j, "factorRSquared"));
    c.innovation_r_squared = num_from(field(j, "innovationRSquared"));
    c.r_squared_delta = num_from(field(j, "rSquaredDelta"));
    const auto pair = [](const json& p) { return std::pair{num_from(field(p, "factors")), num_from(field(p, "innovations"))}; };
    c.durbin_watson = pair(field(j, "durbinWatson"));
    c.jarque_bera = pair(field(j, "jarqueBera"));
    c.jarque_bera_p = pair(field(j, "jarqueBeraP"));
    for (const auto& [k, v] : field(j, "vif").items()) c.vif[k] = pair(v);
    c.heavy_tail_advisory = field(j, "heavyTailAdvisory").get<bool>();
    return c;
}

namespace {

// Model entries in report.json; diagnostics tests and backward trails live under their own keys.
json model_core(const report::ModelSection& m) {
    json exclusion = nullptr;
    if (m.exclusion) exclusion = {{"excluded", m.exclusion->excluded}, {"refit", to_json(m.exclusion->refit)}};
    return {{"name", m.name},   {"spec", to_json(m.spec)},         {"fit", to_json(m.fit)},
            {"cooksDistance", nums(m.cooks)}, {"influential", m.influential}, {"exclusion", exclusion}};
}

}  // namespace

json to_json(const report::AnalysisReport& r) {
    json meta = {{"asset", r.meta.asset},   {"start", r.meta.start},           {"end", r.meta.end},
                 {"n", r.meta.n},           {"series", r.meta.series},         {"regressors", r.meta.regressors},
                 {"seed", r.meta.seed}};
    json summary = json::array();
    for (const auto& [label, s] : r.summary) summary.push_back({{"label", label}, {"mean", num(s.mean)}, {"sd", num(s.sd)}});
    const auto diag = [](const report::ModelSection& m) {
        return json{{"durbinWatson", to_json(m.durbin_watson)}, {"jarqueBera", to_json(m.jarque_bera)}, {"vif", to_json(m.vif)}};
    };
    const auto trail = [](const report::ModelSection& m) {
        return json{{"alphaOut", m.backward_alpha_out}, {"steps", list_to(m.backward)}};
    };
    return {{"meta", meta},
            {"summaryStats", summary},
            {"correlations", {{"factors", to_json(r.factor_correlations)}, {"innovations", to_json(r.innovation_correlations)}}},
            {"garchFits", list_to(r.garch)},
            {"factorModel", model_core(r.factor_model)},
            {"innovationModel", model_core(r.innovation_model)},
            {"tests",
             {{"adf", list_to(r.adf)},
              {"ljungBox", list_to(r.ljung_box)},
              {"engleGranger", list_to(r.engle_granger)},
              {"factorModel", diag(r.factor_model)},
              {"innovationModel", diag(r.innovation_model)},
              {"comparison", to_json(r.comparison)}}},
            {"backward", {{"factors", trail(r.factor_model)}, {"innovations", trail(r.innovation_model)}}},
            {"plots",
             {{"panel", list_to(r.panel_plots)},
              {"factors", list_to(r.factor_model.plots)},
              {"innovations", list_to(r.innovation_model.plots)}}}};
}

report::AnalysisReport report_from_json(const json& j) {
    report::AnalysisReport r;
    const auto& meta = field(j, "meta");
    r.meta.asset = field(meta, "asset").get<std::string>();
    r.meta.start = field(meta, "start").get<DateKey>();
    r.meta.end = field(meta, "end").get<DateKey>();
    r.meta.n = field(meta, "n").get<std::size_t>();
    r.meta.series = field(meta, "series").get<std::vector<std::string>>();
    r.meta.regressors = field(meta, "regressors").get<std::vector<std::string>>();
    r.meta.seed = field(meta, "seed").get<std::uint64_t>();
    for (const auto& s : field(j, "summaryStats")) {
        r.summary.emplace_back(field(s, "label").get<std::string>(), summary_from_json(s));
    }
    r.factor_correlations = correlation_from_json(field(field(j, "correlations"), "factors"));
    r.innovation_correlations = correlation_from_json(field(field(j, "correlations"), "innovations"));
    r.garch = list_from<report::GarchSummary>(field(j, "garchFits"), garch_summary_from_json);

    const auto& tests = field(j, "tests");
    const auto& backward = field(j, "backward");
    const auto& plots = field(j, "plots");
    const auto load_model = [&](const char* key, const char* trail_key, report::ModelSection& m) {
        const auto& core = field(j, key);
        m.name = field(core, "name").get<std::string>();
        m.spec = design_from_json(field(core, "spec"));
        m.fit = ols_from_json(field(core, "fit"));
        m.cooks = nums_from(field(core, "cooksDistance"));
        for (auto& c : m.cooks) {
            if (std::isnan(c)) c = std::numeric_limits<double>::infinity();
        }
        m.influential = field(core, "influential").get<std::vector<std::size_t>>();
        if (const auto& e = field(core, "exclusion"); !e.is_null()) {
            m.exclusion = report::ExclusionResult{field(e, "excluded").get<std::vector<std::size_t>>(),
                                                  ols_from_json(field(e, "refit"))};
        }
        const auto& d = field(tests, key);
        m.durbin_watson = test_from_json(field(d, "durbinWatson"));
        m.jarque_bera = test_from_json(field(d, "jarqueBera"));
        m.vif = vif_from_json(field(d, "vif"));
        const auto& t = field(backward, trail_key);
        m.backward_alpha_out = field(t, "alphaOut").get<double>();
        m.backward = list_from<regress::OlsFit>(field(t, "steps"), ols_from_json);
        m.plots = list_from<report::PlotData>(field(plots, trail_key), plot_from_json);
    };
    load_model("factorModel", "factors", r.factor_model);
    load_model("innovationModel", "innovations", r.innovation_model);
    r.adf = list_from<stests::TestResult>(field(tests, "adf"), test_from_json);
    r.ljung_box = list_from<stests::TestResult>(field(tests, "ljungBox"), test_from_json);
    r.engle_granger = list_from<stests::TestResult>(field(tests, "engleGranger"), test_from_json);
    r.comparison = comparison_from_json(field(tests, "comparison"));
    r.panel_plots = list_from<report::PlotData>(field(plots, "panel"), plot_from_json);
    return r;
}

}  // namespace fflab::serialize
