// fflab command line: ingest, summarize, fit-garch, regress, diagnose, report, all, fixture.

#include "fflab/errors.hpp"
#include "fflab/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <sstream>

namespace {

using fflab::pipeline::RunOptions;
using fflab::pipeline::Stage;

std::vector<std::string> split_labels(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

struct Flags {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    std::string factors = "MRP,SMB,HML";
    bool use_innovations = false;
    double alpha_out = 0.05;
    int lb_lags = 12;
    int adf_maxlag = -1;
    bool allow_unconverged = false;
    bool restandardize = false;
    unsigned threads = 0;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--out", f.out, "Output directory (default: $FFLAB_OUT)");
    cmd->add_option("--seed", f.seed, "Seed for the GARCH restart jitter");
    cmd->add_option("--factors", f.factors, "Comma-separated regression factors");
    cmd->add_option("--alpha-out", f.alpha_out, "Backward-elimination removal threshold")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--lb-lags", f.lb_lags, "Ljung-Box lags")->check(CLI::PositiveNumber);
    cmd->add_option("--adf-maxlag", f.adf_maxlag, "ADF maximum lag (default: automatic)")->check(CLI::NonNegativeNumber);
    cmd->add_flag("--allow-unconverged", f.allow_unconverged, "Keep best-found GARCH fits that did not converge");
    cmd->add_flag("--restandardize", f.restandardize, "Rescale innovations to zero mean and unit sd");
    cmd->add_option("--threads", f.threads, "Worker threads for GARCH fits (0: all cores)");
}

RunOptions to_options(const Flags& f) {
    RunOptions o;
    o.config_path = f.config;
    o.out_dir = f.out;
    if (o.out_dir.empty()) {
        if (const char* env = std::getenv("FFLAB_OUT"); env && *env) o.out_dir = env;
    }
    o.seed = f.seed;
    o.factors = split_labels(f.factors);
    o.use_innovations = f.use_innovations;
    o.alpha_out = f.alpha_out;
    o.lb_lags = f.lb_lags;
    o.adf_maxlag = f.adf_maxlag;
    o.allow_unconverged = f.allow_unconverged;
    o.restandardize = f.restandardize;
    o.threads = f.threads;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Factor-model regression laboratory"};
    app.require_subcommand(1);
    Flags flags;

    struct Sub {
        const char* name;
        Stage stage;
        const char* help;
    };
    const Sub subs[] = {
        {"ingest", Stage::Ingest, "Parse inputs and build the monthly panel"},
        {"summarize", Stage::Summarize, "Summary statistics, correlations, ADF, Ljung-Box, Engle-Granger"},
        {"fit-garch", Stage::FitGarch, "Fit ARMA(1,1)-GARCH(1,1) per series and build the innovation panel"},
        {"regress", Stage::Regress, "OLS of excess returns on the factors (and on innovations)"},
        {"diagnose", Stage::Diagnose, "Residual diagnostics, VIF, backward elimination, influence"},
        {"report", Stage::Report, "Write tables, report.json and plot data"},
    };
    std::vector<std::pair<CLI::App*, Stage>> stage_cmds;
    for (const auto& s : subs) {
        auto* cmd = app.add_subcommand(s.name, s.help);
        add_common(cmd, flags);
        if (s.stage == Stage::Ingest) cmd->add_option("--config", flags.config, "Dataset config file")->required();
        if (s.stage == Stage::Regress) cmd->add_flag("--use-innovations", flags.use_innovations, "Also regress innovations");
        stage_cmds.emplace_back(cmd, s.stage);
    }
    auto* all = app.add_subcommand("all", "Run every stage in order");
    add_common(all, flags);
    all->add_option("--config", flags.config, "Dataset config file")->required();

    fflab::pipeline::FixtureOptions fixture;
    std::string fixture_dir;
    auto* fix = app.add_subcommand("fixture", "Write a synthetic dataset with known factor loadings");
    fix->add_option("--out", fixture_dir, "Directory for the dataset")->required();
    fix->add_option("--months", fixture.months, "Number of months")->check(CLI::Range(30, 100000));
    fix->add_option("--start", fixture.start, "First month (YYYYMM)");
    fix->add_option("--seed", fixture.seed, "Simulation seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (fix->parsed()) {
            fflab::pipeline::write_fixture(fixture_dir, fixture);
            std::cout << fixture_dir << "/config.cfg\n";
            return 0;
        }
        const auto options = to_options(flags);
        if (all->parsed()) {
            fflab::pipeline::run_all(options);
        } else {
            for (const auto& [cmd, stage] : stage_cmds) {
                if (cmd->parsed()) fflab::pipeline::run_stage(stage, options);
            }
        }
        if (options.out_dir.empty()) return 0;
        int failed = 0;
        for (const auto& c : fflab::pipeline::manifest_checks(options.out_dir)) failed += c.passed ? 0 : 1;
        std::cout << options.out_dir.string() << (failed ? " (self-checks failed)" : "") << '\n';
        return 0;
    } catch (const fflab::DataError& e) {
        std::cerr << "fflab: error: " << e.what() << '\n';
        return 1;
    } catch (const fflab::NumericalError& e) {
        std::cerr << "fflab: numerical error: " << e.what() << '\n';
        return 2;
    } catch (const fflab::IoError& e) {
        std::cerr << "fflab: I/O error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "fflab: error: " << e.what() << '\n';
        return 1;
    }
}
