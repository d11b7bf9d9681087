#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fflab/errors.hpp"
#include "fflab/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace fflab;
using namespace fflab::pipeline;

namespace {

const fs::path kFixture = fs::path(FFLAB_TEST_DATA) / "fixture";

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("fflab_pipeline_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(const std::string& args, const std::string& env = "") {
    const auto out = fs::temp_directory_path() / "fflab_pipeline_stdout";
    const auto err = fs::temp_directory_path() / "fflab_pipeline_stderr";
    const std::string cmd = env + " \"" FFLAB_CLI "\" " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

RunOptions options(const fs::path& out, std::uint64_t seed = 7) {
    RunOptions o;
    o.config_path = kFixture / "config.cfg";
    o.out_dir = out;
    o.seed = seed;
    return o;
}

// Copies the fixture so the inputs can be edited.
fs::path fixture_copy(const std::string& name) {
    const auto dir = scratch(name);
    fs::create_directories(dir);
    for (const auto& e : fs::directory_iterator(kFixture)) fs::copy_file(e.path(), dir / e.path().filename());
    return dir;
}

std::vector<std::string> output_files(const fs::path& dir) {
    std::vector<std::string> files = {"report.json"};
    for (int t = 1; t <= 7; ++t) files.push_back("table" + std::to_string(t) + ".csv");
    for (const auto& e : fs::directory_iterator(dir / "plots")) files.push_back("plots/" + e.path().filename().string());
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

TEST_CASE("bundled fixture completes quickly with every manifest check passing") {
    const auto out = scratch("fixture");
    const auto t0 = std::chrono::steady_clock::now();
    run_all(options(out));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    MESSAGE("fixture run took " << secs << " s");
    CHECK(secs < 60.0);
    const auto checks = manifest_checks(out);
    CHECK(checks.size() >= 10);
    for (const auto& c : checks) {
        INFO(c.stage << "/" << c.name << ": " << c.detail);
        CHECK(c.passed);
    }
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    for (const char* stage : {"ingest", "summarize", "fit-garch", "regress", "diagnose", "report"}) {
        CHECK(manifest["stages"][stage].get<bool>());
    }
    for (const auto& [name, input] : manifest["inputs"].items()) {
        CHECK(input["sha256"].get<std::string>() == sha256_file(input["path"].get<std::string>()));
    }

    // The fixture's loadings are recovered within sampling error.
    const auto report = nlohmann::json::parse(slurp(out / "report.json"));
    const auto& fit = report["factorModel"]["fit"];
    for (std::size_t j = 0; j < 3; ++j) {
        const double b = fit["coefficients"][j + 1].get<double>();
        const double se = fit["standardErrors"][j + 1].get<double>();
        CHECK(std::abs(b - kFixtureBetas[j]) < 4.0 * se);
    }
    fs::remove_all(out);
}

TEST_CASE("two runs with the same inputs and seed are byte-identical") {
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    run_all(options(a, 5));
    run_all(options(b, 5));
    const auto files = output_files(a);
    CHECK(files == output_files(b));
    for (const auto& f : files) {
        INFO(f);
        CHECK(slurp(a / f) == slurp(b / f));
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("stage-by-stage run resumes from artifacts and matches the single run") {
    const auto whole = scratch("whole");
    const auto staged = scratch("staged");
    run_all(options(whole));
    auto o = options(staged);
    o.use_innovations = true;
    for (const auto s : {Stage::Ingest, Stage::Summarize, Stage::FitGarch, Stage::Regress, Stage::Diagnose, Stage::Report}) {
        run_stage(s, o);
    }
    for (const auto& f : output_files(whole)) {
        INFO(f);
        CHECK(slurp(whole / f) == slurp(staged / f));
    }
    fs::remove_all(whole);
    fs::remove_all(staged);
}

TEST_CASE("stage dependencies are enforced") {
    const auto out = scratch("deps");
    auto o = options(out);
    CHECK_THROWS_WITH_AS(run_stage(Stage::Summarize, o), doctest::Contains("ingest"), DataError);
    run_stage(Stage::Ingest, o);
    o.use_innovations = true;
    CHECK_THROWS_WITH_AS(run_stage(Stage::Regress, o), doctest::Contains("fit-garch"), DataError);

    const auto r = cli("regress --use-innovations --out " + out.string());
    CHECK(r.code == 1);
    CHECK(r.err.find("fit-garch") != std::string::npos);
    CHECK(r.out.empty());
    fs::remove_all(out);
}

TEST_CASE("changed inputs abort a resumed run and leave artifacts intact") {
    const auto data = fixture_copy("hash_data");
    const auto out = scratch("hash_out");
    RunOptions o;
    o.config_path = data / "config.cfg";
    o.out_dir = out;
    o.seed = 7;
    run_all(o);
    const auto panel = slurp(out / "panel.json");
    const auto fits = slurp(out / "fits.json");
    std::ofstream(data / "factors.csv", std::ios::app) << "\n";
    CHECK_THROWS_WITH_AS(run_stage(Stage::FitGarch, o), doctest::Contains("changed since ingest"), DataError);
    CHECK(slurp(out / "panel.json") == panel);
    CHECK(slurp(out / "fits.json") == fits);

    const auto r = cli("summarize --out " + out.string());
    CHECK(r.code == 1);
    CHECK(r.err.find("factors.csv") != std::string::npos);
    fs::remove_all(data);
    fs::remove_all(out);
}

TEST_CASE("tampered artifacts are detected") {
    const auto out = scratch("tamper");
    auto o = options(out);
    run_stage(Stage::Ingest, o);
    std::ofstream(out / "panel.json", std::ios::app) << " ";
    CHECK_THROWS_AS(run_stage(Stage::Summarize, o), DataError);
    fs::remove_all(out);
}

TEST_CASE("CLI: output directory, logging and FFLAB_OUT") {
    const auto out = scratch("cli_out");
    const auto r = cli("all --config " + (kFixture / "config.cfg").string() + " --out " + out.string() + " --seed 3");
    CHECK(r.code == 0);
    CHECK(r.out == out.string() + "\n");
    CHECK(r.err.find("fflab: stage report done") != std::string::npos);
    CHECK(fs::exists(out / "report.json"));

    const auto env_out = scratch("cli_env");
    const auto e = cli("ingest --config " + (kFixture / "config.cfg").string(), "FFLAB_OUT=" + env_out.string());
    CHECK(e.code == 0);
    CHECK(fs::exists(env_out / "panel.json"));
    fs::remove_all(out);
    fs::remove_all(env_out);
}

TEST_CASE("CLI exit codes") {
    const auto out = scratch("codes");
    CHECK(cli("frobnicate").code == 1);
    CHECK(cli("ingest --out " + out.string()).code == 1);  // --config missing

    const auto data = fixture_copy("codes_data");
    {
        std::ofstream f(data / "factors.csv");
        f << ",Mkt-RF,SMB,HML,RF\n200001,1.0,oops,0.2,0.3\n";
    }
    const auto bad = cli("ingest --config " + (data / "config.cfg").string() + " --out " + out.string());
    CHECK(bad.code == 1);
    CHECK(bad.err.find("factors.csv") != std::string::npos);

    const auto missing = cli("ingest --config " + (data / "nope.cfg").string() + " --out " + out.string());
    CHECK(missing.code == 3);

    // A regular file where the output directory should be.
    const auto blocker = scratch("codes_blocker");
    std::ofstream(blocker) << "x";
    const auto io = cli("ingest --config " + (kFixture / "config.cfg").string() + " --out " + (blocker / "sub").string());
    CHECK(io.code == 3);
    fs::remove(blocker);

    // A constant factor column has zero variance: a numerical failure.
    const auto flat = fixture_copy("codes_flat");
    {
        std::istringstream in(slurp(kFixture / "factors.csv"));
        std::ofstream o(flat / "factors.csv");
        std::string line;
        bool header_seen = false;
        while (std::getline(in, line)) {
            if (header_seen && line.size() > 7 && line[6] == ',') {
                // YYYYMM,MRP,SMB,HML,RF: overwrite SMB with a constant.
                const auto c1 = line.find(',');
                const auto c2 = line.find(',', c1 + 1);
                const auto c3 = line.find(',', c2 + 1);
                line = line.substr(0, c2 + 1) + "0.5" + line.substr(c3);
            }
            if (line.rfind(",Mkt-RF", 0) == 0) header_seen = true;
            if (line.empty()) header_seen = false;
            o << line << "\n";
        }
    }
    const auto num = cli("all --config " + (flat / "config.cfg").string() + " --out " + out.string());
    CHECK(num.code == 2);
    CHECK(num.err.find("SMB") != std::string::npos);
    fs::remove_all(out);
    fs::remove_all(data);
    fs::remove_all(flat);
}

TEST_CASE("non-convergence is a numerical failure unless explicitly allowed") {
    // A short, weakly identified sample whose SMB likelihood peaks on the persistence cap.
    const auto data = scratch("nc_data");
    write_fixture(data, {60, 200001, 4});
    const auto out = scratch("nc_out");
    const std::string base = "all --config " + (data / "config.cfg").string() + " --out " + out.string() + " --seed 1";
    const auto strict = cli(base);
    CHECK(strict.code == 2);
    CHECK(strict.err.find("fit-garch") != std::string::npos);
    CHECK(strict.err.find("SMB") != std::string::npos);
    CHECK_FALSE(fs::exists(out / "fits.json"));
    CHECK(fs::exists(out / "summary.json"));

    const auto lenient = cli(base + " --allow-unconverged");
    CHECK(lenient.code == 0);
    const auto fits = nlohmann::json::parse(slurp(out / "fits.json"));
    bool flagged = false;
    for (const auto& f : fits["fits"]) {
        if (f["label"] == "SMB") flagged = !f["converged"].get<bool>();
    }
    CHECK(flagged);
    fs::remove_all(data);
    fs::remove_all(out);
}

TEST_CASE("hashing and atomic writes") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const auto dir = scratch("atomic");
    fs::create_directories(dir);
    write_atomic(dir / "a.txt", "first");
    write_atomic(dir / "a.txt", "second");
    CHECK(slurp(dir / "a.txt") == "second");
    CHECK(sha256_file(dir / "a.txt") == sha256_hex("second"));
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
    CHECK(entries == 1);
    CHECK_THROWS_AS(write_atomic(dir / "missing" / "b.txt", "x"), IoError);
    fs::remove_all(dir);
}

TEST_CASE("fixture writer is deterministic") {
    const auto a = scratch("fx_a");
    const auto b = scratch("fx_b");
    write_fixture(a, {60, 201001, 9});
    write_fixture(b, {60, 201001, 9});
    for (const char* f : {"config.cfg", "factors.csv", "prices.csv", "yields.csv"}) CHECK(slurp(a / f) == slurp(b / f));
    fs::remove_all(a);
    fs::remove_all(b);
}
