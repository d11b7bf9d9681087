#pragma once

#include "fflab/ingest.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

// Stage orchestration. Every stage reads the manifest and prior-stage
// artifacts from the output directory and writes its own artifact atomically.
namespace fflab::pipeline {

enum class Stage { Ingest, Summarize, FitGarch, Regress, Diagnose, Report };

[[nodiscard]] const char* to_string(Stage s);

struct RunOptions {
    std::filesystem::path config_path;  // required by ingest
    std::filesystem::path out_dir;
    std::uint64_t seed = 0;
    std::vector<std::string> factors = {"MRP", "SMB", "HML"};  // regression factors
    bool use_innovations = false;
    double alpha_out = 0.05;
    int lb_lags = 12;
    int adf_maxlag = -1;  // negative: automatic lag selection
    bool allow_unconverged = false;
    bool restandardize = false;
    unsigned threads = 0;  // 0: hardware concurrency
};

/// One deterministic self-check recorded in manifest.json.
struct Check {
    std::string name;
    std::string stage;
    bool passed = false;
    std::string detail;
};

void run_stage(Stage stage, const RunOptions& options);

/// Every stage in order; the innovation model is always built.
void run_all(const RunOptions& options);

/// Checks recorded in the manifest of `out_dir`.
[[nodiscard]] std::vector<Check> manifest_checks(const std::filesystem::path& out_dir);

/// Lower-case hex SHA-256 of a file's bytes.
[[nodiscard]] std::string sha256_file(const std::filesystem::path& path);
[[nodiscard]] std::string sha256_hex(std::string_view bytes);

/// Writes to a sibling temporary file, then renames over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);

struct FixtureOptions {
    std::size_t months = 408;
    DateKey start = 200001;
    std::uint64_t seed = 1;
};

/**
 * Writes a synthetic dataset (factors.csv in the factor-library layout with
 * an annual block, daily prices.csv, daily yields.csv, config.cfg) whose
 * factors follow ARMA-GARCH recursions and whose excess return is a known
 * linear combination of them plus GARCH noise.
 */
void write_fixture(const std::filesystem::path& dir, const FixtureOptions& options);

/// Loadings used by write_fixture for MRP, SMB, HML.
inline constexpr double kFixtureBetas[3] = {1.1, -0.3, -0.4};
inline constexpr double kFixtureAlpha = 0.002;

}  // namespace fflab::pipeline
