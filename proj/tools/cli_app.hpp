#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cmfda/detection.hpp"
#include "cmfda/standardize.hpp"

namespace cmfda::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kDegenerateTraining = 3 };

/// Every flag of every subcommand. Flags are shared so a single plain-text
/// config file (key=value lines) can drive any subcommand.
struct RunConfig {
    std::string subcommand;

    std::string series = "series.csv";
    std::string labels = "labels.csv";
    std::string sites = "sites.csv";
    std::string models = "models";
    std::string out = ".";
    std::string state = "online_state";
    std::string detections = "detections.csv";
    std::string standardizer;

    std::string scenario = "all";
    int events = 30;
    double noise_scale = 1.0;
    int first_year = 2003;
    int last_year = 2010;

    std::string rule = "multivariate";
    std::string band = "nir";
    std::optional<double> L;
    double L_nir = kDefaultThresholdNir;
    double L_ndvi = kDefaultThresholdNdvi;
    int consec = kDefaultConsec;
    std::string scheme = "---";

    int windows = 5;
    std::optional<int> first_train_year;
    std::optional<int> predict_year;
    std::string policy = "refit";

    int cv_folds = 5;
    std::uint64_t seed = 1;
    std::string grid;
    std::string grid_nir;
    std::string grid_ndvi;
    int anneal_iters = 4000;
    int threads = 0;
    std::string save_config;
};

/// Registers every subcommand and flag on `app`, writing into `cfg`.
void configure(CLI::App& app, RunConfig& cfg);

/// Effective flags of a parsed `app` as key=value lines that --config reads
/// back to the same configuration. Unset optional flags are left out, and
/// so are the multivariate thresholds when --L is given.
std::string config_text(const CLI::App& app);

/// Rule described by the rule flags. Mahalanobis rules need `cov`.
DetectionRule rule_from_config(const RunConfig& cfg, std::shared_ptr<const CubeCovarianceTable> cov = nullptr);

/// Parses "first:last:step" or a comma-separated list; empty text gives an
/// empty grid.
std::vector<double> parse_grid(const std::string& text);

/// Runs the selected subcommand. Returns the process exit code.
int execute(const RunConfig& cfg);

/// Parses argv, executes, and maps failures to exit codes.
int run(int argc, const char* const* argv);

}  // namespace cmfda::cli
