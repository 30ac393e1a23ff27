#pragma once

#include "ddsvr/evaluation.hpp"
#include "ddsvr/kernels.hpp"
#include "ddsvr/likelihood.hpp"
#include "ddsvr/simulation.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ddsvr {

inline constexpr const char* kVersion = "0.1.0";

struct SimulateOptions {
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

struct SimulateResult {
    std::filesystem::path csv;
    std::filesystem::path metadata;
    std::vector<CellResult> cells;
};

/// Runs the grid in `config` and writes the report CSV plus `<out>.meta.json`
/// (versions, seeds, timing). Only the sidecar carries timing, so the CSV is
/// reproducible byte for byte.
SimulateResult cmd_simulate(const SimulateOptions& options);

struct BenchOptions {
    std::filesystem::path data;
    std::optional<std::string> target;
    std::vector<MethodId> methods{MethodId::Tuning, MethodId::CM, MethodId::KCv, MethodId::DD};
    std::size_t reps = 20;
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
    /// Defaults to RBF with gamma 1/d.
    std::optional<KernelSpec> kernel;
    MethodSettings settings;
    unsigned threads = 0;
    std::optional<std::filesystem::path> out;
};

struct BenchResult {
    std::string experiment_id;
    std::vector<MethodAggregate> summary;
    std::vector<RepetitionOutcome> repetitions;
};

/**
 * Case-study protocol: per repetition r, split with seed derive_seed(seed, r),
 * standardize features on the training part, run every method on the same
 * split (k-CV folds from derive_seed(split_seed, 2)). Writes one summary row
 * per method when `out` is set.
 */
BenchResult cmd_bench(const BenchOptions& options);

struct FitOptions {
    std::filesystem::path data;
    std::optional<std::string> target;
    MethodId method = MethodId::DD;
    std::optional<KernelSpec> kernel;
    MethodSettings settings;
    std::filesystem::path out_model;
};

struct FitResult {
    TrainedMethod trained;
};

/// Standardizes features, trains `method` on the whole file and saves the model.
FitResult cmd_fit(const FitOptions& options);

struct PredictOptions {
    std::filesystem::path model;
    std::filesystem::path data;
    /// Column to drop when the file has one more column than the model.
    std::optional<std::string> target;
    std::optional<std::filesystem::path> out;
};

struct PredictResult {
    std::vector<double> predictions;
    /// Present when the input carried a target column.
    std::optional<double> mae;
    std::optional<double> rmse;
};

/// Writes a `prediction` column (stdout when `out` is unset).
PredictResult cmd_predict(const PredictOptions& options, std::ostream& stdout_sink);

/// Evenly spaced grid "lo:hi:count" (count >= 1; count 1 gives lo).
std::vector<double> parse_grid(const std::string& text);

struct CurveOptions {
    /// Residual CSV (one column) or, when `from_data` is set, a data CSV whose
    /// residuals come from a pilot epsilon = 0 fit.
    std::filesystem::path input;
    bool from_data = false;
    std::optional<std::string> column;
    std::optional<KernelSpec> kernel;
    double c = 1.0;
    std::vector<double> epsilons;
    /// Empty: s is profiled out at each epsilon.
    std::vector<double> scales;
    std::optional<std::filesystem::path> out;
};

struct CurveResult {
    std::vector<CurvePoint> points;
    WorkingLikelihoodFit optimum;
};

/// Writes epsilon,s,neg_log_lik rows (stdout when `out` is unset).
CurveResult cmd_curve(const CurveOptions& options, std::ostream& stdout_sink);

}  // namespace ddsvr
