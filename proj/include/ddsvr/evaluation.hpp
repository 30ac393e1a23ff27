#pragma once

#include "ddsvr/core.hpp"
#include "ddsvr/kernels.hpp"
#include "ddsvr/solver.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ddsvr {

enum class MethodId { Tuning, CM, KCv, DD };

std::string to_string(MethodId method);
MethodId parse_method(const std::string& name);

enum class CRule { Fixed, Cm };

struct MethodSettings {
    /// Tuning baseline (C, epsilon).
    double tuning_c = 1.0;
    double tuning_epsilon = 0.1;
    /// C for CM, k-CV and D-D under CRule::Fixed.
    double c = 1.0;
    CRule c_rule = CRule::Fixed;
    std::size_t folds = 10;
    std::vector<double> candidates{0.01, 0.05, 0.1, 0.2, 0.3};
    double tol_kkt = 1e-3;
    std::uint64_t fold_seed = 0;
};

double mae(std::span<const double> pred, std::span<const double> truth);
double rmse(std::span<const double> pred, std::span<const double> truth);

/// Sample standard deviation (divisor n - 1).
double sample_std(std::span<const double> values);

/// 3 sigma sqrt(ln n / n).
double cm_epsilon(double sigma_noise, std::size_t n);

/// Nearest-rank 0.95 quantile of |y|: the ceil(0.95 n)-th smallest |y_i|.
double c_cm(std::span<const double> targets);

/// Seeded k-fold partition of 0..n-1 into validation folds whose sizes
/// differ by at most one.
std::vector<std::vector<std::size_t>> kfold_partition(std::size_t n, std::size_t k, std::uint64_t seed);

/// Candidate epsilon with the lowest mean validation RMSE; ties go to the
/// smaller epsilon.
double kcv_select(const Dataset& train, std::size_t k, std::span<const double> candidates,
                  const KernelSpec& kernel, double c, std::uint64_t seed, double tol_kkt = 1e-3);

struct MetricReport {
    MethodId method = MethodId::Tuning;
    double mae = 0.0;
    double rmse = 0.0;
    std::optional<double> ratio_mae;
    std::optional<double> ratio_rmse;
    double epsilon_used = 0.0;
    double c_used = 0.0;
    /// Noise scale from the working likelihood (D-D only).
    std::optional<double> s_hat;
    std::uint64_t seed = 0;
};

struct TrainedMethod {
    SvrModel model;
    double epsilon_used = 0.0;
    double c_used = 0.0;
    std::optional<double> s_hat;
};

/// Selects epsilon (and C under CRule::Cm) for `method` and trains the final model.
TrainedMethod fit_method(MethodId method, const Dataset& train, const KernelSpec& kernel,
                         const MethodSettings& settings);

/**
 * Trains `method` on `train`, predicts `test` and scores the predictions
 * against `truth` (the test targets when empty). Ratios are left unset.
 */
MetricReport run_method(MethodId method, const Dataset& train, const Dataset& test,
                        const KernelSpec& kernel, const MethodSettings& settings,
                        std::span<const double> truth = {});

/// Runs every method on the same split and fills ratios against a tuning run
/// (performed even when Tuning is not among `methods`).
std::vector<MetricReport> run_methods(std::span<const MethodId> methods, const Dataset& train,
                                      const Dataset& test, const KernelSpec& kernel,
                                      const MethodSettings& settings,
                                      std::span<const double> truth = {});

/// Fills ratio_mae / ratio_rmse as tuning / method.
void attach_ratios(MetricReport& report, const MetricReport& tuning);

/// Outcome of one repetition: every method's report on the same split, or
/// the error that aborted the repetition.
struct RepetitionOutcome {
    std::uint64_t seed = 0;
    std::optional<std::vector<MetricReport>> reports;
    std::string error;
};

/// Averages over the successful repetitions of one experiment.
struct MethodAggregate {
    MethodId method = MethodId::Tuning;
    double mean_mae = 0.0;
    double mean_rmse = 0.0;
    /// Mean tuning error / mean method error.
    double ratio_mae = 0.0;
    double ratio_rmse = 0.0;
    double mean_epsilon = 0.0;
    std::optional<double> mean_s_hat;
    std::size_t completed = 0;
    std::size_t failed = 0;
    /// Message of the first failed repetition, if any.
    std::string first_failure;
};

/// Sums run in repetition order, so the result does not depend on which
/// worker finished first. Reports must come from run_methods() with `methods`.
std::vector<MethodAggregate> aggregate_repetitions(std::span<const RepetitionOutcome> outcomes,
                                                   std::span<const MethodId> methods);

/// Runs job(i) for i in [0, count) on up to `threads` workers (0: hardware
/// concurrency). Jobs must not throw.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job);

struct ReportRow {
    std::string experiment_id;
    MetricReport report;
};

/// CSV header: experiment_id,method,mae,rmse,ratio_mae,ratio_rmse,epsilon_used,s_hat,seed
void write_report_csv(std::ostream& out, std::span<const ReportRow> rows);

/// Shortest round-trip text for a real; empty optionals print as "NA".
std::string format_real(double value);

}  // namespace ddsvr
