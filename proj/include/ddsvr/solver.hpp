#pragma once

#include "ddsvr/core.hpp"
#include "ddsvr/kernels.hpp"
#include "ddsvr/likelihood.hpp"

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace ddsvr {

struct SvrConfig {
    double c = 1.0;
    double epsilon = 0.1;
    KernelSpec kernel;
    double tol_kkt = 1e-3;
    /// Pass budget (one pass = n pair updates); 0 means 10 * n. The total is
    /// capped at kMaxPairUpdates.
    std::size_t max_passes = 0;
    /// Required relative duality gap at exit.
    double max_relative_gap = 1e-4;
    std::size_t cache_bytes = KernelCache::kDefaultBudgetBytes;

    void validate() const;
};

/// Hard cap on pair updates regardless of max_passes.
inline constexpr std::size_t kMaxPairUpdates = 100000;

struct SolveDiagnostics {
    std::size_t iterations = 0;
    /// max_{up} (-y G) - min_{low} (-y G) at exit
    double kkt_violation = 0.0;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double relative_gap = 0.0;
    std::size_t free_vectors = 0;
};

/**
 * Trained epsilon-SVR. Predictions are
 *
 *     target_scale * (sum_i beta_i k(x_i, x) + bias)
 *
 * with beta_i = alpha_i - alpha_i^*. The training rows are kept for the
 * kernel expansion.
 */
struct SvrModel {
    std::vector<double> beta;
    double bias = 0.0;
    std::vector<std::size_t> support_indices;
    SvrConfig config;
    Dataset train_ref;
    double target_scale = 1.0;
    SolveDiagnostics diagnostics;
};

/// Raised when the pair-update budget runs out before the KKT tolerance is met.
class SolverNotConverged : public std::runtime_error {
public:
    SolverNotConverged(const std::string& what, std::shared_ptr<const SvrModel> best,
                       double max_violation)
        : std::runtime_error(what), best_(std::move(best)), max_violation_(max_violation) {}

    const SvrModel& best_iterate() const noexcept { return *best_; }
    double max_violation() const noexcept { return max_violation_; }

private:
    std::shared_ptr<const SvrModel> best_;
    double max_violation_;
};

/// Snapshot handed to a SolveObserver after every pair update.
struct SolveStep {
    std::size_t iteration;
    double dual_objective;
    std::span<const double> beta;
    double beta_sum;
    double max_abs_beta;
};

using SolveObserver = std::function<void(const SolveStep&)>;

/**
 * SMO on the 2n-variable dual
 *
 *     max  -1/2 beta' K beta - epsilon sum (alpha + alpha*) + y' beta
 *     s.t. sum beta = 0,  0 <= alpha, alpha* <= C
 *
 * choosing the maximal violating pair each step. Stops once the KKT gap is
 * below tol_kkt and the relative duality gap below max_relative_gap (the
 * KKT tolerance is tightened until both hold).
 */
SvrModel solve_svr(const Dataset& train, const SvrConfig& config,
                   const SolveObserver& observer = {});

double predict(const SvrModel& model, std::span<const double> x);
std::vector<double> predict(const SvrModel& model, const Dataset& data);

/// Decision values without target_scale, on the training rows.
std::vector<double> training_decision_values(const SvrModel& model);

/// Primal objective 1/2 |w|^2 + C sum xi for the model on its training set
/// (in the units the model was trained in).
double primal_objective(const SvrModel& model);
/// Dual objective at the model's beta.
double dual_objective(const SvrModel& model);

struct DdFit {
    SvrModel model;
    WorkingLikelihoodFit likelihood;
    std::vector<double> pilot_residuals;
    /// True when the pilot residuals carried no usable scale and the refit
    /// fell back to epsilon 0 and unit scale.
    bool degenerate = false;
};

struct DdOptions {
    double c = 1.0;
    double tol_kkt = 1e-3;
    EstimateOptions estimate;
};

/**
 * Data-driven fit:
 *   1. pilot fit with epsilon = 0,
 *   2. working-likelihood estimate of (epsilon, s) from the pilot residuals,
 *   3. refit on targets / s with epsilon = epsilon_hat; target_scale = s.
 *
 * Pilot residuals all inside the solver tolerance (noiseless data) are
 * degenerate: the refit then uses epsilon 0 and scale 1.
 */
DdFit fit_dd(const Dataset& train, const KernelSpec& kernel, const DdOptions& options = {});

/// Plain-text model file, format version 1. See docs in model_io.cpp.
void save_model(const SvrModel& model, std::ostream& out);
SvrModel load_model(std::istream& in);

}  // namespace ddsvr
