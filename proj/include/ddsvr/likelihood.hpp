#pragma once

#include "ddsvr/core.hpp"
#include "ddsvr/rng.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddsvr {

/// All residuals are zero, so no noise scale can be estimated.
class DegenerateResiduals : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The limiting-parameter equations have no solution in the bracket.
class NoRootInBracket : public std::runtime_error {
public:
    NoRootInBracket(const std::string& what, std::vector<double> bracket_record)
        : std::runtime_error(what), bracket_record_(std::move(bracket_record)) {}
    const std::vector<double>& bracket_record() const noexcept { return bracket_record_; }

private:
    std::vector<double> bracket_record_;
};

/// Epsilon-insensitive loss max(|u| - epsilon, 0).
double eps_loss(double u, double epsilon) noexcept;

/// Density exp(-eps_loss(u, epsilon)) / (2 (1 + epsilon)): flat on
/// [-epsilon, epsilon] with unit-rate exponential tails.
double eps_laplacian_pdf(double u, double epsilon) noexcept;

/// Negative working log-likelihood of residuals U under scale s:
/// n log s + n log(2(1 + epsilon)) + sum eps_loss(U_i / s, epsilon).
double neg_log_lik(std::span<const double> residuals, double epsilon, double s);

struct NllGradient {
    double d_epsilon;
    double d_s;
};

/// Analytic partial derivatives of neg_log_lik (valid between breakpoints).
NllGradient neg_log_lik_gradient(std::span<const double> residuals, double epsilon, double s);

enum class FitBoundary { Interior, ZeroEpsilon, EpsilonCap };

struct WorkingLikelihoodFit {
    double epsilon_hat = 0.0;
    double s_hat = 1.0;
    double neg_log_lik = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Largest violation of the stationarity equations at the returned point;
    /// see fixed_point_residual().
    double fixed_point_residual = 0.0;
    FitBoundary boundary = FitBoundary::Interior;
};

struct EstimateOptions {
    double epsilon_max = 20.0;
    int max_fixed_point_iterations = 500;
    double s_damping = 0.5;
    /// Minimum sample count.
    std::size_t min_samples = 10;
};

/**
 * Violation of the stationarity equations at (epsilon, s):
 *
 *     epsilon = #{|U_i/s| <= epsilon} / #{|U_i/s| > epsilon}
 *     s       = (1/n) sum |U_i| 1{|U_i/s| > epsilon}
 *
 * A residual lying exactly on the tube edge (|U_i| = epsilon s) belongs to
 * the subdifferential on both sides, so it may count fractionally as outside;
 * the reported value is the smallest violation over that choice. The epsilon
 * equation is measured in absolute terms, the s equation relative to s.
 * At epsilon = 0 only the s equation is checked (the epsilon derivative is
 * nonnegative there by construction); on the epsilon cap the epsilon equation
 * is replaced by its one-sided inequality.
 */
double fixed_point_residual(std::span<const double> residuals, double epsilon, double s,
                            FitBoundary boundary = FitBoundary::Interior);

/**
 * Minimizes the working negative log-likelihood over epsilon in
 * [0, epsilon_max] and s > 0.
 *
 * Throws ValidationError when fewer than min_samples residuals are given and
 * DegenerateResiduals when every residual is zero.
 */
WorkingLikelihoodFit estimate(std::span<const double> residuals, const EstimateOptions& options = {});

/// Draws from eps_laplacian_pdf (unit scale) by inversion.
std::vector<double> sample_eps_laplacian(RngStream& rng, double epsilon, std::size_t n);

struct LimitingParams {
    double epsilon_star = 0.0;
    double s_star = 1.0;
    double integration_error = 0.0;
    FitBoundary boundary = FitBoundary::Interior;
    /// |1/(1+eps) - Pr(|U| > eps s)| at the solution.
    double tail_equation_residual = 0.0;
    /// |s - E|U| 1{|U| > eps s}| / s at the solution.
    double scale_equation_residual = 0.0;
};

struct LimitingOptions {
    double epsilon_max = 20.0;
    std::size_t grid_points = 400;
    double quadrature_tolerance = 1e-13;
    double normalization_tolerance = 1e-8;
};

/**
 * Large-sample limit of estimate() when the residual density is `noise_pdf`
 * (supported, up to negligible mass, on [-support_bound, support_bound]).
 *
 * The population objective is profiled over epsilon: for each epsilon the
 * scale solves s = E|U| 1{|U| > epsilon s}; the profile is then minimized and
 * the tail equation 1/(1+epsilon) = Pr(|U| > epsilon s) polished by root
 * finding. When the minimum sits on epsilon = 0 or epsilon_max (uniform
 * noise drives epsilon to the cap) the boundary is reported.
 */
LimitingParams limiting_params(const std::function<double(double)>& noise_pdf, double support_bound,
                               const LimitingOptions& options = {});

struct CurvePoint {
    double epsilon;
    double s;
    double neg_log_lik;
};

/// Scale minimizing neg_log_lik at fixed epsilon.
double profile_scale(std::span<const double> residuals, double epsilon);

/// neg_log_lik over the Cartesian grid epsilons x scales (epsilon-major).
std::vector<CurvePoint> likelihood_curve(std::span<const double> residuals,
                                         std::span<const double> epsilons,
                                         std::span<const double> scales);

}  // namespace ddsvr
