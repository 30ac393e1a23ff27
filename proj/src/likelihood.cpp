#include "ddsvr/likelihood.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

namespace ddsvr {

double eps_loss(double u, double epsilon) noexcept {
    if (u > epsilon) {
        return u - epsilon;
    }
    if (u < -epsilon) {
        return -u - epsilon;
    }
    return 0.0;
}

double eps_laplacian_pdf(double u, double epsilon) noexcept {
    return std::exp(-eps_loss(u, epsilon)) / (2.0 * (1.0 + epsilon));
}

double neg_log_lik(std::span<const double> residuals, double epsilon, double s) {
    if (!(s > 0.0)) {
        throw ValidationError("scale s must be positive");
    }
    if (epsilon < 0.0) {
        throw ValidationError("epsilon must be nonnegative");
    }
    const auto n = static_cast<double>(residuals.size());
    double loss = 0.0;
    for (double u : residuals) {
        loss += eps_loss(u / s, epsilon);
    }
    return n * std::log(s) + n * std::log(2.0 * (1.0 + epsilon)) + loss;
}

NllGradient neg_log_lik_gradient(std::span<const double> residuals, double epsilon, double s) {
    if (!(s > 0.0)) {
        throw ValidationError("scale s must be positive");
    }
    const auto n = static_cast<double>(residuals.size());
    double outside = 0.0;
    double outside_abs = 0.0;
    for (double u : residuals) {
        if (std::abs(u / s) > epsilon) {
            outside += 1.0;
            outside_abs += std::abs(u);
        }
    }
    return {n / (1.0 + epsilon) - outside, n / s - outside_abs / (s * s)};
}

namespace {

/// Sorted absolute residuals with suffix sums, for O(log n) tail queries.
class TailTable {
public:
    explicit TailTable(std::span<const double> residuals) : abs_(residuals.size()) {
        std::transform(residuals.begin(), residuals.end(), abs_.begin(),
                       [](double u) { return std::abs(u); });
        std::sort(abs_.begin(), abs_.end());
        suffix_.assign(abs_.size() + 1, 0.0);
        for (std::size_t i = abs_.size(); i-- > 0;) {
            suffix_[i] = suffix_[i + 1] + abs_[i];
        }
    }

    std::size_t size() const noexcept { return abs_.size(); }
    const std::vector<double>& sorted() const noexcept { return abs_; }

    /// First index with |U| > t.
    std::size_t first_above(double t) const noexcept {
        return static_cast<std::size_t>(std::upper_bound(abs_.begin(), abs_.end(), t) - abs_.begin());
    }
    /// First index with |U| >= t.
    std::size_t first_at_or_above(double t) const noexcept {
        return static_cast<std::size_t>(std::lower_bound(abs_.begin(), abs_.end(), t) - abs_.begin());
    }
    double suffix_sum(std::size_t idx) const noexcept { return suffix_[idx]; }

private:
    std::vector<double> abs_;
    std::vector<double> suffix_;
};

struct Candidate {
    double epsilon = 0.0;
    double s = 0.0;
    double nll = std::numeric_limits<double>::infinity();
    FitBoundary boundary = FitBoundary::Interior;
};

/// Profile over the tube half-width t = epsilon * s. For fixed t the optimal
/// scale solves n s^2 - A s - A t = 0 with A = sum (|U_i| - t)_+.
void scan_profile(const TailTable& table, double epsilon_max, Candidate& best) {
    const auto& a = table.sorted();
    const std::size_t n = a.size();
    const double nd = static_cast<double>(n);

    auto consider = [&](double t, FitBoundary boundary) {
        const std::size_t idx = table.first_above(t);
        const std::size_t m = n - idx;
        if (m == 0) {
            return;
        }
        const double area = table.suffix_sum(idx) - static_cast<double>(m) * t;
        if (!(area > 0.0)) {
            return;
        }
        const double s = (area + std::sqrt(area * area + 4.0 * nd * area * t)) / (2.0 * nd);
        const double epsilon = t / s;
        if (!(s > 0.0) || epsilon > epsilon_max) {
            return;
        }
        const double nll = nd * std::log(s) + nd * std::log(2.0 * (1.0 + epsilon)) + area / s;
        if (nll < best.nll) {
            best = {epsilon, s, nll, boundary};
        }
    };

    consider(0.0, FitBoundary::ZeroEpsilon);
    double lo = 0.0;
    for (std::size_t k = 0; k < n;) {
        const double hi = a[k];
        std::size_t next = k;
        while (next < n && a[next] == hi) {
            ++next;
        }
        // Segment (lo, hi): residuals at or above hi are outside the tube.
        if (hi > lo) {
            const std::size_t m = n - k;
            const double outside_sum = table.suffix_sum(k);
            const double t_star = (nd - static_cast<double>(m)) * outside_sum /
                                  (static_cast<double>(m) * nd);
            if (t_star > lo && t_star < hi) {
                consider(t_star, FitBoundary::Interior);
            }
        }
        if (next < n) {
            consider(hi, hi > 0.0 ? FitBoundary::Interior : FitBoundary::ZeroEpsilon);
        }
        lo = hi;
        k = next;
    }
}

/// Scale profile along the line epsilon = epsilon_max (> 0).
void scan_cap(const TailTable& table, double epsilon_max, Candidate& best,
              FitBoundary boundary = FitBoundary::EpsilonCap) {
    const auto& a = table.sorted();
    const std::size_t n = a.size();
    const double nd = static_cast<double>(n);
    const double log_norm = nd * std::log(2.0 * (1.0 + epsilon_max));

    auto consider = [&](double s) {
        if (!(s > 0.0)) {
            return;
        }
        const double t = epsilon_max * s;
        const std::size_t idx = table.first_above(t);
        const double area = table.suffix_sum(idx) - static_cast<double>(n - idx) * t;
        const double nll = nd * std::log(s) + log_norm + area / s;
        if (nll < best.nll) {
            best = {epsilon_max, s, nll, boundary};
        }
    };

    double lo = 0.0;
    for (std::size_t k = 0; k < n;) {
        const double hi = a[k] / epsilon_max;
        std::size_t next = k;
        while (next < n && a[next] == a[k]) {
            ++next;
        }
        if (hi > lo) {
            const double s_star = table.suffix_sum(k) / nd;
            if (s_star > lo && s_star < hi) {
                consider(s_star);
            }
            consider(hi);
        }
        lo = hi;
        k = next;
    }
}

}  // namespace

double fixed_point_residual(std::span<const double> residuals, double epsilon, double s,
                            FitBoundary boundary) {
    if (!(s > 0.0)) {
        throw ValidationError("scale s must be positive");
    }
    const double nd = static_cast<double>(residuals.size());
    const double t = epsilon * s;
    const double edge_tol = 1e-9 * std::max(t, std::numeric_limits<double>::min());
    double strict_out = 0.0;
    double strict_sum = 0.0;
    double on_edge = 0.0;
    for (double u : residuals) {
        const double au = std::abs(u);
        if (t > 0.0 && std::abs(au - t) <= edge_tol) {
            on_edge += 1.0;
        } else if (au > t) {
            strict_out += 1.0;
            strict_sum += au;
        }
    }

    auto scale_violation = [&](double lambda_lo, double lambda_hi) {
        // Best edge weight for the scale equation within [lambda_lo, lambda_hi].
        double lambda = t > 0.0 ? (nd * s - strict_sum) / t : 0.0;
        lambda = std::clamp(lambda, lambda_lo, lambda_hi);
        return std::abs(s - (strict_sum + lambda * t) / nd) / s;
    };

    switch (boundary) {
        case FitBoundary::ZeroEpsilon:
            return scale_violation(0.0, on_edge);
        case FitBoundary::EpsilonCap: {
            // Need d/d(epsilon) <= 0: outside count >= n / (1 + epsilon).
            const double need = nd / (1.0 + epsilon) - strict_out;
            if (need > on_edge) {
                return (need - on_edge) / nd + scale_violation(on_edge, on_edge);
            }
            return scale_violation(std::max(need, 0.0), on_edge);
        }
        case FitBoundary::Interior:
            break;
    }
    const double lambda = std::clamp(nd / (1.0 + epsilon) - strict_out, 0.0, on_edge);
    const double outside = strict_out + lambda;
    if (outside <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    const double eps_fp = (nd - outside) / outside;
    const double s_fp = (strict_sum + lambda * t) / nd;
    return std::max(std::abs(epsilon - eps_fp), std::abs(s - s_fp) / s);
}

WorkingLikelihoodFit estimate(std::span<const double> residuals, const EstimateOptions& options) {
    if (residuals.size() < options.min_samples) {
        throw ValidationError("likelihood estimation needs at least " +
                              std::to_string(options.min_samples) + " residuals, got " +
                              std::to_string(residuals.size()));
    }
    for (double u : residuals) {
        if (!std::isfinite(u)) {
            throw ValidationError("non-finite residual");
        }
    }
    if (std::all_of(residuals.begin(), residuals.end(), [](double u) { return u == 0.0; })) {
        throw DegenerateResiduals("all residuals are zero; the noise scale is not identifiable");
    }
    if (!(options.epsilon_max > 0.0)) {
        throw ValidationError("epsilon_max must be positive");
    }

    const TailTable table(residuals);
    const double nd = static_cast<double>(residuals.size());

    // Damped fixed-point iteration on the stationarity equations.
    Candidate fixed_point;
    double epsilon = 0.0;
    double s = table.suffix_sum(0) / nd;
    int iterations = 0;
    for (; iterations < options.max_fixed_point_iterations; ++iterations) {
        const std::size_t idx = table.first_above(epsilon * s);
        const std::size_t outside = residuals.size() - idx;
        if (outside == 0) {
            break;
        }
        const double eps_next = std::min(options.epsilon_max,
                                         static_cast<double>(idx) / static_cast<double>(outside));
        const double s_next = (1.0 - options.s_damping) * (table.suffix_sum(idx) / nd) +
                              options.s_damping * s;
        const bool settled = std::abs(eps_next - epsilon) <= 1e-14 * (1.0 + epsilon) &&
                             std::abs(s_next - s) <= 1e-14 * s;
        epsilon = eps_next;
        s = s_next;
        if (settled) {
            ++iterations;
            break;
        }
    }
    if (s > 0.0) {
        fixed_point = {epsilon, s, neg_log_lik(residuals, epsilon, s),
                       epsilon == 0.0 ? FitBoundary::ZeroEpsilon
                       : epsilon >= options.epsilon_max ? FitBoundary::EpsilonCap
                                                        : FitBoundary::Interior};
    }

    // Exact search over the piecewise-smooth profile, interior and cap.
    Candidate best;
    scan_profile(table, options.epsilon_max, best);
    scan_cap(table, options.epsilon_max, best);
    if (std::isfinite(best.nll)) {
        best.nll = neg_log_lik(residuals, best.epsilon, best.s);
    }
    if (fixed_point.nll < best.nll) {
        best = fixed_point;
    }

    WorkingLikelihoodFit fit;
    fit.epsilon_hat = best.epsilon;
    fit.s_hat = best.s;
    fit.neg_log_lik = best.nll;
    fit.iterations = iterations;
    fit.boundary = best.boundary;
    fit.fixed_point_residual = fixed_point_residual(residuals, best.epsilon, best.s, best.boundary);
    fit.converged = fit.fixed_point_residual <= 1e-6;
    return fit;
}

std::vector<double> sample_eps_laplacian(RngStream& rng, double epsilon, std::size_t n) {
    if (epsilon < 0.0) {
        throw ValidationError("epsilon must be nonnegative");
    }
    const double inside_mass = epsilon / (1.0 + epsilon);
    std::vector<double> out(n);
    for (auto& u : out) {
        if (rng.uniform() < inside_mass) {
            u = rng.uniform(-epsilon, epsilon);
        } else {
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            u = sign * (epsilon + rng.exponential());
        }
    }
    return out;
}

namespace {

/// Tail functionals of a residual density on [-bound, bound].
class TailIntegrals {
public:
    TailIntegrals(const std::function<double(double)>& pdf, double bound, double tol)
        : pdf_(pdf), bound_(bound), tol_(tol) {}

    /// Kronrod panels refined until each panel agrees with its two halves.
    /// A kink near a panel end can fool the embedded Gauss estimate, so the
    /// halves comparison is used instead.
    double integrate(const std::function<double(double)>& f, double lo, double hi) {
        if (!(hi > lo)) {
            return 0.0;
        }
        constexpr int kPanels = 32;
        const double width = (hi - lo) / kPanels;
        double total = 0.0;
        for (int k = 0; k < kPanels; ++k) {
            const double a = lo + k * width;
            const double b = k + 1 == kPanels ? hi : a + width;
            total += refine(f, a, b, panel(f, a, b), 0);
        }
        return total;
    }

    /// Pr(|U| > t)
    double tail_prob(double t) {
        if (t >= bound_) {
            return 0.0;
        }
        return integrate(pdf_, t, bound_) + integrate(pdf_, -bound_, -t);
    }

    /// E |U| 1{|U| > t}
    double tail_abs(double t) {
        if (t >= bound_) {
            return 0.0;
        }
        return integrate([this](double u) { return u * pdf_(u); }, t, bound_) +
               integrate([this](double u) { return -u * pdf_(u); }, -bound_, -t);
    }

    double mass() { return integrate(pdf_, -bound_, bound_); }

    void reset_error() { last_error_ = 0.0; }
    double error() const { return last_error_; }

private:
    static double panel(const std::function<double(double)>& f, double a, double b) {
        return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 0, 0.0);
    }

    double refine(const std::function<double(double)>& f, double a, double b, double whole, int depth) {
        const double m = 0.5 * (a + b);
        const double left = panel(f, a, m);
        const double right = panel(f, m, b);
        const double diff = std::abs(left + right - whole);
        if (diff <= tol_ * std::max(1.0, std::abs(left + right)) || depth >= 40) {
            last_error_ += diff;
            return left + right;
        }
        return refine(f, a, m, left, depth + 1) + refine(f, m, b, right, depth + 1);
    }

    const std::function<double(double)>& pdf_;
    double bound_;
    double tol_;
    double last_error_ = 0.0;
};

}  // namespace

LimitingParams limiting_params(const std::function<double(double)>& noise_pdf, double support_bound,
                               const LimitingOptions& options) {
    if (!(support_bound > 0.0) || !std::isfinite(support_bound)) {
        throw ValidationError("support_bound must be positive and finite");
    }
    if (options.grid_points < 3) {
        throw ValidationError("limiting_params needs at least 3 grid points");
    }
    TailIntegrals tails(noise_pdf, support_bound, options.quadrature_tolerance);
    const double mass = tails.mass();
    if (std::abs(mass - 1.0) > options.normalization_tolerance) {
        throw ValidationError("noise density integrates to " + std::to_string(mass) +
                              " over the support bound, not 1");
    }
    const double mean_abs = tails.tail_abs(0.0);
    if (!(mean_abs > 0.0)) {
        throw ValidationError("noise density has zero mean absolute value");
    }

    // For fixed epsilon, s solves s = E|U| 1{|U| > epsilon s}; the left side
    // minus the right is increasing in s.
    auto scale_for = [&](double epsilon) {
        if (epsilon == 0.0) {
            return mean_abs;
        }
        auto phi = [&](double s) { return s - tails.tail_abs(epsilon * s); };
        double lo = mean_abs * 1e-12;
        const double hi = mean_abs;
        if (phi(hi) <= 0.0) {
            return hi;
        }
        std::uintmax_t max_iter = 200;
        const auto [a, b] = boost::math::tools::toms748_solve(
            phi, lo, hi, boost::math::tools::eps_tolerance<double>(52), max_iter);
        return 0.5 * (a + b);
    };
    auto profile = [&](double epsilon) {
        const double s = scale_for(epsilon);
        const double t = epsilon * s;
        const double expected_loss = (tails.tail_abs(t) - t * tails.tail_prob(t)) / s;
        return std::log(s) + std::log(2.0 * (1.0 + epsilon)) + expected_loss;
    };

    const double eps_max = options.epsilon_max;
    const std::size_t m = options.grid_points;
    std::vector<double> grid(m);
    std::vector<double> values(m);
    std::size_t best = 0;
    for (std::size_t k = 0; k < m; ++k) {
        const double r = static_cast<double>(k) / static_cast<double>(m - 1);
        grid[k] = eps_max * r * r;
        values[k] = profile(grid[k]);
        if (values[k] < values[best]) {
            best = k;
        }
    }
    const double lo = grid[best == 0 ? 0 : best - 1];
    const double hi = grid[std::min(best + 1, m - 1)];
    std::uintmax_t max_iter = 500;
    auto [eps_min, g_min] = boost::math::tools::brent_find_minima(profile, lo, hi, 40, max_iter);
    if (values[best] < g_min) {
        eps_min = grid[best];
    }

    LimitingParams out;
    const double edge = 1e-7 * (1.0 + eps_max);
    if (eps_min <= edge && profile(0.0) <= profile(eps_min)) {
        out.boundary = FitBoundary::ZeroEpsilon;
        eps_min = 0.0;
    } else if (eps_min >= eps_max - edge && profile(eps_max) <= profile(eps_min)) {
        out.boundary = FitBoundary::EpsilonCap;
        eps_min = eps_max;
    } else {
        // Polish: the profile derivative is 1/(1+eps) - Pr(|U| > eps s(eps)).
        auto slope = [&](double epsilon) {
            const double s = scale_for(epsilon);
            return 1.0 / (1.0 + epsilon) - tails.tail_prob(epsilon * s);
        };
        double a = std::max(lo, edge);
        double b = hi;
        double fa = slope(a);
        double fb = slope(b);
        if (fa < 0.0 && fb > 0.0) {
            std::uintmax_t root_iter = 200;
            const auto [r0, r1] = boost::math::tools::toms748_solve(
                slope, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(50), root_iter);
            eps_min = 0.5 * (r0 + r1);
        } else if (!(std::abs(slope(eps_min)) < 1e-8)) {
            std::vector<double> record{lo, hi, a, fa, b, fb, eps_min};
            throw NoRootInBracket("tail equation has no sign change around the profile minimum",
                                  std::move(record));
        }
    }

    tails.reset_error();
    const double s_star = scale_for(eps_min);
    const double t = eps_min * s_star;
    tails.reset_error();
    const double p = tails.tail_prob(t);
    const double tail_abs = tails.tail_abs(t);
    out.epsilon_star = eps_min;
    out.s_star = s_star;
    out.integration_error = tails.error();
    out.tail_equation_residual = std::abs(1.0 / (1.0 + eps_min) - p);
    out.scale_equation_residual = std::abs(s_star - tail_abs) / s_star;
    if (out.scale_equation_residual > 1e-6) {
        std::vector<double> record{eps_min, s_star, tail_abs};
        throw NoRootInBracket("scale equation unresolved at the profile minimum", std::move(record));
    }
    return out;
}

double profile_scale(std::span<const double> residuals, double epsilon) {
    if (residuals.empty()) {
        throw ValidationError("profile_scale needs residuals");
    }
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
        throw ValidationError("epsilon must be finite and nonnegative");
    }
    const TailTable table(residuals);
    if (!(table.suffix_sum(0) > 0.0)) {
        throw DegenerateResiduals("all residuals are zero; the noise scale is not identifiable");
    }
    if (epsilon == 0.0) {
        return table.suffix_sum(0) / static_cast<double>(table.size());
    }
    Candidate best;
    scan_cap(table, epsilon, best, FitBoundary::Interior);
    return best.s;
}

std::vector<CurvePoint> likelihood_curve(std::span<const double> residuals,
                                         std::span<const double> epsilons,
                                         std::span<const double> scales) {
    std::vector<CurvePoint> out;
    out.reserve(epsilons.size() * scales.size());
    for (double e : epsilons) {
        for (double s : scales) {
            out.push_back({e, s, neg_log_lik(residuals, e, s)});
        }
    }
    return out;
}

}  // namespace ddsvr
