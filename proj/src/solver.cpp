#include "ddsvr/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ddsvr {

void SvrConfig::validate() const {
    if (!(c > 0.0) || !std::isfinite(c)) {
        throw ValidationError("C must be positive and finite");
    }
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
        throw ValidationError("epsilon must be nonnegative and finite");
    }
    if (!(tol_kkt > 0.0)) {
        throw ValidationError("tol_kkt must be positive");
    }
    if (!(max_relative_gap > 0.0)) {
        throw ValidationError("max_relative_gap must be positive");
    }
    kernel.validate();
}

namespace {

constexpr double kTau = 1e-12;
constexpr double kTightestTol = 1e-13;

/// Working state of the 2n-variable problem. Variable t < n is alpha_t
/// (sign +1); t >= n is alpha*_{t-n} (sign -1).
class SmoSolver {
public:
    SmoSolver(const Dataset& train, const SvrConfig& config)
        : train_(train), config_(config), n_(train.rows()),
          cache_(config.kernel, train, config.cache_bytes),
          alpha_(2 * n_, 0.0), grad_(2 * n_), linear_(2 * n_) {
        const auto& y = train.targets();
        for (std::size_t k = 0; k < n_; ++k) {
            linear_[k] = config.epsilon - y[k];
            linear_[k + n_] = config.epsilon + y[k];
        }
        grad_ = linear_;
    }

    static double sign(std::size_t t, std::size_t n) noexcept { return t < n ? 1.0 : -1.0; }

    bool in_up(std::size_t t) const noexcept {
        return t < n_ ? alpha_[t] < config_.c : alpha_[t] > 0.0;
    }
    bool in_low(std::size_t t) const noexcept {
        return t < n_ ? alpha_[t] > 0.0 : alpha_[t] < config_.c;
    }

    struct Selection {
        std::size_t i = 0;
        std::size_t j = 0;
        double up = -std::numeric_limits<double>::infinity();
        double low = std::numeric_limits<double>::infinity();
        double gap() const noexcept { return up - low; }
    };

    Selection select() const noexcept {
        Selection sel;
        for (std::size_t t = 0; t < 2 * n_; ++t) {
            const double v = -sign(t, n_) * grad_[t];
            if (in_up(t) && v > sel.up) {
                sel.up = v;
                sel.i = t;
            }
            if (in_low(t) && v < sel.low) {
                sel.low = v;
                sel.j = t;
            }
        }
        return sel;
    }

    void update_pair(std::size_t i, std::size_t j) {
        const std::size_t ki = i % n_;
        const std::size_t kj = j % n_;
        const double yi = sign(i, n_);
        const double yj = sign(j, n_);
        const auto row_i = cache_.row(ki);
        const auto row_j = cache_.row(kj);
        const double c = config_.c;
        const double qii = cache_.diagonal(ki);
        const double qjj = cache_.diagonal(kj);
        const double qij = yi * yj * row_i[kj];

        const double old_i = alpha_[i];
        const double old_j = alpha_[j];
        double& ai = alpha_[i];
        double& aj = alpha_[j];
        if (yi != yj) {
            double quad = qii + qjj + 2.0 * qij;
            if (quad <= 0.0) {
                quad = kTau;
            }
            const double delta = (-grad_[i] - grad_[j]) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0.0) {
                if (aj < 0.0) {
                    aj = 0.0;
                    ai = diff;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = -diff;
            }
            if (diff > 0.0) {
                if (ai > c) {
                    ai = c;
                    aj = c - diff;
                }
            } else if (aj > c) {
                aj = c;
                ai = c + diff;
            }
        } else {
            double quad = qii + qjj - 2.0 * qij;
            if (quad <= 0.0) {
                quad = kTau;
            }
            const double delta = (grad_[i] - grad_[j]) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > c) {
                if (ai > c) {
                    ai = c;
                    aj = sum - c;
                }
            } else if (aj < 0.0) {
                aj = 0.0;
                ai = sum;
            }
            if (sum > c) {
                if (aj > c) {
                    aj = c;
                    ai = sum - c;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = sum;
            }
        }

        const double di = (ai - old_i) * yi;
        const double dj = (aj - old_j) * yj;
        if (di == 0.0 && dj == 0.0) {
            return;
        }
        for (std::size_t k = 0; k < n_; ++k) {
            const double dk = di * row_i[k] + dj * row_j[k];
            grad_[k] += dk;
            grad_[k + n_] -= dk;
        }
    }

    std::vector<double> beta() const {
        std::vector<double> b(n_);
        for (std::size_t k = 0; k < n_; ++k) {
            b[k] = alpha_[k] - alpha_[k + n_];
        }
        return b;
    }

    /// -(1/2 a'Qa + p'a)
    double dual_objective() const noexcept {
        double f = 0.0;
        for (std::size_t t = 0; t < 2 * n_; ++t) {
            f += alpha_[t] * (grad_[t] + linear_[t]);
        }
        return -0.5 * f;
    }

    double bias(const Selection& sel, std::size_t& free_count) const noexcept {
        double sum = 0.0;
        free_count = 0;
        for (std::size_t t = 0; t < 2 * n_; ++t) {
            if (alpha_[t] > 0.0 && alpha_[t] < config_.c) {
                sum += -sign(t, n_) * grad_[t];
                ++free_count;
            }
        }
        if (free_count > 0) {
            return sum / static_cast<double>(free_count);
        }
        return 0.5 * (sel.up + sel.low);
    }

    /// (K beta)_k recovered from the gradient of alpha_k.
    double kernel_expansion(std::size_t k) const noexcept {
        return grad_[k] - config_.epsilon + train_.targets()[k];
    }

    SolveDiagnostics objectives(double b) const {
        SolveDiagnostics d;
        const auto& y = train_.targets();
        double quad = 0.0;
        double slack = 0.0;
        double alpha_sum = 0.0;
        double linear = 0.0;
        for (std::size_t k = 0; k < n_; ++k) {
            const double beta_k = alpha_[k] - alpha_[k + n_];
            const double kb = kernel_expansion(k);
            quad += beta_k * kb;
            slack += std::max(std::abs(y[k] - kb - b) - config_.epsilon, 0.0);
            alpha_sum += alpha_[k] + alpha_[k + n_];
            linear += y[k] * beta_k;
        }
        d.primal_objective = 0.5 * quad + config_.c * slack;
        d.dual_objective = -0.5 * quad - config_.epsilon * alpha_sum + linear;
        const double scale = std::max({std::abs(d.primal_objective), std::abs(d.dual_objective), 1.0});
        d.relative_gap = (d.primal_objective - d.dual_objective) / scale;
        return d;
    }

    std::size_t n() const noexcept { return n_; }

private:
    const Dataset& train_;
    const SvrConfig& config_;
    std::size_t n_;
    KernelCache cache_;
    std::vector<double> alpha_;
    std::vector<double> grad_;
    std::vector<double> linear_;
};

SvrModel make_model(const Dataset& train, const SvrConfig& config, std::vector<double> beta,
                    double bias, const SolveDiagnostics& diag) {
    SvrModel model;
    model.beta = std::move(beta);
    model.bias = bias;
    for (std::size_t k = 0; k < model.beta.size(); ++k) {
        if (model.beta[k] != 0.0) {
            model.support_indices.push_back(k);
        }
    }
    model.config = config;
    model.train_ref = train;
    model.diagnostics = diag;
    return model;
}

}  // namespace

SvrModel solve_svr(const Dataset& train, const SvrConfig& config, const SolveObserver& observer) {
    config.validate();
    if (train.rows() < 2) {
        throw ValidationError("SVR training needs at least 2 rows");
    }
    train.require_finite();

    SmoSolver smo(train, config);
    const std::size_t n = train.rows();
    // A pass is n pair updates.
    const std::size_t passes = config.max_passes > 0 ? config.max_passes : 10 * n;
    const std::size_t budget = passes >= kMaxPairUpdates / n ? kMaxPairUpdates : passes * n;

    double tol = config.tol_kkt;
    std::size_t iter = 0;
    for (;;) {
        const auto sel = smo.select();
        if (sel.gap() < tol) {
            std::size_t free_count = 0;
            const double b = smo.bias(sel, free_count);
            auto diag = smo.objectives(b);
            if (diag.relative_gap <= config.max_relative_gap || tol <= kTightestTol) {
                diag.iterations = iter;
                diag.kkt_violation = std::max(sel.gap(), 0.0);
                diag.free_vectors = free_count;
                return make_model(train, config, smo.beta(), b, diag);
            }
            tol = std::max(tol * 0.1, kTightestTol);
            continue;
        }
        if (iter >= budget) {
            std::size_t free_count = 0;
            const double b = smo.bias(sel, free_count);
            auto diag = smo.objectives(b);
            diag.iterations = iter;
            diag.kkt_violation = sel.gap();
            diag.free_vectors = free_count;
            auto best = std::make_shared<const SvrModel>(make_model(train, config, smo.beta(), b, diag));
            throw SolverNotConverged("SMO did not converge within " + std::to_string(budget) +
                                         " pair updates (KKT gap " + std::to_string(sel.gap()) + ")",
                                     std::move(best), sel.gap());
        }
        smo.update_pair(sel.i, sel.j);
        ++iter;
        if (observer) {
            const auto beta = smo.beta();
            double sum = 0.0;
            double max_abs = 0.0;
            for (double b : beta) {
                sum += b;
                max_abs = std::max(max_abs, std::abs(b));
            }
            observer(SolveStep{iter, smo.dual_objective(), beta, sum, max_abs});
        }
    }
}

double predict(const SvrModel& model, std::span<const double> x) {
    if (x.size() != model.train_ref.cols()) {
        throw ValidationError("prediction input has dimension " + std::to_string(x.size()) +
                              ", model expects " + std::to_string(model.train_ref.cols()));
    }
    double sum = 0.0;
    for (std::size_t k : model.support_indices) {
        sum += model.beta[k] * kernel_eval(model.config.kernel, model.train_ref.row(k), x);
    }
    return model.target_scale * (sum + model.bias);
}

std::vector<double> predict(const SvrModel& model, const Dataset& data) {
    std::vector<double> out(data.rows());
    for (std::size_t i = 0; i < data.rows(); ++i) {
        out[i] = predict(model, data.row(i));
    }
    return out;
}

std::vector<double> training_decision_values(const SvrModel& model) {
    const auto& train = model.train_ref;
    std::vector<double> f(train.rows(), model.bias);
    for (std::size_t k : model.support_indices) {
        const auto row = gram_row(model.config.kernel, train, k);
        for (std::size_t i = 0; i < train.rows(); ++i) {
            f[i] += model.beta[k] * row[i];
        }
    }
    return f;
}

namespace {

double quadratic_term(const SvrModel& model) {
    double quad = 0.0;
    for (std::size_t a : model.support_indices) {
        for (std::size_t b : model.support_indices) {
            quad += model.beta[a] * model.beta[b] *
                    kernel_eval(model.config.kernel, model.train_ref.row(a), model.train_ref.row(b));
        }
    }
    return quad;
}

}  // namespace

double primal_objective(const SvrModel& model) {
    const auto f = training_decision_values(model);
    const auto& y = model.train_ref.targets();
    double slack = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        slack += std::max(std::abs(y[i] - f[i]) - model.config.epsilon, 0.0);
    }
    return 0.5 * quadratic_term(model) + model.config.c * slack;
}

double dual_objective(const SvrModel& model) {
    const auto& y = model.train_ref.targets();
    double lin = 0.0;
    double abs_sum = 0.0;
    for (std::size_t k = 0; k < model.beta.size(); ++k) {
        lin += y[k] * model.beta[k];
        abs_sum += std::abs(model.beta[k]);
    }
    return -0.5 * quadratic_term(model) - model.config.epsilon * abs_sum + lin;
}

DdFit fit_dd(const Dataset& train, const KernelSpec& kernel, const DdOptions& options) {
    if (train.rows() < options.estimate.min_samples) {
        throw ValidationError("data-driven fit needs at least " +
                              std::to_string(options.estimate.min_samples) + " training rows");
    }
    SvrConfig pilot_cfg;
    pilot_cfg.c = options.c;
    pilot_cfg.epsilon = 0.0;
    pilot_cfg.kernel = kernel;
    pilot_cfg.tol_kkt = options.tol_kkt;
    const SvrModel pilot = solve_svr(train, pilot_cfg);

    DdFit out;
    const auto fitted = training_decision_values(pilot);
    out.pilot_residuals.resize(train.rows());
    double max_abs = 0.0;
    for (std::size_t i = 0; i < train.rows(); ++i) {
        out.pilot_residuals[i] = train.targets()[i] - fitted[i];
        max_abs = std::max(max_abs, std::abs(out.pilot_residuals[i]));
    }

    if (max_abs <= options.tol_kkt) {
        out.degenerate = true;
    } else {
        try {
            out.likelihood = estimate(out.pilot_residuals, options.estimate);
        } catch (const DegenerateResiduals&) {
            out.degenerate = true;
        }
    }
    if (out.degenerate) {
        out.likelihood = WorkingLikelihoodFit{};
        out.likelihood.epsilon_hat = 0.0;
        out.likelihood.s_hat = 1.0;
        out.likelihood.neg_log_lik = neg_log_lik(out.pilot_residuals, 0.0, 1.0);
        out.likelihood.converged = false;
        out.likelihood.boundary = FitBoundary::ZeroEpsilon;
    }

    const double s_hat = out.likelihood.s_hat;
    std::vector<double> scaled(train.targets());
    for (auto& v : scaled) {
        v /= s_hat;
    }
    SvrConfig refit_cfg = pilot_cfg;
    refit_cfg.epsilon = out.likelihood.epsilon_hat;
    out.model = solve_svr(train.with_targets(std::move(scaled)), refit_cfg);
    out.model.target_scale = s_hat;
    return out;
}

}  // namespace ddsvr
