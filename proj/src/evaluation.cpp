#include "ddsvr/evaluation.hpp"

#include "ddsvr/rng.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>

namespace ddsvr {

std::string to_string(MethodId method) {
    switch (method) {
        case MethodId::Tuning:
            return "tuning";
        case MethodId::CM:
            return "cm";
        case MethodId::KCv:
            return "kcv";
        case MethodId::DD:
            return "dd";
    }
    return "unknown";
}

MethodId parse_method(const std::string& name) {
    if (name == "tuning") {
        return MethodId::Tuning;
    }
    if (name == "cm") {
        return MethodId::CM;
    }
    if (name == "kcv") {
        return MethodId::KCv;
    }
    if (name == "dd") {
        return MethodId::DD;
    }
    throw ValidationError("unknown method '" + name + "' (expected tuning, cm, kcv or dd)");
}

namespace {

void check_pair(std::span<const double> pred, std::span<const double> truth) {
    if (pred.empty()) {
        throw ValidationError("metric needs at least one prediction");
    }
    if (pred.size() != truth.size()) {
        throw ValidationError("prediction/truth length mismatch: " + std::to_string(pred.size()) +
                              " vs " + std::to_string(truth.size()));
    }
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth) {
    check_pair(pred, truth);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        sum += std::abs(pred[i] - truth[i]);
    }
    return sum / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
    check_pair(pred, truth);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(pred.size()));
}

double sample_std(std::span<const double> values) {
    if (values.size() < 2) {
        throw ValidationError("sample standard deviation needs at least 2 values");
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                        static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double cm_epsilon(double sigma_noise, std::size_t n) {
    if (n < 2) {
        throw ValidationError("CM epsilon needs n >= 2");
    }
    if (sigma_noise < 0.0) {
        throw ValidationError("noise standard deviation must be nonnegative");
    }
    const double nd = static_cast<double>(n);
    return 3.0 * sigma_noise * std::sqrt(std::log(nd) / nd);
}

double c_cm(std::span<const double> targets) {
    if (targets.empty()) {
        throw ValidationError("C_CM needs at least one target");
    }
    std::vector<double> abs_y(targets.size());
    std::transform(targets.begin(), targets.end(), abs_y.begin(), [](double v) { return std::abs(v); });
    std::sort(abs_y.begin(), abs_y.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(abs_y.size())));
    return abs_y[std::max<std::size_t>(rank, 1) - 1];
}

std::vector<std::vector<std::size_t>> kfold_partition(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) {
        throw ValidationError("k-fold needs k >= 2");
    }
    if (k > n) {
        throw ValidationError("k-fold with k = " + std::to_string(k) + " exceeds n = " + std::to_string(n));
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    RngStream rng(seed, 1);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::swap(perm[i], perm[static_cast<std::size_t>(rng.below(i + 1))]);
    }
    std::vector<std::vector<std::size_t>> folds(k);
    for (std::size_t p = 0; p < n; ++p) {
        folds[p % k].push_back(perm[p]);
    }
    for (auto& f : folds) {
        std::sort(f.begin(), f.end());
    }
    return folds;
}

double kcv_select(const Dataset& train, std::size_t k, std::span<const double> candidates,
                  const KernelSpec& kernel, double c, std::uint64_t seed, double tol_kkt) {
    if (candidates.empty()) {
        throw ValidationError("k-CV needs at least one candidate epsilon");
    }
    for (double e : candidates) {
        if (!(e >= 0.0) || !std::isfinite(e)) {
            throw ValidationError("k-CV candidate epsilons must be finite and nonnegative");
        }
    }
    std::vector<double> sorted(candidates.begin(), candidates.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (sorted.size() == 1) {
        return sorted.front();
    }

    const auto folds = kfold_partition(train.rows(), k, seed);
    std::vector<Dataset> fit_sets;
    std::vector<Dataset> val_sets;
    for (const auto& fold : folds) {
        std::vector<char> in_fold(train.rows(), 0);
        for (std::size_t i : fold) {
            in_fold[i] = 1;
        }
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < train.rows(); ++i) {
            if (!in_fold[i]) {
                rest.push_back(i);
            }
        }
        fit_sets.push_back(train.subset(rest));
        val_sets.push_back(train.subset(fold));
    }

    double best_eps = sorted.front();
    double best_score = std::numeric_limits<double>::infinity();
    for (double eps : sorted) {
        SvrConfig cfg;
        cfg.c = c;
        cfg.epsilon = eps;
        cfg.kernel = kernel;
        cfg.tol_kkt = tol_kkt;
        double total = 0.0;
        for (std::size_t f = 0; f < folds.size(); ++f) {
            const auto model = solve_svr(fit_sets[f], cfg);
            const auto pred = predict(model, val_sets[f]);
            total += rmse(pred, val_sets[f].targets());
        }
        const double score = total / static_cast<double>(folds.size());
        if (score < best_score) {
            best_score = score;
            best_eps = eps;
        }
    }
    return best_eps;
}

namespace {

SvrConfig make_config(double c, double eps, const KernelSpec& kernel, double tol) {
    SvrConfig cfg;
    cfg.c = c;
    cfg.epsilon = eps;
    cfg.kernel = kernel;
    cfg.tol_kkt = tol;
    return cfg;
}

std::vector<double> residuals_of(const SvrModel& model) {
    const auto fitted = training_decision_values(model);
    std::vector<double> out(fitted.size());
    for (std::size_t i = 0; i < fitted.size(); ++i) {
        out[i] = model.train_ref.targets()[i] - fitted[i];
    }
    return out;
}

}  // namespace

TrainedMethod fit_method(MethodId method, const Dataset& train, const KernelSpec& kernel,
                         const MethodSettings& settings) {
    const double c = settings.c_rule == CRule::Cm ? c_cm(train.targets()) : settings.c;
    TrainedMethod out;
    out.c_used = c;
    switch (method) {
        case MethodId::Tuning:
            out.c_used = settings.tuning_c;
            out.epsilon_used = settings.tuning_epsilon;
            break;
        case MethodId::CM: {
            const auto pilot = solve_svr(train, make_config(c, 0.0, kernel, settings.tol_kkt));
            out.epsilon_used = cm_epsilon(sample_std(residuals_of(pilot)), train.rows());
            break;
        }
        case MethodId::KCv:
            out.epsilon_used = kcv_select(train, settings.folds, settings.candidates, kernel, c,
                                          settings.fold_seed, settings.tol_kkt);
            break;
        case MethodId::DD: {
            DdOptions opts;
            opts.c = c;
            opts.tol_kkt = settings.tol_kkt;
            auto fit = fit_dd(train, kernel, opts);
            out.epsilon_used = fit.likelihood.epsilon_hat;
            out.s_hat = fit.likelihood.s_hat;
            out.model = std::move(fit.model);
            return out;
        }
    }
    out.model = solve_svr(train, make_config(out.c_used, out.epsilon_used, kernel, settings.tol_kkt));
    return out;
}

MetricReport run_method(MethodId method, const Dataset& train, const Dataset& test,
                        const KernelSpec& kernel, const MethodSettings& settings,
                        std::span<const double> truth) {
    if (train.cols() != test.cols()) {
        throw ValidationError("train and test differ in feature count");
    }
    const std::span<const double> target = truth.empty() ? std::span<const double>(test.targets()) : truth;
    const auto trained = fit_method(method, train, kernel, settings);
    const auto pred = predict(trained.model, test);

    MetricReport report;
    report.method = method;
    report.seed = settings.fold_seed;
    report.epsilon_used = trained.epsilon_used;
    report.c_used = trained.c_used;
    report.s_hat = trained.s_hat;
    report.mae = mae(pred, target);
    report.rmse = rmse(pred, target);
    return report;
}

void attach_ratios(MetricReport& report, const MetricReport& tuning) {
    report.ratio_mae = tuning.mae / report.mae;
    report.ratio_rmse = tuning.rmse / report.rmse;
}

std::vector<MetricReport> run_methods(std::span<const MethodId> methods, const Dataset& train,
                                      const Dataset& test, const KernelSpec& kernel,
                                      const MethodSettings& settings, std::span<const double> truth) {
    std::vector<MetricReport> out;
    std::optional<MetricReport> tuning;
    for (MethodId m : methods) {
        out.push_back(run_method(m, train, test, kernel, settings, truth));
        if (m == MethodId::Tuning && !tuning) {
            tuning = out.back();
        }
    }
    if (!tuning) {
        tuning = run_method(MethodId::Tuning, train, test, kernel, settings, truth);
    }
    for (auto& r : out) {
        attach_ratios(r, *tuning);
    }
    return out;
}

std::vector<MethodAggregate> aggregate_repetitions(std::span<const RepetitionOutcome> outcomes,
                                                   std::span<const MethodId> methods) {
    const std::size_t m = methods.size();
    std::vector<double> sum_mae(m, 0.0);
    std::vector<double> sum_rmse(m, 0.0);
    std::vector<double> sum_eps(m, 0.0);
    std::vector<double> sum_s(m, 0.0);
    double tuning_mae = 0.0;
    double tuning_rmse = 0.0;
    std::size_t completed = 0;
    std::size_t failed = 0;
    std::string first_failure;
    for (const auto& o : outcomes) {
        if (!o.reports) {
            if (failed++ == 0) {
                first_failure = o.error;
            }
            continue;
        }
        const auto& reps = *o.reports;
        if (reps.size() != m) {
            throw std::logic_error("repetition report count does not match the method list");
        }
        ++completed;
        for (std::size_t k = 0; k < m; ++k) {
            sum_mae[k] += reps[k].mae;
            sum_rmse[k] += reps[k].rmse;
            sum_eps[k] += reps[k].epsilon_used;
            sum_s[k] += reps[k].s_hat.value_or(0.0);
        }
        // ratio = tuning / method, so the tuning error is ratio * method error.
        tuning_mae += reps[0].ratio_mae.value_or(1.0) * reps[0].mae;
        tuning_rmse += reps[0].ratio_rmse.value_or(1.0) * reps[0].rmse;
    }
    std::vector<MethodAggregate> out;
    for (std::size_t k = 0; k < m; ++k) {
        MethodAggregate a;
        a.method = methods[k];
        a.completed = completed;
        a.failed = failed;
        a.first_failure = first_failure;
        if (completed > 0) {
            const double c = static_cast<double>(completed);
            a.mean_mae = sum_mae[k] / c;
            a.mean_rmse = sum_rmse[k] / c;
            a.mean_epsilon = sum_eps[k] / c;
            a.ratio_mae = tuning_mae / sum_mae[k];
            a.ratio_rmse = tuning_rmse / sum_rmse[k];
            if (a.method == MethodId::DD) {
                a.mean_s_hat = sum_s[k] / c;
            }
        } else {
            a.mean_mae = a.mean_rmse = a.ratio_mae = a.ratio_rmse = a.mean_epsilon =
                std::numeric_limits<double>::quiet_NaN();
        }
        out.push_back(std::move(a));
    }
    return out;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job) {
    unsigned t = threads != 0 ? threads : std::max(1u, std::thread::hardware_concurrency());
    t = static_cast<unsigned>(std::min<std::size_t>(t, count));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            job(i);
        }
    };
    if (t <= 1) {
        work();
        return;
    }
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < t; ++k) {
        pool.emplace_back(work);
    }
}

std::string format_real(double value) {
    if (!std::isfinite(value)) {
        return "NA";
    }
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

namespace {

std::string format_optional(const std::optional<double>& v) {
    return v ? format_real(*v) : std::string("NA");
}

}  // namespace

void write_report_csv(std::ostream& out, std::span<const ReportRow> rows) {
    out << "experiment_id,method,mae,rmse,ratio_mae,ratio_rmse,epsilon_used,s_hat,seed\n";
    for (const auto& row : rows) {
        const auto& r = row.report;
        out << row.experiment_id << ',' << to_string(r.method) << ',' << format_real(r.mae) << ','
            << format_real(r.rmse) << ',' << format_optional(r.ratio_mae) << ','
            << format_optional(r.ratio_rmse) << ',' << format_real(r.epsilon_used) << ','
            << format_optional(r.s_hat) << ',' << r.seed << '\n';
    }
}

}  // namespace ddsvr
