#include "ddsvr/commands.hpp"
#include "ddsvr/solver.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitComputation = 3;

struct KernelFlags {
    std::optional<std::string> kernel;
    std::optional<double> gamma;

    void add(CLI::App* app) {
        app->add_option("--kernel", kernel, "Kernel family")->check(CLI::IsMember({"linear", "rbf"}));
        app->add_option("--gamma", gamma, "RBF gamma (default 1/d)");
    }

    std::optional<ddsvr::KernelSpec> resolve() const {
        if (!kernel && !gamma) {
            return std::nullopt;
        }
        if (kernel && *kernel == "linear") {
            if (gamma) {
                throw ddsvr::ValidationError("--gamma only applies to the rbf kernel");
            }
            return ddsvr::KernelSpec::linear();
        }
        if (!gamma) {
            return std::nullopt;
        }
        return ddsvr::KernelSpec::rbf(*gamma);
    }
};

std::vector<ddsvr::MethodId> parse_methods(const std::vector<std::string>& names) {
    std::vector<ddsvr::MethodId> out;
    for (const auto& n : names) {
        out.push_back(ddsvr::parse_method(n));
    }
    return out;
}

void print_summary(const std::vector<ddsvr::MethodAggregate>& summary) {
    for (const auto& a : summary) {
        std::fprintf(stderr, "%-7s mae %.4f rmse %.4f ratio_mae %.3f ratio_rmse %.3f eps %.4f",
                     ddsvr::to_string(a.method).c_str(), a.mean_mae, a.mean_rmse, a.ratio_mae, a.ratio_rmse,
                     a.mean_epsilon);
        if (a.mean_s_hat) {
            std::fprintf(stderr, " s %.4f", *a.mean_s_hat);
        }
        std::fprintf(stderr, " (%zu ok, %zu failed)\n", a.completed, a.failed);
        if (a.failed > 0 && a.method == summary.front().method) {
            std::fprintf(stderr, "  first failure: %s\n", a.first_failure.c_str());
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Epsilon-SVR with data-driven epsilon and noise-scale estimation"};
    app.set_version_flag("--version", ddsvr::kVersion);
    app.require_subcommand(1);

    // simulate
    ddsvr::SimulateOptions sim;
    std::optional<unsigned> sim_threads;
    auto* simulate = app.add_subcommand("simulate", "Run a Monte-Carlo experiment grid from a config file");
    simulate->add_option("config", sim.config, "Experiment config")->required();
    simulate->add_option("--out", sim.out, "Report CSV")->required();
    simulate->add_option("--seed", sim.seed, "Override the master seed");
    simulate->add_option("--threads", sim_threads, "Worker threads (0: all cores)");

    // bench
    ddsvr::BenchOptions bench;
    std::vector<std::string> bench_methods{"tuning", "cm", "kcv", "dd"};
    std::string bench_out;
    KernelFlags bench_kernel;
    auto* bench_cmd = app.add_subcommand("bench", "Repeated train/test benchmark on a CSV dataset");
    bench_cmd->add_option("data", bench.data, "Data CSV with header")->required();
    bench_cmd->add_option("--target", bench.target, "Target column (default: last)");
    bench_cmd->add_option("--method", bench_methods, "Methods to run")
        ->delimiter(',')
        ->check(CLI::IsMember({"tuning", "cm", "kcv", "dd"}));
    bench_cmd->add_option("--reps", bench.reps, "Repetitions")->capture_default_str();
    bench_cmd->add_option("--split", bench.train_fraction, "Training fraction")->capture_default_str();
    bench_cmd->add_option("--seed", bench.seed, "Master seed")->capture_default_str();
    bench_cmd->add_option("--c", bench.settings.c, "C for cm, kcv and dd")->capture_default_str();
    bench_cmd->add_option("--threads", bench.threads, "Worker threads (0: all cores)");
    bench_cmd->add_option("--out", bench_out, "Summary CSV")->required();
    bench_kernel.add(bench_cmd);

    // fit
    ddsvr::FitOptions fit;
    std::string fit_method = "dd";
    std::uint64_t fit_seed = 0;
    KernelFlags fit_kernel;
    auto* fit_cmd = app.add_subcommand("fit", "Train a model on a CSV dataset and save it");
    fit_cmd->add_option("data", fit.data, "Data CSV with header")->required();
    fit_cmd->add_option("--target", fit.target, "Target column (default: last)");
    fit_cmd->add_option("--method", fit_method, "Epsilon selection method")
        ->check(CLI::IsMember({"tuning", "cm", "kcv", "dd"}))
        ->capture_default_str();
    fit_cmd->add_option("--c", fit.settings.c, "C for cm, kcv and dd")->capture_default_str();
    fit_cmd->add_option("--seed", fit_seed, "Seed for k-CV folds")->capture_default_str();
    fit_cmd->add_option("--out", fit.out_model, "Model file")->required();
    fit_kernel.add(fit_cmd);

    // predict
    ddsvr::PredictOptions pred;
    auto* predict_cmd = app.add_subcommand("predict", "Predict with a saved model");
    predict_cmd->add_option("model", pred.model, "Model file")->required();
    predict_cmd->add_option("data", pred.data, "CSV with the model's feature columns")->required();
    predict_cmd->add_option("--target", pred.target, "Target column to drop and score against");
    predict_cmd->add_option("--out", pred.out, "Prediction CSV (default: stdout)");

    // curve
    ddsvr::CurveOptions curve;
    std::string eps_grid = "0:3:61";
    std::optional<std::string> s_grid;
    KernelFlags curve_kernel;
    auto* curve_cmd = app.add_subcommand("curve", "Export working-likelihood curve data");
    curve_cmd->add_option("input", curve.input, "Residual CSV, or data CSV with --from-data")->required();
    curve_cmd->add_flag("--from-data", curve.from_data, "Take residuals from a pilot epsilon = 0 fit");
    curve_cmd->add_option("--target", curve.column, "Residual column, or target column with --from-data");
    curve_cmd->add_option("--eps-grid", eps_grid, "Epsilon grid lo:hi:count")->capture_default_str();
    curve_cmd->add_option("--s-grid", s_grid, "Scale grid lo:hi:count (default: profile s)");
    curve_cmd->add_option("--c", curve.c, "C for the pilot fit")->capture_default_str();
    curve_cmd->add_option("--out", curve.out, "Curve CSV (default: stdout)");
    curve_kernel.add(curve_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (simulate->parsed()) {
            sim.threads = sim_threads;
            const auto result = ddsvr::cmd_simulate(sim);
            std::size_t failed = 0;
            for (const auto& c : result.cells) {
                failed += c.summary.failed;
            }
            std::fprintf(stderr, "wrote %s (%zu rows) and %s\n", result.csv.string().c_str(), result.cells.size(),
                         result.metadata.string().c_str());
            if (failed > 0) {
                std::fprintf(stderr, "warning: %zu method-repetition failures excluded; see metadata\n", failed);
            }
        } else if (bench_cmd->parsed()) {
            bench.methods = parse_methods(bench_methods);
            bench.kernel = bench_kernel.resolve();
            bench.out = bench_out;
            const auto result = ddsvr::cmd_bench(bench);
            print_summary(result.summary);
        } else if (fit_cmd->parsed()) {
            fit.method = ddsvr::parse_method(fit_method);
            fit.kernel = fit_kernel.resolve();
            fit.settings.fold_seed = fit_seed;
            const auto result = ddsvr::cmd_fit(fit);
            const auto& t = result.trained;
            std::fprintf(stderr, "%s: epsilon %.6g, C %.6g", fit_method.c_str(), t.epsilon_used, t.c_used);
            if (t.s_hat) {
                std::fprintf(stderr, ", s %.6g", *t.s_hat);
            }
            std::fprintf(stderr, ", %zu support vectors, %zu iterations\n", t.model.support_indices.size(),
                         t.model.diagnostics.iterations);
        } else if (predict_cmd->parsed()) {
            const auto result = ddsvr::cmd_predict(pred, std::cout);
            if (result.mae) {
                std::fprintf(stderr, "mae %.6g rmse %.6g\n", *result.mae, *result.rmse);
            }
        } else if (curve_cmd->parsed()) {
            curve.epsilons = ddsvr::parse_grid(eps_grid);
            if (s_grid) {
                curve.scales = ddsvr::parse_grid(*s_grid);
            }
            curve.kernel = curve_kernel.resolve();
            const auto result = ddsvr::cmd_curve(curve, std::cout);
            std::fprintf(stderr, "optimum: epsilon %.6g, s %.6g, neg_log_lik %.10g\n",
                         result.optimum.epsilon_hat, result.optimum.s_hat, result.optimum.neg_log_lik);
        }
    } catch (const ddsvr::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "computation failed: %s\n", e.what());
        return kExitComputation;
    }
    return 0;
}
