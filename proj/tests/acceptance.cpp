// Acceptance checks. Each criterion prints one PASS/FAIL line followed by the
// measured quantities. `acceptance --criterion N` runs a single one; with no
// argument all eight run. The exit status is nonzero when any check fails.

#include "ddsvr/commands.hpp"
#include "ddsvr/likelihood.hpp"
#include "ddsvr/simulation.hpp"
#include "ddsvr/solver.hpp"

#include "oracles/numeric.hpp"
#include "oracles/qp_oracle.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace ddsvr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        notes.push_back(std::string(ok ? "  ok    " : "  MISS  ") + what);
    }
};

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), pattern, args...);
    return buf;
}

Dataset random_problem(RngStream& rng, std::size_t n, std::size_t d, double noise) {
    std::vector<double> x(n * d);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double lin = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            x[i * d + j] = rng.uniform(-2.0, 2.0);
            lin += (j + 1.0) * x[i * d + j];
        }
        y[i] = std::sin(lin) + noise * rng.normal();
    }
    return Dataset(n, d, std::move(x), std::move(y));
}

double kkt_violation(const SvrModel& model) {
    const auto f = training_decision_values(model);
    const auto& y = model.train_ref.targets();
    const double c = model.config.c;
    const double e = model.config.epsilon;
    double worst = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - f[i];
        const double b = model.beta[i];
        double v = 0.0;
        if (b == 0.0) {
            v = std::max(0.0, std::abs(r) - e);
        } else if (b >= c * (1.0 - 1e-12)) {
            v = std::max(0.0, e - r);
        } else if (b <= -c * (1.0 - 1e-12)) {
            v = std::max(0.0, r + e);
        } else {
            v = std::abs(r - (b > 0.0 ? e : -e));
        }
        worst = std::max(worst, v);
    }
    return worst;
}

Outcome solver_correctness() {
    Outcome out;
    RngStream rng(1001, 0);
    double worst_beta = 0.0;
    double worst_kkt = 0.0;
    double worst_gap = 0.0;
    int matched = 0;
    const auto track = [&](const SvrModel& m) {
        worst_kkt = std::max(worst_kkt, kkt_violation(m));
        worst_gap = std::max(worst_gap, m.diagnostics.relative_gap);
    };
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.below(5);
        const auto data = random_problem(rng, n, 2, 0.3);
        SvrConfig cfg;
        cfg.c = std::array<double, 3>{0.5, 1.0, 5.0}[rng.below(3)];
        cfg.epsilon = rng.uniform(0.0, 0.5);
        cfg.kernel = KernelSpec::rbf(rng.uniform(0.2, 2.0));
        cfg.tol_kkt = 1e-5;
        const auto model = solve_svr(data, cfg);
        Eigen::MatrixXd k(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                k(i, j) = kernel_eval(cfg.kernel, data.row(i), data.row(j));
            }
        }
        const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(data.targets().data(), n);
        const auto truth = oracle::brute_force_svr_dual(k, y, cfg.c, cfg.epsilon);
        if (truth) {
            double dev = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                dev = std::max(dev, std::abs(model.beta[i] - truth->beta[i]));
            }
            worst_beta = std::max(worst_beta, dev);
            matched += dev <= 1e-4;
        }
        track(model);
    }
    // Larger fits for the KKT and duality-gap suite.
    for (const auto& spec : {KernelSpec::rbf(0.5), KernelSpec::linear()}) {
        for (double c : {0.1, 1.0, 10.0}) {
            for (double eps : {0.0, 0.2}) {
                const auto data = random_problem(rng, 200, 3, 0.3);
                SvrConfig cfg;
                cfg.c = c;
                cfg.epsilon = eps;
                cfg.kernel = spec;
                track(solve_svr(data, cfg));
            }
        }
    }
    out.require(matched == 50, fmt("%d/50 instances within 1e-4 of the QP oracle (max dev %.2e)", matched, worst_beta));
    out.require(worst_kkt <= 1e-3, fmt("max KKT violation %.2e <= 1e-3", worst_kkt));
    out.require(worst_gap <= 1e-4, fmt("max relative duality gap %.2e <= 1e-4", worst_gap));
    return out;
}

Outcome likelihood_machinery() {
    Outcome out;
    RngStream rng(2001, 0);
    double worst_mass = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double e = i == 0 ? 0.0 : rng.uniform(0.0, 10.0);
        const double bound = e + 50.0;
        const double mass = oracle::integrate_piecewise([e](double u) { return eps_laplacian_pdf(u, e); },
                                                        {-bound, -e, 0.0, e, bound}, 1e-12);
        worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
    }
    out.require(worst_mass <= 1e-9, fmt("density mass error %.2e over 20 epsilons", worst_mass));

    bool consistent = true;
    bool fixed_points = true;
    double worst_fp = 0.0;
    int converged = 0;
    int fits = 0;
    std::string detail;
    std::uint64_t stream = 0;
    for (double e0 : {0.2, 0.5, 1.0}) {
        for (double s0 : {0.5, 1.0}) {
            RngStream srng(2002, stream++);
            auto u = sample_eps_laplacian(srng, e0, 100000);
            for (auto& v : u) {
                v *= s0;
            }
            const auto fit = estimate(u);
            ++fits;
            converged += fit.converged;
            const bool ok = std::abs(fit.epsilon_hat - e0) <= 0.05 * (1.0 + e0) &&
                            std::abs(fit.s_hat / s0 - 1.0) <= 0.03;
            consistent = consistent && ok;
            if (fit.converged) {
                worst_fp = std::max(worst_fp, fit.fixed_point_residual);
                fixed_points = fixed_points && fit.fixed_point_residual <= 1e-6;
            }
            detail += fmt(" (%.1f,%.1f)->(%.3f,%.3f)", e0, s0, fit.epsilon_hat, fit.s_hat);
        }
    }
    out.require(consistent, "consistency at n=100000:" + detail);

    double worst_eq_e = 0.0;
    double worst_eq_s = 0.0;
    for (std::uint64_t k = 0; k < 10; ++k) {
        RngStream srng(2003, k);
        const auto u = sample_eps_laplacian(srng, 0.3 + 0.2 * static_cast<double>(k), 500);
        const auto base = estimate(u);
        ++fits;
        converged += base.converged;
        if (base.converged) {
            worst_fp = std::max(worst_fp, base.fixed_point_residual);
            fixed_points = fixed_points && base.fixed_point_residual <= 1e-6;
        }
        for (double c : {0.01, 3.7, 250.0}) {
            std::vector<double> cu(u);
            for (auto& v : cu) {
                v *= c;
            }
            const auto f = estimate(cu);
            worst_eq_e = std::max(worst_eq_e, std::abs(f.epsilon_hat - base.epsilon_hat));
            worst_eq_s = std::max(worst_eq_s, std::abs(f.s_hat / (c * base.s_hat) - 1.0));
        }
    }
    out.require(fixed_points, fmt("fixed-point residual %.2e <= 1e-6 on %d/%d converged fits", worst_fp, converged, fits));
    out.require(worst_eq_e <= 1e-6 && worst_eq_s <= 1e-6,
                fmt("scale equivariance: |d eps| %.2e, |d s|/s %.2e", worst_eq_e, worst_eq_s));
    return out;
}

std::vector<CellResult> run_config(const std::string& name) {
    const auto cfg = load_sim_config(fs::path(DDSVR_CONFIG_DIR) / name);
    return run_table(cfg.grid, cfg.options);
}

const MethodAggregate* find(const std::vector<CellResult>& cells, const std::string& id, MethodId m) {
    for (const auto& c : cells) {
        if (c.spec.id == id && c.summary.method == m) {
            return &c.summary;
        }
    }
    return nullptr;
}

Outcome sinc_ratios() {
    Outcome out;
    const auto cells = run_config("sinc_eps_laplacian.cfg");
    for (const auto& [id, s] : std::vector<std::pair<std::string, double>>{
             {"sinc-s0.8", 0.8}, {"sinc-s1.0", 1.0}, {"sinc-s1.2", 1.2}}) {
        const auto* dd = find(cells, id, MethodId::DD);
        const auto* cm = find(cells, id, MethodId::CM);
        if (dd == nullptr || cm == nullptr || dd->completed == 0) {
            out.require(false, id + ": no completed repetitions");
            continue;
        }
        out.require(dd->ratio_mae > 1.3, fmt("%s D-D ratio_MAE %.3f > 1.3", id.c_str(), dd->ratio_mae));
        out.require(cm->ratio_mae < 1.05, fmt("%s CM ratio_MAE %.3f < 1.05", id.c_str(), cm->ratio_mae));
        out.require(std::abs(*dd->mean_s_hat - s) <= 0.15,
                    fmt("%s mean s_hat %.3f within 0.15 of %.1f (mean eps_hat %.2e)", id.c_str(), *dd->mean_s_hat,
                        s, dd->mean_epsilon));
    }
    return out;
}

Outcome uniform_ratios() {
    Outcome out;
    const auto cells = run_config("linear_uniform.cfg");
    const std::string id = "lin-uniform-b1.2-s2.0";
    const auto* dd = find(cells, id, MethodId::DD);
    const auto* kcv = find(cells, id, MethodId::KCv);
    if (dd == nullptr || kcv == nullptr || dd->completed == 0) {
        out.require(false, "no completed repetitions");
        return out;
    }
    out.require(dd->ratio_mae > 2.5, fmt("D-D ratio_MAE %.3f > 2.5 (eps_hat %.2f, s_hat %.3f)", dd->ratio_mae,
                                         dd->mean_epsilon, *dd->mean_s_hat));
    out.require(kcv->ratio_mae >= 0.9 && kcv->ratio_mae <= 1.4,
                fmt("10-CV ratio_MAE %.3f within [0.9, 1.4]", kcv->ratio_mae));
    return out;
}

Outcome parameter_recovery() {
    Outcome out;
    const auto cells = run_config("linear_eps_laplacian_grid.cfg");
    for (const auto& c : cells) {
        if (c.summary.method != MethodId::DD) {
            continue;
        }
        if (c.summary.completed == 0) {
            out.require(false, c.spec.id + ": no completed repetitions");
            continue;
        }
        const double s = c.spec.noise.scale;
        const double e = c.spec.noise.param;
        const double s_hat = *c.summary.mean_s_hat;
        const double e_hat = c.summary.mean_epsilon;
        out.require(std::abs(s_hat - s) <= 0.1 && std::abs(e_hat - e) <= 0.3,
                    fmt("%s s_hat %.3f (|d| <= 0.1), eps_hat %.3f (|d| <= 0.3)", c.spec.id.c_str(), s_hat, e_hat));
    }
    return out;
}

Outcome case_study() {
    Outcome out;
    BenchOptions opts;
    opts.data = fs::path(DDSVR_DATA_DIR) / "boston_housing.csv";
    opts.reps = 20;
    opts.seed = 7;
    const auto result = cmd_bench(opts);
    const MethodAggregate* tuning = nullptr;
    const MethodAggregate* dd = nullptr;
    for (const auto& s : result.summary) {
        if (s.method == MethodId::Tuning) {
            tuning = &s;
        } else if (s.method == MethodId::DD) {
            dd = &s;
        }
    }
    if (tuning == nullptr || dd == nullptr || dd->completed == 0) {
        out.require(false, "no completed repetitions");
        return out;
    }
    for (const auto& s : result.summary) {
        out.notes.push_back(fmt("        %-6s MAE %.3f RMSE %.3f eps %.3f (%zu reps)", to_string(s.method).c_str(),
                                s.mean_mae, s.mean_rmse, s.mean_epsilon, s.completed));
    }
    out.require(dd->mean_mae <= 0.97 * tuning->mean_mae,
                fmt("D-D MAE %.3f at least 3%% below tuning %.3f", dd->mean_mae, tuning->mean_mae));
    out.require(dd->mean_rmse <= 0.97 * tuning->mean_rmse,
                fmt("D-D RMSE %.3f at least 3%% below tuning %.3f", dd->mean_rmse, tuning->mean_rmse));
    return out;
}

Outcome limiting() {
    Outcome out;
    for (const auto& [e0, s0] : std::vector<std::pair<double, double>>{{0.7, 1.0}, {0.3, 2.0}}) {
        const auto pdf = [e0, s0](double u) { return eps_laplacian_pdf(u / s0, e0) / s0; };
        const auto lim = limiting_params(pdf, s0 * (e0 + 45.0));
        out.require(std::abs(lim.epsilon_star - e0) <= 1e-4 && std::abs(lim.s_star - s0) <= 1e-4,
                    fmt("eps-Laplacian (%.1f, %.1f) -> (%.6f, %.6f)", e0, s0, lim.epsilon_star, lim.s_star));
    }
    const double b = 1.2;
    const auto pdf = [b](double u) { return std::abs(u) <= b ? 0.5 / b : 0.0; };
    const auto lim = limiting_params(pdf, b);
    RngStream rng(7001, 0);
    std::vector<double> u(100000);
    for (auto& v : u) {
        v = rng.uniform(-b, b);
    }
    const auto fit = estimate(u);
    const double rel_e = std::abs(fit.epsilon_hat - lim.epsilon_star) / lim.epsilon_star;
    const double rel_s = std::abs(fit.s_hat - lim.s_star) / lim.s_star;
    out.require(rel_e <= 0.02 && rel_s <= 0.02,
                fmt("uniform b=%.1f: limit (%.4f, %.6f) vs n=100000 estimate (%.4f, %.6f)", b, lim.epsilon_star,
                    lim.s_star, fit.epsilon_hat, fit.s_hat));
    return out;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
    Outcome out;
    const auto dir = fs::temp_directory_path() / "ddsvr_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    SimulateOptions opts;
    opts.config = fs::path(DDSVR_CONFIG_DIR) / "smoke.cfg";
    opts.seed = 31337;
    opts.out = dir / "first.csv";
    (void)cmd_simulate(opts);
    opts.out = dir / "second.csv";
    opts.threads = 1;
    (void)cmd_simulate(opts);
    const auto a = slurp(dir / "first.csv");
    const auto b = slurp(dir / "second.csv");
    out.require(!a.empty() && a == b, fmt("two runs (all cores, then 1 thread) give identical CSVs (%zu bytes)", a.size()));
    return out;
}

struct Criterion {
    const char* title;
    double budget_seconds;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::map<int, Criterion> criteria{
        {1, {"solver correctness", 60.0, solver_correctness}},
        {2, {"likelihood machinery", 120.0, likelihood_machinery}},
        {3, {"sinc model ratios, eps-Laplacian n=1000", 600.0, sinc_ratios}},
        {4, {"linear model ratios, uniform b=1.2 s=2", 300.0, uniform_ratios}},
        {5, {"parameter recovery, linear n=300", 300.0, parameter_recovery}},
        {6, {"Boston housing ordering", 600.0, case_study}},
        {7, {"limiting parameters", 60.0, limiting}},
        {8, {"simulation determinism", 600.0, determinism}},
    };
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--criterion" && i + 1 < argc) {
            selected.push_back(std::atoi(argv[++i]));
        } else {
            std::fprintf(stderr, "usage: acceptance [--criterion N]...\n");
            return 2;
        }
    }
    if (selected.empty()) {
        for (const auto& [id, c] : criteria) {
            selected.push_back(id);
        }
    }
    bool all = true;
    for (int id : selected) {
        const auto it = criteria.find(id);
        if (it == criteria.end()) {
            std::fprintf(stderr, "unknown criterion %d\n", id);
            return 2;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = it->second.run();
        } catch (const std::exception& e) {
            outcome.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        outcome.require(secs < it->second.budget_seconds,
                        fmt("runtime %.1f s < %.0f s", secs, it->second.budget_seconds));
        std::printf("criterion %d %s: %s\n", id, outcome.pass ? "PASS" : "FAIL", it->second.title);
        for (const auto& note : outcome.notes) {
            std::printf("%s\n", note.c_str());
        }
        std::fflush(stdout);
        all = all && outcome.pass;
    }
    return all ? 0 : 1;
}
