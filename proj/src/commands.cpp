#include "ddsvr/commands.hpp"

#include "ddsvr/rng.hpp"
#include "ddsvr/solver.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace ddsvr {

namespace fs = std::filesystem;

namespace {

void require_input(const fs::path& path, const std::string& what) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
        throw ValidationError(what + " '" + path.string() + "' does not exist or is not a file");
    }
}

void require_output(const fs::path& path) {
    if (path.empty()) {
        throw ValidationError("output path is empty");
    }
    const auto parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
    std::error_code ec;
    if (!fs::is_directory(parent, ec)) {
        throw ValidationError("output directory '" + parent.string() + "' does not exist");
    }
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ValidationError("cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw std::runtime_error("write to " + path.string() + " failed");
    }
}

KernelSpec resolve_kernel(const std::optional<KernelSpec>& kernel, std::size_t d) {
    KernelSpec k = kernel.value_or(KernelSpec::rbf_default(d));
    k.validate();
    return k;
}

void validate_settings(const MethodSettings& s) {
    if (!(s.c > 0.0) || !(s.tuning_c > 0.0)) {
        throw ValidationError("C must be positive");
    }
    if (!(s.tol_kkt > 0.0)) {
        throw ValidationError("tol_kkt must be positive");
    }
    if (s.tuning_epsilon < 0.0) {
        throw ValidationError("tuning epsilon must be nonnegative");
    }
}

}  // namespace

SimulateResult cmd_simulate(const SimulateOptions& options) {
    require_input(options.config, "config");
    require_output(options.out);
    auto config = load_sim_config(options.config, options.seed);
    if (options.threads) {
        config.options.threads = *options.threads;
    }
    validate_settings(config.options.settings);

    const auto start = std::chrono::steady_clock::now();
    SimulateResult result;
    result.cells = run_table(config.grid, config.options);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::ostringstream csv;
    write_table_csv(csv, result.cells);

    nlohmann::json meta;
    meta["tool"] = "ddsvr";
    meta["version"] = kVersion;
    meta["report_schema"] = 1;
    meta["config"] = options.config.string();
    meta["master_seed"] = config.seed;
    meta["threads"] = config.options.threads;
    meta["elapsed_seconds"] = elapsed;
    meta["methods"] = nlohmann::json::array();
    for (auto m : config.options.methods) {
        meta["methods"].push_back(to_string(m));
    }
    meta["sinc_amplitude_rule"] = "a = 5, 4, 6 for eps_laplacian, normal, uniform noise unless set per cell";
    meta["cells"] = nlohmann::json::array();
    for (const auto& spec : config.grid) {
        nlohmann::json cell;
        cell["id"] = spec.id;
        cell["model"] = to_string(spec.model);
        if (spec.model == ModelKind::Sinc) {
            cell["a"] = spec.a;
        } else {
            cell["beta0"] = spec.beta0;
            cell["beta1"] = spec.beta1;
        }
        cell["noise"] = to_string(spec.noise.family);
        cell["noise_param"] = spec.noise.param;
        cell["scale"] = spec.noise.scale;
        cell["n"] = spec.n;
        cell["repetitions"] = spec.repetitions;
        cell["seed"] = spec.seed;
        const auto k = spec.effective_kernel();
        cell["kernel"] = to_string(k.family);
        if (k.family == KernelFamily::Rbf) {
            cell["gamma"] = k.gamma;
        }
        for (const auto& r : result.cells) {
            if (r.spec.id == spec.id && r.spec.seed == spec.seed) {
                cell["completed"] = r.summary.completed;
                cell["failed"] = r.summary.failed;
                if (r.summary.failed > 0) {
                    cell["first_failure"] = r.summary.first_failure;
                }
                break;
            }
        }
        meta["cells"].push_back(cell);
    }

    result.csv = options.out;
    result.metadata = options.out;
    result.metadata += ".meta.json";
    write_file(result.csv, csv.str());
    write_file(result.metadata, meta.dump(2) + "\n");
    return result;
}

BenchResult cmd_bench(const BenchOptions& options) {
    require_input(options.data, "data file");
    if (options.out) {
        require_output(*options.out);
    }
    if (options.reps < 1) {
        throw ValidationError("reps must be at least 1");
    }
    if (options.methods.empty()) {
        throw ValidationError("no methods selected");
    }
    validate_settings(options.settings);
    const auto table = read_csv_dataset(options.data, options.target);
    const Dataset& data = table.data;
    const KernelSpec kernel = resolve_kernel(options.kernel, data.cols());
    // Fails early on a bad fraction.
    (void)split_indices(data.rows(), SplitSpec{options.train_fraction, options.seed});

    BenchResult result;
    result.experiment_id = options.data.stem().string();
    result.repetitions.resize(options.reps);
    parallel_for(options.reps, options.threads, [&](std::size_t r) {
        auto& out = result.repetitions[r];
        out.seed = derive_seed(options.seed, r);
        try {
            const auto idx = split_indices(data.rows(), SplitSpec{options.train_fraction, out.seed});
            const auto train = standardize_features(data.subset(idx.train));
            const auto test = apply_standardization(data.subset(idx.test), train.scaling());
            MethodSettings settings = options.settings;
            settings.fold_seed = derive_seed(out.seed, 2);
            auto reports = run_methods(options.methods, train, test, kernel, settings);
            for (auto& rep : reports) {
                rep.seed = out.seed;
            }
            out.reports = std::move(reports);
        } catch (const std::exception& e) {
            out.error = e.what();
        }
    });
    result.summary = aggregate_repetitions(result.repetitions, options.methods);

    if (options.out) {
        std::vector<ReportRow> rows;
        for (const auto& a : result.summary) {
            MetricReport r;
            r.method = a.method;
            r.mae = a.mean_mae;
            r.rmse = a.mean_rmse;
            r.ratio_mae = a.ratio_mae;
            r.ratio_rmse = a.ratio_rmse;
            r.epsilon_used = a.mean_epsilon;
            r.s_hat = a.mean_s_hat;
            r.seed = options.seed;
            rows.push_back({result.experiment_id, r});
        }
        std::ostringstream csv;
        write_report_csv(csv, rows);
        write_file(*options.out, csv.str());
    }
    return result;
}

FitResult cmd_fit(const FitOptions& options) {
    require_input(options.data, "data file");
    require_output(options.out_model);
    validate_settings(options.settings);
    const auto table = read_csv_dataset(options.data, options.target);
    const auto train = standardize_features(table.data);
    const KernelSpec kernel = resolve_kernel(options.kernel, train.cols());
    FitResult result;
    result.trained = fit_method(options.method, train, kernel, options.settings);
    std::ostringstream text;
    save_model(result.trained.model, text);
    write_file(options.out_model, text.str());
    return result;
}

PredictResult cmd_predict(const PredictOptions& options, std::ostream& stdout_sink) {
    require_input(options.model, "model file");
    require_input(options.data, "data file");
    if (options.out) {
        require_output(*options.out);
    }
    std::ifstream model_in(options.model);
    const auto model = load_model(model_in);
    const std::size_t d = model.train_ref.cols();

    const auto table = read_numeric_csv(options.data);
    const std::size_t cols = table.header.size();
    std::optional<std::size_t> target_col;
    if (options.target) {
        const auto it = std::find(table.header.begin(), table.header.end(), *options.target);
        if (it == table.header.end()) {
            throw ValidationError(options.data.string() + ": no column named '" + *options.target + "'");
        }
        target_col = static_cast<std::size_t>(it - table.header.begin());
    } else if (cols == d + 1) {
        target_col = cols - 1;
    }
    const std::size_t feature_cols = cols - (target_col ? 1 : 0);
    if (feature_cols != d) {
        throw ValidationError(options.data.string() + ": model expects " + std::to_string(d) +
                              " feature columns, file has " + std::to_string(feature_cols));
    }
    if (table.rows.empty()) {
        throw ValidationError(options.data.string() + ": no data rows");
    }
    std::vector<double> feats;
    std::vector<double> targs;
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (target_col && c == *target_col) {
                targs.push_back(row[c]);
            } else {
                feats.push_back(row[c]);
            }
        }
    }
    const std::size_t n = table.rows.size();
    const bool has_target = !targs.empty();
    Dataset raw(n, d, std::move(feats), has_target ? targs : std::vector<double>(n, 0.0));
    const auto& stats = model.train_ref.scaling();
    const Dataset data = stats.empty() ? raw : apply_standardization(raw, stats);

    PredictResult result;
    result.predictions = predict(model, data);
    if (has_target) {
        result.mae = mae(result.predictions, targs);
        result.rmse = rmse(result.predictions, targs);
    }
    std::ostringstream csv;
    csv << "prediction\n";
    for (double p : result.predictions) {
        csv << format_real(p) << '\n';
    }
    if (options.out) {
        write_file(*options.out, csv.str());
    } else {
        stdout_sink << csv.str();
    }
    return result;
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<std::string> parts;
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ':')) {
        parts.push_back(part);
    }
    auto real = [&](const std::string& s) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
            throw ValidationError("grid '" + text + "': '" + s + "' is not a number");
        }
        return v;
    };
    if (parts.size() != 3) {
        throw ValidationError("grid '" + text + "' must look like lo:hi:count");
    }
    const double lo = real(parts[0]);
    const double hi = real(parts[1]);
    std::size_t count = 0;
    const auto [ptr, ec] = std::from_chars(parts[2].data(), parts[2].data() + parts[2].size(), count);
    if (ec != std::errc{} || ptr != parts[2].data() + parts[2].size() || count == 0) {
        throw ValidationError("grid '" + text + "': count must be a positive integer");
    }
    if (hi < lo) {
        throw ValidationError("grid '" + text + "': hi is below lo");
    }
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    return out;
}

CurveResult cmd_curve(const CurveOptions& options, std::ostream& stdout_sink) {
    require_input(options.input, options.from_data ? "data file" : "residual file");
    if (options.out) {
        require_output(*options.out);
    }
    if (options.epsilons.empty()) {
        throw ValidationError("epsilon grid is empty");
    }
    for (double e : options.epsilons) {
        if (e < 0.0) {
            throw ValidationError("epsilon grid values must be nonnegative");
        }
    }
    for (double s : options.scales) {
        if (!(s > 0.0)) {
            throw ValidationError("scale grid values must be positive");
        }
    }
    if (!(options.c > 0.0)) {
        throw ValidationError("C must be positive");
    }

    std::vector<double> residuals;
    if (options.from_data) {
        const auto table = read_csv_dataset(options.input, options.column);
        const auto train = standardize_features(table.data);
        SvrConfig cfg;
        cfg.c = options.c;
        cfg.epsilon = 0.0;
        cfg.kernel = resolve_kernel(options.kernel, train.cols());
        const auto pilot = solve_svr(train, cfg);
        const auto fitted = training_decision_values(pilot);
        residuals.resize(fitted.size());
        for (std::size_t i = 0; i < fitted.size(); ++i) {
            residuals[i] = train.targets()[i] - fitted[i];
        }
    } else {
        residuals = read_csv_column(options.input, options.column);
    }

    CurveResult result;
    result.optimum = estimate(residuals);
    if (options.scales.empty()) {
        for (double e : options.epsilons) {
            const double s = profile_scale(residuals, e);
            result.points.push_back({e, s, neg_log_lik(residuals, e, s)});
        }
    } else {
        result.points = likelihood_curve(residuals, options.epsilons, options.scales);
    }

    std::ostringstream csv;
    csv << "epsilon,s,neg_log_lik\n";
    for (const auto& p : result.points) {
        csv << format_real(p.epsilon) << ',' << format_real(p.s) << ',' << format_real(p.neg_log_lik) << '\n';
    }
    if (options.out) {
        write_file(*options.out, csv.str());
    } else {
        stdout_sink << csv.str();
    }
    return result;
}

}  // namespace ddsvr
