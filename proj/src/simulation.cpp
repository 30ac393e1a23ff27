#include "ddsvr/simulation.hpp"

#include "ddsvr/likelihood.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace ddsvr {

std::string to_string(NoiseFamily family) {
    switch (family) {
        case NoiseFamily::EpsLaplacian:
            return "eps_laplacian";
        case NoiseFamily::Normal:
            return "normal";
        case NoiseFamily::Uniform:
            return "uniform";
    }
    return "unknown";
}

NoiseFamily parse_noise_family(const std::string& name) {
    if (name == "eps_laplacian") {
        return NoiseFamily::EpsLaplacian;
    }
    if (name == "normal") {
        return NoiseFamily::Normal;
    }
    if (name == "uniform") {
        return NoiseFamily::Uniform;
    }
    throw ValidationError("unknown noise family '" + name + "' (expected eps_laplacian, normal or uniform)");
}

std::string to_string(ModelKind kind) {
    return kind == ModelKind::Sinc ? "sinc" : "linear";
}

ModelKind parse_model_kind(const std::string& name) {
    if (name == "sinc") {
        return ModelKind::Sinc;
    }
    if (name == "linear") {
        return ModelKind::Linear;
    }
    throw ValidationError("unknown model '" + name + "' (expected sinc or linear)");
}

void NoiseSpec::validate() const {
    if (!std::isfinite(param) || !std::isfinite(scale)) {
        throw ValidationError("noise parameters must be finite");
    }
    if (scale < 0.0) {
        throw ValidationError("noise scale must be nonnegative");
    }
    if (family == NoiseFamily::EpsLaplacian) {
        if (param < 0.0) {
            throw ValidationError("eps_laplacian epsilon must be nonnegative");
        }
    } else if (param <= 0.0) {
        throw ValidationError(to_string(family) + " noise parameter must be positive");
    }
}

double sinc_amplitude(NoiseFamily family) {
    switch (family) {
        case NoiseFamily::EpsLaplacian:
            return 5.0;
        case NoiseFamily::Normal:
            return 4.0;
        case NoiseFamily::Uniform:
            return 6.0;
    }
    return 5.0;
}

double linear_slope(NoiseFamily family) {
    return family == NoiseFamily::Uniform ? 1.0 : 2.0;
}

SimSpec SimSpec::sinc(NoiseSpec noise, std::size_t n, std::size_t repetitions, std::uint64_t seed) {
    SimSpec s;
    s.model = ModelKind::Sinc;
    s.a = sinc_amplitude(noise.family);
    s.noise = noise;
    s.n = n;
    s.repetitions = repetitions;
    s.seed = seed;
    return s;
}

SimSpec SimSpec::linear(NoiseSpec noise, std::size_t n, std::size_t repetitions, std::uint64_t seed) {
    SimSpec s;
    s.model = ModelKind::Linear;
    s.beta0 = 1.0;
    s.beta1 = linear_slope(noise.family);
    s.noise = noise;
    s.n = n;
    s.repetitions = repetitions;
    s.seed = seed;
    return s;
}

KernelSpec SimSpec::effective_kernel() const {
    if (kernel) {
        return *kernel;
    }
    return model == ModelKind::Sinc ? KernelSpec::rbf_default(1) : KernelSpec::linear();
}

void SimSpec::validate() const {
    noise.validate();
    if (n < 20) {
        throw ValidationError("cell '" + id + "': n must be at least 20");
    }
    if (repetitions < 1) {
        throw ValidationError("cell '" + id + "': repetitions must be at least 1");
    }
    if (!std::isfinite(a) || !std::isfinite(beta0) || !std::isfinite(beta1)) {
        throw ValidationError("cell '" + id + "': model coefficients must be finite");
    }
    effective_kernel().validate();
}

std::vector<double> draw_noise(const NoiseSpec& spec, RngStream& rng, std::size_t n) {
    spec.validate();
    switch (spec.family) {
        case NoiseFamily::EpsLaplacian:
            return sample_eps_laplacian(rng, spec.param, n);
        case NoiseFamily::Normal: {
            std::vector<double> u(n);
            for (auto& v : u) {
                v = spec.param * rng.normal();
            }
            return u;
        }
        case NoiseFamily::Uniform: {
            std::vector<double> u(n);
            for (auto& v : u) {
                v = rng.uniform(-spec.param, spec.param);
            }
            return u;
        }
    }
    return {};
}

namespace {

GeneratedData assemble(std::vector<double> x, std::vector<double> mu, const std::vector<double>& u,
                       double scale) {
    const std::size_t n = x.size();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = mu[i] + scale * u[i];
    }
    return {Dataset(n, 1, std::move(x), std::move(y)), std::move(mu)};
}

}  // namespace

GeneratedData gen_sinc(const SimSpec& spec, RngStream& rng) {
    if (spec.model != ModelKind::Sinc) {
        throw ValidationError("gen_sinc needs a sinc cell");
    }
    std::vector<double> x(spec.n);
    std::vector<double> mu(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        x[i] = rng.uniform(-10.0, 10.0);
        mu[i] = x[i] == 0.0 ? spec.a : spec.a * std::sin(x[i]) / x[i];
    }
    const auto u = draw_noise(spec.noise, rng, spec.n);
    return assemble(std::move(x), std::move(mu), u, spec.noise.scale);
}

GeneratedData gen_linear(const SimSpec& spec, RngStream& rng) {
    if (spec.model != ModelKind::Linear) {
        throw ValidationError("gen_linear needs a linear cell");
    }
    std::vector<double> x(spec.n);
    std::vector<double> mu(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        x[i] = rng.normal();
        mu[i] = spec.beta0 + spec.beta1 * x[i];
    }
    const auto u = draw_noise(spec.noise, rng, spec.n);
    return assemble(std::move(x), std::move(mu), u, spec.noise.scale);
}

GeneratedData generate(const SimSpec& spec, RngStream& rng) {
    return spec.model == ModelKind::Sinc ? gen_sinc(spec, rng) : gen_linear(spec, rng);
}

namespace {

RepetitionOutcome run_repetition(const SimSpec& spec, const TableOptions& options, std::size_t rep) {
    RepetitionOutcome out;
    out.seed = derive_seed(spec.seed, rep);
    try {
        RngStream rng(out.seed, 0);
        const auto gen = generate(spec, rng);
        const auto idx = split_indices(gen.data.rows(), SplitSpec{0.5, derive_seed(out.seed, 1)});
        const auto train = gen.data.subset(idx.train);
        const auto test = gen.data.subset(idx.test);
        std::vector<double> truth;
        if (spec.model == ModelKind::Sinc) {
            truth.reserve(idx.test.size());
            for (std::size_t i : idx.test) {
                truth.push_back(gen.mu[i]);
            }
        }
        MethodSettings settings = options.settings;
        settings.fold_seed = derive_seed(out.seed, 2);
        auto reports = run_methods(options.methods, train, test, spec.effective_kernel(), settings, truth);
        for (auto& r : reports) {
            r.seed = out.seed;
        }
        out.reports = std::move(reports);
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

}  // namespace

std::vector<RepetitionOutcome> run_cell(const SimSpec& spec, const TableOptions& options) {
    spec.validate();
    if (options.methods.empty()) {
        throw ValidationError("no methods selected");
    }
    std::vector<RepetitionOutcome> outcomes(spec.repetitions);
    parallel_for(spec.repetitions, options.threads,
                 [&](std::size_t r) { outcomes[r] = run_repetition(spec, options, r); });
    return outcomes;
}

std::vector<CellResult> run_table(std::span<const SimSpec> grid, const TableOptions& options) {
    if (grid.empty()) {
        throw ValidationError("experiment grid is empty");
    }
    if (options.methods.empty()) {
        throw ValidationError("no methods selected");
    }
    for (const auto& spec : grid) {
        spec.validate();
    }
    std::vector<CellResult> results;
    for (const auto& spec : grid) {
        const auto outcomes = run_cell(spec, options);
        for (auto& summary : aggregate_repetitions(outcomes, options.methods)) {
            results.push_back(CellResult{spec, std::move(summary)});
        }
    }
    return results;
}

void write_table_csv(std::ostream& out, std::span<const CellResult> results) {
    out << "experiment_id,model,noise,noise_param,scale,n,completed,failed,"
           "method,mae,rmse,ratio_mae,ratio_rmse,epsilon_used,s_hat,seed\n";
    for (const auto& cell : results) {
        const auto& r = cell.summary;
        out << cell.spec.id << ',' << to_string(cell.spec.model) << ',' << to_string(cell.spec.noise.family) << ','
            << format_real(cell.spec.noise.param) << ',' << format_real(cell.spec.noise.scale) << ','
            << cell.spec.n << ',' << r.completed << ',' << r.failed << ',' << to_string(r.method) << ','
            << format_real(r.mean_mae) << ',' << format_real(r.mean_rmse) << ','
            << format_real(r.ratio_mae) << ',' << format_real(r.ratio_rmse) << ','
            << format_real(r.mean_epsilon) << ','
            << (r.mean_s_hat ? format_real(*r.mean_s_hat) : std::string("NA")) << ',' << cell.spec.seed
            << '\n';
    }
}

namespace {

constexpr const char* kConfigSchema = "ddsvr-sim-config";
constexpr int kConfigVersion = 1;

std::string strip(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

class LineError {
public:
    LineError(std::string source, std::size_t line) : source_(std::move(source)), line_(line) {}

    [[noreturn]] void fail(const std::string& msg) const {
        throw ValidationError(source_ + ":" + std::to_string(line_) + ": " + msg);
    }

    double real(const std::string& key, const std::string& v) const {
        double out = 0.0;
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
            fail("'" + key + "' expects a real number, got '" + v + "'");
        }
        return out;
    }

    std::uint64_t count(const std::string& key, const std::string& v) const {
        std::uint64_t out = 0;
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
            fail("'" + key + "' expects a nonnegative integer, got '" + v + "'");
        }
        return out;
    }

    template <class F>
    auto guard(F&& f) const {
        try {
            return f();
        } catch (const ValidationError& e) {
            fail(e.what());
        }
    }

private:
    std::string source_;
    std::size_t line_;
};

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> items;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = strip(item);
        if (!item.empty()) {
            items.push_back(item);
        }
    }
    return items;
}

struct PendingCell {
    std::size_t line = 0;
    std::map<std::string, std::pair<std::string, std::size_t>> values;
};

SimSpec build_cell(const PendingCell& pc, std::size_t index, std::uint64_t master_seed,
                   const std::string& source) {
    auto get = [&](const std::string& key) -> const std::pair<std::string, std::size_t>* {
        auto it = pc.values.find(key);
        return it == pc.values.end() ? nullptr : &it->second;
    };
    auto require = [&](const std::string& key) {
        const auto* v = get(key);
        if (!v) {
            LineError(source, pc.line).fail("cell is missing required key '" + key + "'");
        }
        return *v;
    };

    const auto model_v = require("model");
    const auto noise_v = require("noise");
    const auto param_v = require("noise_param");
    const auto scale_v = require("scale");
    const auto n_v = require("n");

    const LineError at_model(source, model_v.second);
    const auto model = at_model.guard([&] { return parse_model_kind(model_v.first); });
    NoiseSpec noise;
    noise.family = LineError(source, noise_v.second).guard([&] { return parse_noise_family(noise_v.first); });
    noise.param = LineError(source, param_v.second).real("noise_param", param_v.first);
    noise.scale = LineError(source, scale_v.second).real("scale", scale_v.first);
    const auto n = LineError(source, n_v.second).count("n", n_v.first);

    std::size_t reps = 100;
    if (const auto* v = get("repetitions")) {
        reps = LineError(source, v->second).count("repetitions", v->first);
    }
    std::uint64_t seed = derive_seed(master_seed, index);
    if (const auto* v = get("seed")) {
        seed = LineError(source, v->second).count("seed", v->first);
    }
    SimSpec spec = model == ModelKind::Sinc ? SimSpec::sinc(noise, n, reps, seed)
                                            : SimSpec::linear(noise, n, reps, seed);
    spec.id = "cell" + std::to_string(index + 1);
    if (const auto* v = get("id")) {
        spec.id = v->first;
    }
    if (const auto* v = get("a")) {
        spec.a = LineError(source, v->second).real("a", v->first);
    }
    if (const auto* v = get("beta0")) {
        spec.beta0 = LineError(source, v->second).real("beta0", v->first);
    }
    if (const auto* v = get("beta1")) {
        spec.beta1 = LineError(source, v->second).real("beta1", v->first);
    }
    if (const auto* v = get("kernel")) {
        const LineError at(source, v->second);
        KernelSpec k;
        k.family = at.guard([&] { return parse_kernel_family(v->first); });
        k.gamma = 1.0;
        if (const auto* g = get("gamma")) {
            k.gamma = LineError(source, g->second).real("gamma", g->first);
        }
        spec.kernel = k;
    } else if (const auto* g = get("gamma")) {
        spec.kernel = KernelSpec::rbf(LineError(source, g->second).real("gamma", g->first));
    }
    LineError(source, pc.line).guard([&] {
        spec.validate();
        return 0;
    });
    return spec;
}

}  // namespace

SimConfig parse_sim_config(std::istream& in, const std::string& source,
                           std::optional<std::uint64_t> seed_override) {
    static const std::vector<std::string> kCellKeys{"id", "model", "noise", "noise_param", "scale", "n",
                                                   "repetitions", "seed", "a", "beta0", "beta1",
                                                   "kernel", "gamma"};
    SimConfig cfg;
    bool have_schema = false;
    bool have_seed = false;
    std::vector<PendingCell> cells;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const LineError at(source, line_no);
        std::string line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = strip(line);
        if (line.empty()) {
            continue;
        }
        if (!have_schema) {
            std::istringstream ls(line);
            std::string name;
            int version = 0;
            if (!(ls >> name >> version) || name != kConfigSchema) {
                at.fail(std::string("first line must be '") + kConfigSchema + " " +
                        std::to_string(kConfigVersion) + "'");
            }
            if (version != kConfigVersion) {
                at.fail("unsupported config version " + std::to_string(version));
            }
            have_schema = true;
            continue;
        }
        if (line == "[cell]") {
            cells.push_back(PendingCell{line_no, {}});
            continue;
        }
        if (line.front() == '[') {
            at.fail("unknown section '" + line + "'");
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            at.fail("expected 'key = value'");
        }
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        if (!cells.empty()) {
            if (std::find(kCellKeys.begin(), kCellKeys.end(), key) == kCellKeys.end()) {
                at.fail("unknown cell key '" + key + "'");
            }
            if (!cells.back().values.emplace(key, std::make_pair(value, line_no)).second) {
                at.fail("duplicate key '" + key + "'");
            }
            continue;
        }
        auto& s = cfg.options.settings;
        if (key == "seed") {
            cfg.seed = at.count(key, value);
            have_seed = true;
        } else if (key == "methods") {
            cfg.options.methods.clear();
            for (const auto& m : split_list(value)) {
                cfg.options.methods.push_back(at.guard([&] { return parse_method(m); }));
            }
            if (cfg.options.methods.empty()) {
                at.fail("'methods' is empty");
            }
        } else if (key == "threads") {
            cfg.options.threads = static_cast<unsigned>(at.count(key, value));
        } else if (key == "c") {
            s.c = at.real(key, value);
        } else if (key == "c_rule") {
            if (value == "fixed") {
                s.c_rule = CRule::Fixed;
            } else if (value == "cm") {
                s.c_rule = CRule::Cm;
            } else {
                at.fail("'c_rule' expects fixed or cm");
            }
        } else if (key == "tuning_c") {
            s.tuning_c = at.real(key, value);
        } else if (key == "tuning_epsilon") {
            s.tuning_epsilon = at.real(key, value);
        } else if (key == "folds") {
            s.folds = at.count(key, value);
        } else if (key == "candidates") {
            s.candidates.clear();
            for (const auto& c : split_list(value)) {
                s.candidates.push_back(at.real(key, c));
            }
        } else if (key == "tol_kkt") {
            s.tol_kkt = at.real(key, value);
        } else {
            at.fail("unknown key '" + key + "'");
        }
    }
    if (!have_schema) {
        throw ValidationError(source + ": empty config (missing '" + std::string(kConfigSchema) + " " +
                              std::to_string(kConfigVersion) + "' line)");
    }
    if (seed_override) {
        cfg.seed = *seed_override;
        have_seed = true;
    }
    if (!have_seed) {
        throw ValidationError(source + ": missing required key 'seed'");
    }
    if (cells.empty()) {
        throw ValidationError(source + ": experiment grid is empty (no [cell] sections)");
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        cfg.grid.push_back(build_cell(cells[i], i, cfg.seed, source));
    }
    return cfg;
}

SimConfig load_sim_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config " + path.string());
    }
    return parse_sim_config(in, path.string(), seed_override);
}

}  // namespace ddsvr
