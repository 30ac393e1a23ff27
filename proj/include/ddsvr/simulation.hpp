#pragma once

#include "ddsvr/core.hpp"
#include "ddsvr/evaluation.hpp"
#include "ddsvr/kernels.hpp"
#include "ddsvr/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ddsvr {

enum class NoiseFamily { EpsLaplacian, Normal, Uniform };

std::string to_string(NoiseFamily family);
NoiseFamily parse_noise_family(const std::string& name);

/// `param` is epsilon, sigma or b depending on the family; `scale` is s.
struct NoiseSpec {
    NoiseFamily family = NoiseFamily::EpsLaplacian;
    double param = 0.0;
    double scale = 1.0;

    void validate() const;
};

enum class ModelKind { Sinc, Linear };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

/// Sinc amplitude per noise family: 5, 4, 6.
double sinc_amplitude(NoiseFamily family);
/// Linear slope per noise family: 2, 2, 1.
double linear_slope(NoiseFamily family);

struct SimSpec {
    std::string id;
    ModelKind model = ModelKind::Sinc;
    /// Sinc amplitude.
    double a = 5.0;
    double beta0 = 1.0;
    double beta1 = 2.0;
    NoiseSpec noise;
    std::size_t n = 200;
    std::size_t repetitions = 100;
    std::uint64_t seed = 0;
    /// RBF (gamma 1/d) for sinc, linear for the linear model unless overridden.
    std::optional<KernelSpec> kernel;

    /// SimSpec with a and beta1 set from the noise family.
    static SimSpec sinc(NoiseSpec noise, std::size_t n, std::size_t repetitions, std::uint64_t seed);
    static SimSpec linear(NoiseSpec noise, std::size_t n, std::size_t repetitions, std::uint64_t seed);

    KernelSpec effective_kernel() const;
    void validate() const;
};

struct GeneratedData {
    Dataset data;
    std::vector<double> mu;
};

/// n standardized draws u_i (not yet multiplied by the scale).
std::vector<double> draw_noise(const NoiseSpec& spec, RngStream& rng, std::size_t n);

/// x ~ unif[-10, 10], mu = a sin(x) / x (a at x = 0), y = mu + s u.
GeneratedData gen_sinc(const SimSpec& spec, RngStream& rng);
/// x ~ N(0, 1), mu = beta0 + beta1 x, y = mu + s u.
GeneratedData gen_linear(const SimSpec& spec, RngStream& rng);
GeneratedData generate(const SimSpec& spec, RngStream& rng);

struct TableOptions {
    std::vector<MethodId> methods{MethodId::Tuning, MethodId::CM, MethodId::KCv, MethodId::DD};
    MethodSettings settings;
    /// Worker threads; 0 uses the hardware concurrency.
    unsigned threads = 0;
};

struct CellResult {
    SimSpec spec;
    MethodAggregate summary;
};

/**
 * Monte-Carlo runner. Repetition r of a cell draws from seed
 * derive_seed(cell.seed, r); the data comes from stream 0, the 50/50 split
 * uses derive_seed(rep_seed, 1) and the k-CV folds derive_seed(rep_seed, 2).
 * Sinc cells are scored against mu on the test half, linear cells against y.
 * A repetition in which any method throws is excluded from every average
 * and counted in `failed`.
 */
std::vector<CellResult> run_table(std::span<const SimSpec> grid, const TableOptions& options);

/// Per-repetition reports for one cell, in repetition order.
std::vector<RepetitionOutcome> run_cell(const SimSpec& spec, const TableOptions& options);

/// Columns: experiment_id,model,noise,noise_param,scale,n,completed,failed,
/// method,mae,rmse,ratio_mae,ratio_rmse,epsilon_used,s_hat,seed
void write_table_csv(std::ostream& out, std::span<const CellResult> results);

struct SimConfig {
    std::uint64_t seed = 0;
    TableOptions options;
    std::vector<SimSpec> grid;
};

/// Parses the versioned key-value experiment format (see configs/README.md).
/// Errors name the offending line.
/// A given `seed_override` replaces the master seed (and makes the seed key
/// optional); cells with an explicit seed keep it.
SimConfig parse_sim_config(std::istream& in, const std::string& source_name = "<config>",
                           std::optional<std::uint64_t> seed_override = std::nullopt);
SimConfig load_sim_config(const std::filesystem::path& path,
                          std::optional<std::uint64_t> seed_override = std::nullopt);

}  // namespace ddsvr
