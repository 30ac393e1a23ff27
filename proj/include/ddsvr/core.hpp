#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ddsvr {

/// Bad input or configuration. The CLI maps this to exit status 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Per-column centering and scaling recorded from a training set.
struct Standardization {
    std::vector<double> means;
    std::vector<double> stds;

    bool empty() const noexcept { return means.empty(); }
};

/**
 * Feature matrix (row-major, rows x cols) plus target vector.
 *
 * When the dataset came out of standardize_features() or apply(), `scaling`
 * holds the statistics that were applied so test rows can be mapped the same
 * way.
 */
class Dataset {
public:
    Dataset() = default;
    Dataset(std::size_t rows, std::size_t cols, std::vector<double> features,
            std::vector<double> targets);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    std::span<const double> row(std::size_t i) const noexcept {
        return {features_.data() + i * cols_, cols_};
    }
    double at(std::size_t i, std::size_t j) const noexcept { return features_[i * cols_ + j]; }

    const std::vector<double>& features() const noexcept { return features_; }
    const std::vector<double>& targets() const noexcept { return targets_; }
    const Standardization& scaling() const noexcept { return scaling_; }

    /// Same features, new targets (e.g. rescaled by the noise scale).
    Dataset with_targets(std::vector<double> targets) const;

    /// Same values, with `stats` recorded as the scaling already applied.
    Dataset with_scaling(Standardization stats) const;

    /// Rows picked by index, in the given order. Scaling is carried over.
    Dataset subset(std::span<const std::size_t> indices) const;

    /// Throws ValidationError naming the first non-finite entry.
    void require_finite() const;

private:
    friend Dataset standardize_features(const Dataset& raw);
    friend Dataset apply_standardization(const Dataset& raw, const Standardization& stats);

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> features_;
    std::vector<double> targets_;
    Standardization scaling_;
};

/// Centers and scales each column by its mean and sample (n-1) standard
/// deviation. Constant columns get std 1 and map to zeros. Targets untouched.
Dataset standardize_features(const Dataset& raw);

/// Applies previously recorded statistics (typically the training set's).
Dataset apply_standardization(const Dataset& raw, const Standardization& stats);

/// Maps standardized features back to raw units.
std::vector<double> invert_standardization(const Dataset& standardized);

struct SplitSpec {
    double train_fraction = 0.5;
    std::uint64_t seed = 0;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Seeded shuffle; the first round(n * train_fraction) rows of the permutation
/// form the training set. Both index lists are returned sorted.
SplitIndices split_indices(std::size_t n, const SplitSpec& spec);

std::pair<Dataset, Dataset> split(const Dataset& data, const SplitSpec& spec);

struct NumericTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

/// Numeric CSV with a header row. Every field must parse as a finite real;
/// errors carry the line number.
NumericTable read_numeric_csv(const std::filesystem::path& path);

struct CsvTable {
    std::vector<std::string> header;
    Dataset data;
    std::string target_name;
};

/// Reads a numeric CSV with a header row. The target is the last column unless
/// `target` names another one.
CsvTable read_csv_dataset(const std::filesystem::path& path,
                          const std::optional<std::string>& target = std::nullopt);

/// Reads a single numeric column (header required) such as a residual file.
std::vector<double> read_csv_column(const std::filesystem::path& path,
                                    const std::optional<std::string>& column = std::nullopt);

}  // namespace ddsvr
