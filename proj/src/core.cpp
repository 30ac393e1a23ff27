#include "ddsvr/core.hpp"

#include "ddsvr/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ddsvr {

Dataset::Dataset(std::size_t rows, std::size_t cols, std::vector<double> features,
                 std::vector<double> targets)
    : rows_(rows), cols_(cols), features_(std::move(features)), targets_(std::move(targets)) {
    if (cols_ == 0) {
        throw ValidationError("dataset must have at least one feature column");
    }
    if (features_.size() != rows_ * cols_) {
        throw ValidationError("feature buffer size " + std::to_string(features_.size()) +
                              " does not match " + std::to_string(rows_) + " x " +
                              std::to_string(cols_));
    }
    if (targets_.size() != rows_) {
        throw ValidationError("target count " + std::to_string(targets_.size()) +
                              " does not match row count " + std::to_string(rows_));
    }
}

Dataset Dataset::with_targets(std::vector<double> targets) const {
    Dataset out(rows_, cols_, features_, std::move(targets));
    out.scaling_ = scaling_;
    return out;
}

Dataset Dataset::with_scaling(Standardization stats) const {
    if (!stats.empty() && (stats.means.size() != cols_ || stats.stds.size() != cols_)) {
        throw ValidationError("scaling statistics do not match the column count");
    }
    Dataset out = *this;
    out.scaling_ = std::move(stats);
    return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    std::vector<double> feats;
    std::vector<double> targs;
    feats.reserve(indices.size() * cols_);
    targs.reserve(indices.size());
    for (std::size_t idx : indices) {
        if (idx >= rows_) {
            throw std::out_of_range("subset index " + std::to_string(idx) + " out of range");
        }
        auto r = row(idx);
        feats.insert(feats.end(), r.begin(), r.end());
        targs.push_back(targets_[idx]);
    }
    Dataset out(indices.size(), cols_, std::move(feats), std::move(targs));
    out.scaling_ = scaling_;
    return out;
}

void Dataset::require_finite() const {
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) {
            if (!std::isfinite(at(i, j))) {
                throw ValidationError("non-finite feature at row " + std::to_string(i) +
                                      ", column " + std::to_string(j));
            }
        }
        if (!std::isfinite(targets_[i])) {
            throw ValidationError("non-finite target at row " + std::to_string(i));
        }
    }
}

Dataset standardize_features(const Dataset& raw) {
    if (raw.rows() < 2) {
        throw ValidationError("standardization needs at least 2 rows");
    }
    raw.require_finite();
    const std::size_t n = raw.rows();
    const std::size_t d = raw.cols();
    Standardization stats{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += raw.at(i, j);
        }
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dev = raw.at(i, j) - mean;
            ss += dev * dev;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        stats.means[j] = mean;
        stats.stds[j] = sd > 0.0 ? sd : 1.0;
    }
    return apply_standardization(raw, stats);
}

Dataset apply_standardization(const Dataset& raw, const Standardization& stats) {
    if (stats.means.size() != raw.cols() || stats.stds.size() != raw.cols()) {
        throw ValidationError("standardization has " + std::to_string(stats.means.size()) +
                              " columns, dataset has " + std::to_string(raw.cols()));
    }
    std::vector<double> feats(raw.features().size());
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        for (std::size_t j = 0; j < raw.cols(); ++j) {
            feats[i * raw.cols() + j] = (raw.at(i, j) - stats.means[j]) / stats.stds[j];
        }
    }
    Dataset out(raw.rows(), raw.cols(), std::move(feats), raw.targets());
    out.scaling_ = stats;
    return out;
}

std::vector<double> invert_standardization(const Dataset& standardized) {
    const auto& stats = standardized.scaling();
    if (stats.empty()) {
        return standardized.features();
    }
    std::vector<double> raw(standardized.features().size());
    for (std::size_t i = 0; i < standardized.rows(); ++i) {
        for (std::size_t j = 0; j < standardized.cols(); ++j) {
            raw[i * standardized.cols() + j] =
                standardized.at(i, j) * stats.stds[j] + stats.means[j];
        }
    }
    return raw;
}

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw ValidationError("train_fraction must lie in (0, 1)");
    }
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.train_fraction));
    if (n_train < 2 || n_train >= n) {
        throw ValidationError("split of " + std::to_string(n) + " rows at fraction " +
                              std::to_string(spec.train_fraction) +
                              " leaves fewer than 2 training rows or no test rows");
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    RngStream rng(spec.seed, 0);
    // Fisher-Yates, descending.
    for (std::size_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i + 1));
        std::swap(perm[i], perm[j]);
    }
    SplitIndices out;
    out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset& data, const SplitSpec& spec) {
    const auto idx = split_indices(data.rows(), spec);
    return {data.subset(idx.train), data.subset(idx.test)};
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\"");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\"");
    return s.substr(first, last - first + 1);
}

double parse_number(const std::string& text, std::size_t line_no, std::size_t col) {
    const std::string t = trim(text);
    double value = 0.0;
    const auto* begin = t.data();
    const auto* end = t.data() + t.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (t.empty() || ec != std::errc{} || ptr != end) {
        throw ValidationError("line " + std::to_string(line_no) + ", column " +
                              std::to_string(col + 1) + ": '" + t + "' is not a number");
    }
    if (!std::isfinite(value)) {
        throw ValidationError("line " + std::to_string(line_no) + ", column " +
                              std::to_string(col + 1) + ": non-finite value");
    }
    return value;
}

}  // namespace

NumericTable read_numeric_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open " + path.string());
    }
    NumericTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        auto fields = split_fields(line);
        if (table.header.empty()) {
            for (auto& f : fields) {
                table.header.push_back(trim(f));
            }
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw ValidationError("line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(table.header.size()) + " fields, found " +
                                  std::to_string(fields.size()));
        }
        std::vector<double> values(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            values[c] = parse_number(fields[c], line_no, c);
        }
        table.rows.push_back(std::move(values));
    }
    if (table.header.empty()) {
        throw ValidationError(path.string() + ": missing header row");
    }
    return table;
}

CsvTable read_csv_dataset(const std::filesystem::path& path,
                          const std::optional<std::string>& target) {
    auto table = read_numeric_csv(path);
    if (table.header.size() < 2) {
        throw ValidationError(path.string() + ": need at least one feature and one target column");
    }
    std::size_t target_col = table.header.size() - 1;
    if (target) {
        auto it = std::find(table.header.begin(), table.header.end(), *target);
        if (it == table.header.end()) {
            throw ValidationError(path.string() + ": no column named '" + *target + "'");
        }
        target_col = static_cast<std::size_t>(it - table.header.begin());
    }
    const std::size_t n = table.rows.size();
    const std::size_t d = table.header.size() - 1;
    if (n < 2) {
        throw ValidationError(path.string() + ": need at least 2 data rows");
    }
    std::vector<double> feats;
    std::vector<double> targs;
    feats.reserve(n * d);
    targs.reserve(n);
    for (const auto& r : table.rows) {
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (c == target_col) {
                targs.push_back(r[c]);
            } else {
                feats.push_back(r[c]);
            }
        }
    }
    CsvTable out;
    out.target_name = table.header[target_col];
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c != target_col) {
            out.header.push_back(table.header[c]);
        }
    }
    out.data = Dataset(n, d, std::move(feats), std::move(targs));
    return out;
}

std::vector<double> read_csv_column(const std::filesystem::path& path,
                                    const std::optional<std::string>& column) {
    auto table = read_numeric_csv(path);
    std::size_t col = 0;
    if (column) {
        auto it = std::find(table.header.begin(), table.header.end(), *column);
        if (it == table.header.end()) {
            throw ValidationError(path.string() + ": no column named '" + *column + "'");
        }
        col = static_cast<std::size_t>(it - table.header.begin());
    }
    std::vector<double> values;
    values.reserve(table.rows.size());
    for (const auto& r : table.rows) {
        values.push_back(r[col]);
    }
    return values;
}

}  // namespace ddsvr
