#pragma once

#include "ddsvr/core.hpp"

#include <cstddef>
#include <list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ddsvr {

enum class KernelFamily { Linear, Rbf };

struct KernelSpec {
    KernelFamily family = KernelFamily::Rbf;
    double gamma = 1.0;  // RBF width; ignored for Linear

    static KernelSpec linear() { return {KernelFamily::Linear, 1.0}; }
    static KernelSpec rbf(double gamma) { return {KernelFamily::Rbf, gamma}; }
    /// RBF with gamma = 1 / feature count.
    static KernelSpec rbf_default(std::size_t feature_count);

    void validate() const;
};

std::string to_string(KernelFamily family);
KernelFamily parse_kernel_family(const std::string& name);

/// Linear: <a, b>. Rbf: exp(-gamma * |a - b|^2).
double kernel_eval(const KernelSpec& spec, std::span<const double> a, std::span<const double> b);

/// Row i of the Gram matrix over `data`.
std::vector<double> gram_row(const KernelSpec& spec, const Dataset& data, std::size_t i);

/**
 * Least-recently-used cache of Gram rows for one solver instance.
 *
 * Not thread-safe; each solver owns its cache. Row references stay valid
 * until the next call to row().
 */
class KernelCache {
public:
    static constexpr std::size_t kDefaultBudgetBytes = std::size_t{64} << 20;

    KernelCache(const KernelSpec& spec, const Dataset& data,
                std::size_t budget_bytes = kDefaultBudgetBytes);

    std::span<const double> row(std::size_t i);
    double diagonal(std::size_t i) const noexcept { return diag_[i]; }

    std::size_t hits() const noexcept { return hits_; }
    std::size_t misses() const noexcept { return misses_; }
    std::size_t capacity_rows() const noexcept { return capacity_; }

private:
    struct Entry {
        std::size_t index;
        std::vector<double> values;
    };

    const KernelSpec spec_;
    const Dataset& data_;
    std::size_t capacity_;
    std::vector<double> diag_;
    std::list<Entry> lru_;  // front = most recent
    std::unordered_map<std::size_t, std::list<Entry>::iterator> lookup_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

}  // namespace ddsvr
