#include "ddsvr/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ddsvr {

KernelSpec KernelSpec::rbf_default(std::size_t feature_count) {
    if (feature_count == 0) {
        throw ValidationError("default RBF gamma needs at least one feature");
    }
    return rbf(1.0 / static_cast<double>(feature_count));
}

void KernelSpec::validate() const {
    if (family == KernelFamily::Rbf && !(gamma > 0.0 && std::isfinite(gamma))) {
        throw ValidationError("RBF gamma must be positive and finite");
    }
}

std::string to_string(KernelFamily family) {
    return family == KernelFamily::Linear ? "linear" : "rbf";
}

KernelFamily parse_kernel_family(const std::string& name) {
    if (name == "linear") {
        return KernelFamily::Linear;
    }
    if (name == "rbf") {
        return KernelFamily::Rbf;
    }
    throw ValidationError("unknown kernel '" + name + "' (expected linear or rbf)");
}

double kernel_eval(const KernelSpec& spec, std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ValidationError("kernel arguments differ in dimension: " + std::to_string(a.size()) +
                              " vs " + std::to_string(b.size()));
    }
    if (spec.family == KernelFamily::Linear) {
        double dot = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            dot += a[k] * b[k];
        }
        return dot;
    }
    double sq = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a[k] - b[k];
        sq += diff * diff;
    }
    return std::exp(-spec.gamma * sq);
}

std::vector<double> gram_row(const KernelSpec& spec, const Dataset& data, std::size_t i) {
    if (i >= data.rows()) {
        throw std::out_of_range("gram_row index " + std::to_string(i) + " out of range for " +
                                std::to_string(data.rows()) + " rows");
    }
    std::vector<double> out(data.rows());
    const auto xi = data.row(i);
    for (std::size_t j = 0; j < data.rows(); ++j) {
        out[j] = kernel_eval(spec, xi, data.row(j));
    }
    return out;
}

KernelCache::KernelCache(const KernelSpec& spec, const Dataset& data, std::size_t budget_bytes)
    : spec_(spec), data_(data) {
    spec_.validate();
    const std::size_t row_bytes = std::max<std::size_t>(1, data.rows() * sizeof(double));
    capacity_ = std::max<std::size_t>(2, budget_bytes / row_bytes);
    diag_.resize(data.rows());
    for (std::size_t i = 0; i < data.rows(); ++i) {
        diag_[i] = kernel_eval(spec_, data.row(i), data.row(i));
    }
}

std::span<const double> KernelCache::row(std::size_t i) {
    if (auto it = lookup_.find(i); it != lookup_.end()) {
        ++hits_;
        lru_.splice(lru_.begin(), lru_, it->second);
        return lru_.front().values;
    }
    ++misses_;
    if (lru_.size() >= capacity_) {
        // Recycle the least recently used buffer.
        auto last = std::prev(lru_.end());
        lookup_.erase(last->index);
        lru_.splice(lru_.begin(), lru_, last);
        lru_.front().index = i;
    } else {
        lru_.push_front(Entry{i, std::vector<double>(data_.rows())});
    }
    auto& values = lru_.front().values;
    const auto xi = data_.row(i);
    for (std::size_t j = 0; j < data_.rows(); ++j) {
        values[j] = kernel_eval(spec_, xi, data_.row(j));
    }
    lookup_[i] = lru_.begin();
    return values;
}

}  // namespace ddsvr
