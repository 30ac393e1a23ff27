#pragma once

#include <cstdint>

namespace ddsvr {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive a child seed from a parent seed and an index. Used to give each
/// experiment cell / repetition / purpose its own independent stream.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
    return mix64(parent ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/**
 * Counter-based 64-bit random stream.
 *
 * Draw k (k = 0, 1, 2, ...) of stream (seed, stream_id) is
 *
 *     key    = mix64(seed ^ mix64(stream_id + 0x9e3779b97f4a7c15))
 *     out(k) = mix64(key + (k + 1) * 0x9e3779b97f4a7c15)
 *
 * where mix64 is the SplitMix64 finalizer. Uniform doubles take the top 53
 * bits: u = (out >> 11) * 2^-53, which lies in [0, 1).
 *
 * The sequence depends only on (seed, stream_id), so any implementation that
 * follows the formulas above reproduces it bit for bit. A stream is
 * single-owner; give each worker its own stream_id.
 */
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
        : seed_(seed), stream_id_(stream_id),
          key_(mix64(seed ^ mix64(stream_id + kGolden))) {}

    std::uint64_t next_u64() noexcept {
        ++counter_;
        return mix64(key_ + counter_ * kGolden);
    }

    /// Uniform on [0, 1).
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1]; safe as a log() argument.
    double uniform_open0() noexcept { return 1.0 - uniform(); }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, bound) by multiply-shift with rejection (Lemire).
    std::uint64_t below(std::uint64_t bound) noexcept;

    /// Standard normal via the Marsaglia polar method. The spare value of each
    /// accepted pair is cached and returned by the next call.
    double normal() noexcept;

    /// Unit-mean exponential by inversion.
    double exponential() noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }
    std::uint64_t draws() const noexcept { return counter_; }

private:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace ddsvr
