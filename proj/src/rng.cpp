#include "ddsvr/rng.hpp"

#include <cmath>

namespace ddsvr {

namespace {
__extension__ using u128 = unsigned __int128;
}  // namespace

std::uint64_t RngStream::below(std::uint64_t bound) noexcept {
    if (bound <= 1) {
        return 0;
    }
    // 128-bit multiply; reject the biased low region.
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const u128 m = static_cast<u128>(next_u64()) * bound;
        if (static_cast<std::uint64_t>(m) >= threshold) {
            return static_cast<std::uint64_t>(m >> 64);
        }
    }
}

double RngStream::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
}

double RngStream::exponential() noexcept { return -std::log(uniform_open0()); }

}  // namespace ddsvr
