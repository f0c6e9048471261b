#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace fusetext {

// All stochastic code draws from this engine through the helpers below, so
// a seed fixes results independently of the standard library's distributions.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Uniform index in [0, n) by rejection, n > 0.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return static_cast<std::size_t>(r % bound);
}

// Fisher-Yates.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[uniform_index(rng, i)]);
}

// Index drawn proportionally to nonnegative weights, given their sum.
inline std::size_t sample_discrete(Rng& rng, const std::vector<double>& weights, double total) {
    double u = uniform01(rng) * total;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        u -= weights[k];
        if (u < 0.0) return k;
    }
    for (std::size_t k = weights.size(); k-- > 0;)
        if (weights[k] > 0.0) return k;
    return weights.size() - 1;
}

}  // namespace fusetext
