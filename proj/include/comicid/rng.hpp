#pragma once

// Deterministic random number generation. The standard <random> distributions
// are implementation-defined, which breaks the bit-exact reproducibility
// contract (same seed => same corpus, same weights, same trace), so the few
// draws we need are implemented here on top of splitmix64.

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace comicid {

inline uint64_t splitmix64_next(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Stable sub-seed derivation: hashes (base, tag, index) into a fresh seed so
// that independent components never share a stream.
inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index = 0) {
    uint64_t state = base ^ (fnv1a64(tag) + 0x9e3779b97f4a7c15ULL);
    state ^= splitmix64_next(state) + index * 0xd1b54a32d192ed03ULL;
    splitmix64_next(state);
    return splitmix64_next(state);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // burn-in so that small seeds diverge immediately
        splitmix64_next(state_);
    }

    uint64_t next_u64() { return splitmix64_next(state_); }

    // uniform in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [lo, hi], inclusive; rejection sampling keeps it unbiased
    int next_int(int lo, int hi) {
        if (hi <= lo) return lo;
        uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
        uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return lo + static_cast<int>(v % span);
    }

    // standard normal via Box-Muller with a cached spare
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 1e-300) u1 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_int(0, static_cast<int>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace comicid
