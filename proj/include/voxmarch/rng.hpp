#pragma once

#include <cstdint>

#include "voxmarch/math.hpp"

namespace voxmarch {

// splitmix64 step; also used to derive independent seeds from one root seed.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    return splitmix64(s);
}

inline double unit_double(uint64_t bits) {
    return double(bits >> 11) * 0x1.0p-53;  // [0, 1)
}

// Small deterministic generator. The mapping from bits to doubles is fixed
// here rather than delegated to <random> distributions, so sequences are
// identical across standard library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed) { splitmix64(state_); }

    uint64_t next_u64() { return splitmix64(state_); }
    double uniform() { return unit_double(next_u64()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    Vec3 uniform_vec3() {
        double a = uniform(), b = uniform(), c = uniform();
        return {a, b, c};
    }
    // Unbiased integer in [0, n) by rejection.
    uint64_t uniform_below(uint64_t n) {
        if (n == 0) return 0;
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

private:
    uint64_t state_;
};

}  // namespace voxmarch
