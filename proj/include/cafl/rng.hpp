#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace cafl {

// splitmix64 stream. Used instead of std engines so that every stream is
// bit-identical across platforms and cheap to fork per purpose.
struct Rng {
    uint64_t state = 0;

    explicit Rng(uint64_t seed) : state(seed) {}

    uint64_t next_u64() {
        state += 0x9E3779B97F4A7C15ull;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1), 53-bit resolution
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // uniform index in [0, n), n >= 1
    size_t next_index(size_t n) {
        size_t i = size_t(next_double() * double(n));
        return i < n ? i : n - 1;
    }

    // uniform in [-a, a]
    double next_symmetric(double a) { return (2.0 * next_double() - 1.0) * a; }
};

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Independent sub-stream seed for a purpose tag ("init", "select/7",
// "batch/3/12", "het/0"). Tag scheme is documented in the README.
inline uint64_t sub_seed(uint64_t master, std::string_view tag) {
    Rng r(master ^ fnv1a64(tag));
    return r.next_u64();
}

}  // namespace cafl
