#pragma once

#include <cstdint>
#include <vector>

namespace copa {

// splitmix64. Every randomized stage in the pipeline draws from this
// generator so outputs are bit-identical across platforms and languages.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform draw in [0, n).
    uint64_t next_below(uint64_t n) { return next() % n; }

    // Fair coin.
    bool next_bool() { return (next() & 1ULL) != 0; }

    // Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform double in [lo, hi).
    double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }

private:
    uint64_t state_;
};

// Fisher-Yates using successive splitmix64 outputs.
template <typename T>
void shuffle(std::vector<T>& v, SplitMix64& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.next_below(i));
        std::swap(v[i - 1], v[j]);
    }
}

// Seed for any randomized transform or training run. Identical seed and
// identical input must give bit-identical output.
struct Seed {
    uint64_t value = 0;
};

}  // namespace copa
