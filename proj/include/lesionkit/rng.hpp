#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lesionkit/errors.hpp"

namespace lesionkit {

// Deterministic random source shared by splitting, balancing and synthesis.
//
// The raw bit stream is std::mt19937_64, whose output sequence is fixed by
// the C++ standard, so identical seeds reproduce identical draws on every
// platform. The standard *distributions* are not pinned down the same way,
// so every derived draw (bounded ints, unit doubles, shuffles, Poisson) is
// implemented here explicitly:
//   - below(n): rejection sampling on the low 64 bits (discard values in the
//     biased remainder range, then take x % n)
//   - unit(): top 53 bits scaled by 2^-53, uniform in [0,1)
//   - shuffle: Fisher-Yates from the front using below()
//   - poisson: Knuth's product-of-uniforms method
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Independent stream for a subtask, e.g. prediction synthesis vs dataset
    // synthesis under one user-facing seed. SplitMix64 finalizer on seed^salt.
    static Rng derive(std::uint64_t seed, std::uint64_t salt) {
        std::uint64_t z = seed ^ (salt + 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return Rng(z ^ (z >> 31));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw Error("Rng::below called with n = 0");
        std::uint64_t threshold = (0ull - n) % n;
        while (true) {
            std::uint64_t x = next_u64();
            if (x >= threshold) return x % n;
        }
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

    long long int_in(long long lo, long long hi) { // inclusive
        return lo + static_cast<long long>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double real_in(double lo, double hi) { return lo + unit() * (hi - lo); }

    bool bernoulli(double p) { return unit() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = 0; i + 1 < v.size(); ++i) {
            std::size_t j = i + index(v.size() - i);
            if (j != i) std::swap(v[i], v[j]);
        }
    }

    // Index drawn proportionally to nonnegative weights.
    std::size_t categorical(std::span<const double> weights) {
        double total = 0;
        for (double w : weights) {
            if (w < 0) throw Error("categorical weight must be nonnegative");
            total += w;
        }
        if (total <= 0) throw Error("categorical weights sum to zero");
        double r = unit() * total;
        double acc = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (r < acc) return i;
        }
        return weights.size() - 1;
    }

    int poisson(double mean) {
        if (mean < 0) throw Error("poisson mean must be nonnegative");
        if (mean == 0) return 0;
        double limit = std::exp(-mean);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= unit();
        } while (p > limit);
        return k - 1;
    }

private:
    std::mt19937_64 engine_;
};

// First k slots of a Fisher-Yates pass over [0, n): a uniform sample of k
// distinct indices. Order is the draw order; callers canonicalize afterwards.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
    if (k > n) throw SampleSizeError("sample size " + std::to_string(k) + " exceeds population " + std::to_string(n));
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + rng.index(n - i);
        if (j != i) std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

} // namespace lesionkit
