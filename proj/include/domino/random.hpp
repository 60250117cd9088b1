#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>

namespace domino {

// splitmix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// child = hash64(master, index). Stable across platforms; not stable under
/// reordering of whatever produced `index`.
inline std::uint64_t hash64(std::uint64_t master, std::uint64_t index) {
    return mix64(mix64(master) ^ (index * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
}

/// Thin wrapper around mt19937_64. Only the raw engine output is used, never
/// std::*_distribution, so sequences are identical on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform on [0, 1) with 53 bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n).
    int below(int n) { return static_cast<int>(uniform() * n); }

    template <typename Vec>
    int categorical(const Vec& probs) {
        const double u = uniform();
        double acc = 0.0;
        const int n = static_cast<int>(probs.size());
        int last_positive = 0;
        for (int k = 0; k < n; ++k) {
            if (probs[k] <= 0.0) continue;
            last_positive = k;
            acc += probs[k];
            if (u < acc) return k;
        }
        return last_positive;  // rounding left u just above the cumulative sum
    }

    double exponential() { return -std::log1p(-uniform()); }

    // Dirichlet(1,...,1) draw via normalized exponentials.
    Eigen::VectorXd flat_dirichlet(int n) {
        Eigen::VectorXd x(n);
        for (int k = 0; k < n; ++k) x[k] = exponential();
        return x / x.sum();
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace domino
