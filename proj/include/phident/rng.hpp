#pragma once

#include "phident/types.hpp"

#include <cmath>
#include <cstdint>

namespace phident {

// Deterministic 64-bit random generator with a portable specification, so
// that any language can reproduce the exact streams used by the generators
// and the noise injection:
//
//   * State setup: the four 64-bit words of state are the first four outputs
//     of splitmix64 applied to the seed,
//         z  = (x += 0x9e3779b97f4a7c15)
//         z ^= z >> 30;  z *= 0xbf58476d1ce4e5b9
//         z ^= z >> 27;  z *= 0x94d049bb133111eb
//         return z ^ (z >> 31)
//   * Core stream: xoshiro256**,
//         r = rotl(s1 * 5, 7) * 9;  t = s1 << 17
//         s2 ^= s0;  s3 ^= s1;  s1 ^= s2;  s0 ^= s3;  s2 ^= t
//         s3 = rotl(s3, 45)
//   * uniform01() = (r >> 11) * 2^-53, in [0, 1)
//   * uniform_sym() = 2 * uniform01() - 1, in [-1, 1)
//   * normal(): Marsaglia polar method on uniform_sym pairs (v1 drawn first,
//     then v2, per attempt); the second deviate v2*f is cached and returned
//     by the next call.  The cache survives across fill operations on the
//     same generator instance.
//
// Matrix and vector fills consume the stream entry by entry in row-major
// order.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5u, 7) * 9u;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0, 1) with 53 random mantissa bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on [-1, 1).
    double uniform_sym() { return 2.0 * uniform01() - 1.0; }

    // Standard normal deviate (Marsaglia polar method).
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double v1 = 0.0, v2 = 0.0, r2 = 0.0;
        do {
            v1 = uniform_sym();
            v2 = uniform_sym();
            r2 = v1 * v1 + v2 * v2;
        } while (r2 >= 1.0 || r2 == 0.0);
        const double f = std::sqrt(-2.0 * std::log(r2) / r2);
        cached_ = v2 * f;
        have_cached_ = true;
        return v1 * f;
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    std::uint64_t state_[4] = {};
    double cached_ = 0.0;
    bool have_cached_ = false;
};

// n-by-m matrix with independent uniform [-1, 1) entries, filled row-major.
template <typename Scalar>
Mat<Scalar> random_uniform_matrix(Index rows, Index cols, Rng& rng) {
    Mat<Scalar> out(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) out(i, j) = static_cast<Scalar>(rng.uniform_sym());
    return out;
}

// n-by-m matrix with independent standard normal entries, filled row-major.
template <typename Scalar>
Mat<Scalar> random_normal_matrix(Index rows, Index cols, Rng& rng) {
    Mat<Scalar> out(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) out(i, j) = static_cast<Scalar>(rng.normal());
    return out;
}

}  // namespace phident
