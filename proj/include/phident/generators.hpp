#pragma once

#include "phident/rng.hpp"
#include "phident/system.hpp"

#include <cmath>
#include <cstdint>
#include <string>

namespace phident {

// Printed default for the dissipation-factor rank of initial guesses.
inline Index default_rank(Index n) { return std::max<Index>(1, n / 10); }

// The deterministic initial guess used by the identification experiments:
//   J  random skew (independent uniform [-1, 1) strict upper triangle, drawn
//      row-major, mirrored with negated sign),
//   Q  identity,
//   G  identity block of rank r on top, zeros below (so R has an r-by-r
//      identity block),
//   B  identity block of size m on top, zeros below,
//   x0 zero.
template <typename Scalar>
PhSystem<Scalar> default_initial_guess(Index n, Index m, Index r, std::uint64_t seed) {
    if (n < 1) throw DimensionError("default_initial_guess: n must be >= 1");
    if (m < 1 || m > n) throw DimensionError("default_initial_guess: need 1 <= m <= n");
    if (r < 1 || r > n) throw DimensionError("default_initial_guess: need 1 <= r <= n");

    Rng rng(seed);
    Mat<Scalar> j = Mat<Scalar>::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index k = i + 1; k < n; ++k) {
            const Scalar v = static_cast<Scalar>(rng.uniform_sym());
            j(i, k) = v;
            j(k, i) = -v;
        }

    Mat<Scalar> g = Mat<Scalar>::Zero(n, r);
    g.topLeftCorner(r, r).setIdentity();
    Mat<Scalar> b = Mat<Scalar>::Zero(n, m);
    b.topLeftCorner(m, m).setIdentity();

    return PhSystem<Scalar>(SkewMatrix<Scalar>(j), PsdFactor<Scalar>(g),
                            SpdMatrix<Scalar>(Mat<Scalar>::Identity(n, n)), std::move(b),
                            Vec<Scalar>::Zero(n));
}

// Random reference system: J the skew part of a uniform [-1, 1) matrix, G
// uniform [-1, 1) of rank r, Q = M^T M + I with M uniform [-1, 1) scaled by
// n^{-1/2}, B uniform [-1, 1), x0 = 0.  The scaling keeps the spectrum of
// (J - R) Q at O(1) as n grows, so random references stay in the regime the
// optimizer's unit initial step is tuned for.  Draw order: J source matrix
// (n*n entries, row-major), then G, then M, then B.
template <typename Scalar>
PhSystem<Scalar> gen_random_phs(Index n, Index m, Index r, std::uint64_t seed) {
    if (n < 1) throw DimensionError("gen_random_phs: n must be >= 1");
    if (m < 1 || m > n) throw DimensionError("gen_random_phs: need 1 <= m <= n");
    if (r < 1 || r > n) throw DimensionError("gen_random_phs: need 1 <= r <= n");

    Rng rng(seed);
    Mat<Scalar> a = random_uniform_matrix<Scalar>(n, n, rng);
    Mat<Scalar> g = random_uniform_matrix<Scalar>(n, r, rng);
    Mat<Scalar> m_src = random_uniform_matrix<Scalar>(n, n, rng);
    Mat<Scalar> b = random_uniform_matrix<Scalar>(n, m, rng);

    m_src *= Scalar(1) / std::sqrt(static_cast<Scalar>(n));
    Mat<Scalar> q = Mat<Scalar>(m_src.transpose() * m_src) + Mat<Scalar>::Identity(n, n);

    return PhSystem<Scalar>(SkewMatrix<Scalar>(project_skew(a)), PsdFactor<Scalar>(g),
                            SpdMatrix<Scalar>(q), std::move(b), Vec<Scalar>::Zero(n));
}

// Reference output for a dataset: simulate the system and keep y.
template <typename Scalar>
Signal<Scalar> make_dataset(const PhSystem<Scalar>& sys, const Signal<Scalar>& u) {
    return simulate(sys, u).y;
}

template <typename Scalar>
struct NoiseSpec {
    Scalar sigma = Scalar(0);
    std::uint64_t seed = 0;
};

// Additive i.i.d. Gaussian noise, sigma * n_ij, at every node and channel
// (drawn row-major over the sample matrix).  sigma = 0 returns the signal
// unchanged without consuming any randomness.
template <typename Scalar>
Signal<Scalar> add_noise(const Signal<Scalar>& y, const NoiseSpec<Scalar>& spec) {
    if (spec.sigma < Scalar(0)) throw ParameterError("add_noise: sigma must be >= 0");
    if (spec.sigma == Scalar(0)) return y;
    Rng rng(spec.seed);
    Mat<Scalar> noisy = y.samples;
    for (Index i = 0; i < noisy.rows(); ++i)
        for (Index j = 0; j < noisy.cols(); ++j)
            noisy(i, j) += spec.sigma * static_cast<Scalar>(rng.normal());
    return Signal<Scalar>(y.grid, std::move(noisy));
}

template <typename Scalar>
struct MsdParams {
    Index cells = 50;
    Scalar mass = Scalar(4);
    Scalar damping = Scalar(1);
    Scalar stiffness = Scalar(4);
};

// Chain of mass-spring-damper cells: each mass couples to its neighbor by a
// spring, the last mass to a wall by a spring, and every mass to the ground
// by a damper; external forces act on the first two masses and the outputs
// are their velocities.  State ordering x = (q_1, p_1, q_2, p_2, ...) with
// displacements q and momenta p, so
//
//     H = sum_i p_i^2 / (2 mass) + sum_i (stiffness/2) (q_i - q_{i+1})^2,
//
// with q_{cells+1} := 0 for the wall spring.  That gives J block-diagonal in
// [[0, 1], [-1, 0]] blocks, Q with momentum diagonal 1/mass and a tridiagonal
// displacement block (first diagonal entry stiffness, the rest 2*stiffness,
// off-diagonal -stiffness), R = damping on the momentum diagonal (factor rank
// = cells), and y = B^T Q x = (p_1/mass, p_2/mass).  Damping may be zero for
// the conservative chain used by the energy tests.
template <typename Scalar>
PhSystem<Scalar> msd_chain(const MsdParams<Scalar>& params, Index m_ports = 2) {
    if (params.cells < 2) throw ParameterError("msd_chain: need at least two cells");
    if (!(params.mass > Scalar(0)) || !(params.stiffness > Scalar(0)) ||
        params.damping < Scalar(0))
        throw ParameterError("msd_chain: mass and stiffness must be positive, damping >= 0");
    if (m_ports != 2) throw ParameterError("msd_chain: forces act on the first two masses");

    const Index cells = params.cells;
    const Index n = 2 * cells;
    Mat<Scalar> j = Mat<Scalar>::Zero(n, n);
    Mat<Scalar> q = Mat<Scalar>::Zero(n, n);
    Mat<Scalar> g = Mat<Scalar>::Zero(n, cells);
    Mat<Scalar> b = Mat<Scalar>::Zero(n, 2);

    for (Index i = 0; i < cells; ++i) {
        const Index qi = 2 * i;
        const Index pi = 2 * i + 1;
        j(qi, pi) = Scalar(1);
        j(pi, qi) = Scalar(-1);
        q(pi, pi) = Scalar(1) / params.mass;
        q(qi, qi) = (i == 0) ? params.stiffness : Scalar(2) * params.stiffness;
        if (i + 1 < cells) {
            q(qi, 2 * (i + 1)) = -params.stiffness;
            q(2 * (i + 1), qi) = -params.stiffness;
        }
        g(pi, i) = std::sqrt(params.damping);
    }
    b(1, 0) = Scalar(1);
    b(3, 1) = Scalar(1);

    return PhSystem<Scalar>(SkewMatrix<Scalar>(j), PsdFactor<Scalar>(g), SpdMatrix<Scalar>(q),
                            std::move(b), Vec<Scalar>::Zero(n));
}

}  // namespace phident
