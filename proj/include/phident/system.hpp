#pragma once

#include "phident/structured.hpp"
#include "phident/types.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

namespace phident {

// Uniform time grid on [0, T] with steps*dt == T and steps+1 sample nodes.
template <typename Scalar>
struct TimeGrid {
    Scalar T = Scalar(0);
    Scalar dt = Scalar(0);
    Index steps = 0;

    TimeGrid(Scalar horizon, Scalar step) : T(horizon), dt(step) {
        if (!(dt > Scalar(0))) throw ParameterError("TimeGrid: dt must be positive");
        const double ratio = static_cast<double>(horizon) / static_cast<double>(step);
        steps = static_cast<Index>(std::llround(ratio));
        if (steps < 1) throw GridError("TimeGrid: horizon shorter than one step");
        if (std::abs(Scalar(steps) * dt - T) >
            Scalar(1e-12) * std::max(Scalar(1), std::abs(T)))
            throw GridError("TimeGrid: horizon is not an integer number of steps");
    }

    Index nodes() const { return steps + 1; }
    Scalar time(Index i) const { return dt * Scalar(i); }

    bool same_as(const TimeGrid& other) const {
        return steps == other.steps &&
               std::abs(dt - other.dt) <= Scalar(1e-12) * dt;
    }
};

// Vector-valued time series sampled on every node of a grid (both endpoints
// included); samples are stored one node per row.
template <typename Scalar>
struct Signal {
    TimeGrid<Scalar> grid;
    Mat<Scalar> samples;

    Signal(TimeGrid<Scalar> g, Mat<Scalar> s) : grid(g), samples(std::move(s)) {
        if (samples.rows() != grid.nodes())
            throw GridError("Signal: " + std::to_string(samples.rows()) +
                            " rows for a grid with " + std::to_string(grid.nodes()) +
                            " nodes");
        if (samples.cols() < 1) throw DimensionError("Signal: needs at least one channel");
    }

    Index dim() const { return samples.cols(); }
};

// Linear port-Hamiltonian system
//
//     dx/dt = (J - R) Q x + B u,      y = B^T Q x,      H(x) = x^T Q x / 2
//
// with J skew-symmetric, R = G G^T positive semidefinite of fixed factor
// rank, and Q symmetric positive definite.  The structured wrappers make the
// invariants hold by construction.
template <typename Scalar>
struct PhSystem {
    SkewMatrix<Scalar> J;
    PsdFactor<Scalar> G;
    SpdMatrix<Scalar> Q;
    Mat<Scalar> B;
    Vec<Scalar> x0;

    PhSystem(SkewMatrix<Scalar> j, PsdFactor<Scalar> g, SpdMatrix<Scalar> q,
             Mat<Scalar> b, Vec<Scalar> x_init)
        : J(std::move(j)), G(std::move(g)), Q(std::move(q)), B(std::move(b)),
          x0(std::move(x_init)) {
        const Index dim = J.dim();
        if (G.dim() != dim || Q.dim() != dim || B.rows() != dim || x0.size() != dim)
            throw DimensionError("PhSystem: inconsistent dimensions");
        if (B.cols() < 1) throw DimensionError("PhSystem: needs at least one port");
    }

    Index n() const { return J.dim(); }
    Index m() const { return B.cols(); }
    Index r() const { return G.rank(); }

    // Dissipation matrix R = G G^T.
    Mat<Scalar> r_mat() const { return G.product(); }
};

// State and output samples produced by a forward simulation.
template <typename Scalar>
struct Trajectory {
    TimeGrid<Scalar> grid;
    Mat<Scalar> x;  // (steps+1) x n, one state per row
    Signal<Scalar> y;
};

// Total energy H(x) = x^T Q x / 2.
template <typename Scalar>
Scalar hamiltonian(const PhSystem<Scalar>& sys, const Vec<Scalar>& x) {
    if (x.size() != sys.n()) throw DimensionError("hamiltonian: state dimension mismatch");
    return Scalar(0.5) * x.dot(sys.Q.mat() * x);
}

// Explicit Euler discretization of the state equation:
//
//     x[0] = x0,   x[i+1] = x[i] + dt ((J - R) Q x[i] + B u[i]),
//     y[i] = B^T Q x[i]  at every node.
template <typename Scalar>
Trajectory<Scalar> simulate(const PhSystem<Scalar>& sys, const Signal<Scalar>& u) {
    if (u.dim() != sys.m())
        throw DimensionError("simulate: input has " + std::to_string(u.dim()) +
                             " channels, system has " + std::to_string(sys.m()) + " ports");
    const TimeGrid<Scalar>& grid = u.grid;
    const Index n = sys.n();
    const Scalar dt = grid.dt;

    // Row-vector recurrence: x_{i+1}^T = x_i^T + dt (x_i^T A^T + u_i^T B^T).
    Mat<Scalar> a_t = Mat<Scalar>((sys.J.mat() - sys.r_mat()) * sys.Q.mat()).transpose();
    Mat<Scalar> b_t = sys.B.transpose();

    Mat<Scalar> x(grid.nodes(), n);
    x.row(0) = sys.x0.transpose();
    for (Index i = 0; i < grid.steps; ++i) {
        x.row(i + 1) = x.row(i) + dt * (x.row(i) * a_t + u.samples.row(i) * b_t);
        if (!x.row(i + 1).allFinite())
            throw DivergenceError("simulate: state became non-finite at step " +
                                  std::to_string(i + 1));
    }

    Mat<Scalar> qb = sys.Q.mat() * sys.B;
    Mat<Scalar> y = x * qb;
    return Trajectory<Scalar>{grid, std::move(x), Signal<Scalar>(grid, std::move(y))};
}

// The input signal used by all synthetic experiments,
// u(t) = (10 sin(2 pi t), 5 cos(2 pi t)), truncated to the first m channels.
template <typename Scalar>
Signal<Scalar> standard_input(const TimeGrid<Scalar>& grid, Index m = 2) {
    if (m < 1 || m > 2)
        throw ParameterError("standard_input: defined for one or two channels");
    Mat<Scalar> samples(grid.nodes(), m);
    for (Index i = 0; i < grid.nodes(); ++i) {
        const Scalar t = grid.time(i);
        const Scalar two_pi_t = Scalar(2) * std::numbers::pi_v<Scalar> * t;
        samples(i, 0) = Scalar(10) * std::sin(two_pi_t);
        if (m > 1) samples(i, 1) = Scalar(5) * std::cos(two_pi_t);
    }
    return Signal<Scalar>(grid, std::move(samples));
}

}  // namespace phident
