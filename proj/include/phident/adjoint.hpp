#pragma once

#include "phident/system.hpp"

#include <optional>
#include <string>
#include <utility>

namespace phident {

// Costate samples of the backward adjoint solve, one node per row, with
// p[steps] == 0 by the terminal condition.
template <typename Scalar>
struct AdjointTrajectory {
    TimeGrid<Scalar> grid;
    Mat<Scalar> p;  // (steps+1) x n
};

// Gradient components for the five controls.  g_j is exactly skew and g_r,
// g_q exactly symmetric: the assembly applies the tangent-space projections
// bit-exactly.
template <typename Scalar>
struct GradientBundle {
    Mat<Scalar> g_j;
    Mat<Scalar> g_r;
    Mat<Scalar> g_q;
    Mat<Scalar> g_b;
    Vec<Scalar> g_x0;

    Scalar squared_norm() const {
        return g_j.squaredNorm() + g_r.squaredNorm() + g_q.squaredNorm() +
               g_b.squaredNorm() + g_x0.squaredNorm();
    }
    Scalar norm() const { return std::sqrt(squared_norm()); }
};

namespace detail {

template <typename Scalar>
void require_same_grid(const TimeGrid<Scalar>& a, const TimeGrid<Scalar>& b,
                       const char* what) {
    if (!a.same_as(b)) throw GridError(std::string(what) + ": time grids differ");
}

// Penalty term (lambda/2) |w - w_ref|^2 over all five controls, with R
// compared as the product G G^T.
template <typename Scalar>
Scalar penalty(const PhSystem<Scalar>& sys, const PhSystem<Scalar>& ref, Scalar lambda) {
    if (sys.n() != ref.n() || sys.m() != ref.m())
        throw DimensionError("cost: reference system dimensions differ");
    const Scalar d2 = (sys.J.mat() - ref.J.mat()).squaredNorm() +
                      (sys.r_mat() - ref.r_mat()).squaredNorm() +
                      (sys.Q.mat() - ref.Q.mat()).squaredNorm() +
                      (sys.B - ref.B).squaredNorm() + (sys.x0 - ref.x0).squaredNorm();
    return Scalar(0.5) * lambda * d2;
}

}  // namespace detail

// Output-misfit cost by left-endpoint quadrature,
//
//     J1 = (dt/2) sum_{i < steps} |y[i] - y_data[i]|^2 ;
//
// the sample at the right endpoint does not enter.
template <typename Scalar>
Scalar cost(const Signal<Scalar>& y, const Signal<Scalar>& y_data) {
    detail::require_same_grid(y.grid, y_data.grid, "cost");
    if (y.dim() != y_data.dim()) throw GridError("cost: channel counts differ");
    const Index n_steps = y.grid.steps;
    const Scalar misfit =
        (y.samples.topRows(n_steps) - y_data.samples.topRows(n_steps)).squaredNorm();
    return Scalar(0.5) * y.grid.dt * misfit;
}

// Full cost J1 + (lambda/2) |w - w_ref|^2.  All experiments in this repo run
// with lambda = 0; the penalty exists for regularized identification.
template <typename Scalar>
Scalar cost(const Signal<Scalar>& y, const Signal<Scalar>& y_data,
            const PhSystem<Scalar>& sys, const PhSystem<Scalar>* w_ref, Scalar lambda) {
    Scalar value = cost(y, y_data);
    if (lambda != Scalar(0)) {
        if (w_ref == nullptr)
            throw ParameterError("cost: lambda > 0 requires a reference system");
        value += detail::penalty(sys, *w_ref, lambda);
    }
    return value;
}

// Backward sweep for the costate of the discrete problem.  This is the exact
// adjoint of the forward Euler recurrence combined with the left-endpoint
// cost quadrature:
//
//     p[steps] = 0,
//     p[i] = p[i+1] + dt ( Q (J^T - R^T) p[i+1] + Q B (y[i] - y_data[i]) ),
//
// i.e. the residual source is evaluated at the left node of each step, the
// same nodes the quadrature touches.  With this pairing the assembled
// gradients below are the exact derivatives of the discrete cost (finite
// differences agree to machine-level precision, not just O(dt)).
template <typename Scalar>
AdjointTrajectory<Scalar> solve_adjoint(const PhSystem<Scalar>& sys, const Signal<Scalar>& y,
                                        const Signal<Scalar>& y_data) {
    detail::require_same_grid(y.grid, y_data.grid, "solve_adjoint");
    if (y.dim() != sys.m() || y_data.dim() != sys.m())
        throw DimensionError("solve_adjoint: output channel count mismatch");
    const TimeGrid<Scalar>& grid = y.grid;
    const Scalar dt = grid.dt;

    // Row form: p_i^T = p_{i+1}^T + dt (p_{i+1}^T A + r_i^T (QB)^T) with
    // A = (J - R) Q, because Q (J^T - R^T) = A^T.
    Mat<Scalar> a = Mat<Scalar>((sys.J.mat() - sys.r_mat()) * sys.Q.mat());
    Mat<Scalar> qb_t = Mat<Scalar>(sys.Q.mat() * sys.B).transpose();

    Mat<Scalar> p(grid.nodes(), sys.n());
    p.row(grid.steps).setZero();
    for (Index i = grid.steps - 1; i >= 0; --i) {
        auto residual = y.samples.row(i) - y_data.samples.row(i);
        p.row(i) = p.row(i + 1) + dt * (p.row(i + 1) * a + residual * qb_t);
        if (!p.row(i).allFinite())
            throw DivergenceError("solve_adjoint: costate became non-finite at node " +
                                  std::to_string(i));
    }
    return AdjointTrajectory<Scalar>{grid, std::move(p)};
}

// Gradient of the discrete cost with respect to all five controls, assembled
// from one forward and one adjoint trajectory.  With X0 = states at nodes
// 0..steps-1, P1 = costates at nodes 1..steps, and residuals at the left
// nodes, the blocks are (all sums over the quadrature nodes, weight dt):
//
//     M      = dt P1^T (X0 Q)
//     g_j    = skew(M),            g_r = sym(-M)
//     g_q    = sym( dt ( (J-R)^T P1^T X0 + B residual^T X0 ) )
//     g_b    = dt ( (X0 Q)^T residual + P1^T U0 )
//     g_x0   = p[0]
//
// plus lambda (w - w_ref) per block when the penalty is active.
template <typename Scalar>
GradientBundle<Scalar> assemble_gradient(const PhSystem<Scalar>& sys,
                                         const Trajectory<Scalar>& traj,
                                         const AdjointTrajectory<Scalar>& adj,
                                         const Signal<Scalar>& u,
                                         const Signal<Scalar>& y_data,
                                         Scalar lambda = Scalar(0),
                                         const PhSystem<Scalar>* w_ref = nullptr) {
    detail::require_same_grid(traj.grid, adj.grid, "assemble_gradient");
    detail::require_same_grid(traj.grid, u.grid, "assemble_gradient");
    detail::require_same_grid(traj.grid, y_data.grid, "assemble_gradient");
    if (lambda != Scalar(0) && w_ref == nullptr)
        throw ParameterError("assemble_gradient: lambda > 0 requires a reference system");

    const Index n_steps = traj.grid.steps;
    const Scalar dt = traj.grid.dt;
    auto x0_rows = traj.x.topRows(n_steps);
    auto p1_rows = adj.p.bottomRows(n_steps);
    Mat<Scalar> residual =
        traj.y.samples.topRows(n_steps) - y_data.samples.topRows(n_steps);
    auto u0_rows = u.samples.topRows(n_steps);

    Mat<Scalar> xq = x0_rows * sys.Q.mat();
    Mat<Scalar> m_core = dt * (p1_rows.transpose() * xq);
    Mat<Scalar> c = sys.J.mat() - sys.r_mat();
    Mat<Scalar> q_core = dt * (c.transpose() * (p1_rows.transpose() * x0_rows) +
                               sys.B * (residual.transpose() * x0_rows));
    Mat<Scalar> b_core = dt * (xq.transpose() * residual + p1_rows.transpose() * u0_rows);
    Vec<Scalar> x0_core = adj.p.row(0).transpose();

    GradientBundle<Scalar> bundle;
    if (lambda != Scalar(0)) {
        bundle.g_j = project_skew(Mat<Scalar>(m_core + lambda * (sys.J.mat() - w_ref->J.mat())));
        bundle.g_r = project_sym(Mat<Scalar>(-m_core + lambda * (sys.r_mat() - w_ref->r_mat())));
        bundle.g_q = project_sym(Mat<Scalar>(q_core + lambda * (sys.Q.mat() - w_ref->Q.mat())));
        bundle.g_b = b_core + lambda * (sys.B - w_ref->B);
        bundle.g_x0 = x0_core + lambda * (sys.x0 - w_ref->x0);
    } else {
        bundle.g_j = project_skew(m_core);
        bundle.g_r = project_sym(Mat<Scalar>(-m_core));
        bundle.g_q = project_sym(q_core);
        bundle.g_b = std::move(b_core);
        bundle.g_x0 = std::move(x0_core);
    }
    return bundle;
}

// Which control a finite-difference probe perturbs.
enum class ControlBlock { J, R, Q, B, X0 };

// A structured tangent direction: skew for J, symmetric for Q, of the form
// sym(D) G for the dissipation factor, free for B and x0 (x0 directions are
// n-by-1).  Q directions may optionally be probed along the SPD geodesic
// instead of the flat symmetric line.
template <typename Scalar>
struct Perturbation {
    ControlBlock block;
    Mat<Scalar> dir;
    bool q_geodesic = false;
};

namespace detail {

template <typename Scalar>
PhSystem<Scalar> perturb(const PhSystem<Scalar>& sys, const Perturbation<Scalar>& pert,
                         Scalar step) {
    switch (pert.block) {
        case ControlBlock::J:
            return PhSystem<Scalar>(
                SkewMatrix<Scalar>(project_skew(Mat<Scalar>(sys.J.mat() + step * pert.dir))),
                sys.G, sys.Q, sys.B, sys.x0);
        case ControlBlock::R:
            return PhSystem<Scalar>(
                sys.J, PsdFactor<Scalar>(sys.G.factor() + step * pert.dir), sys.Q, sys.B,
                sys.x0);
        case ControlBlock::Q: {
            SpdMatrix<Scalar> q_new =
                pert.q_geodesic
                    ? spd_retract(sys.Q, pert.dir, step)
                    : SpdMatrix<Scalar>(project_sym(Mat<Scalar>(sys.Q.mat() + step * pert.dir)));
            return PhSystem<Scalar>(sys.J, sys.G, std::move(q_new), sys.B, sys.x0);
        }
        case ControlBlock::B:
            return PhSystem<Scalar>(sys.J, sys.G, sys.Q, sys.B + step * pert.dir, sys.x0);
        case ControlBlock::X0:
            return PhSystem<Scalar>(sys.J, sys.G, sys.Q, sys.B,
                                    sys.x0 + step * Vec<Scalar>(pert.dir.col(0)));
    }
    throw ParameterError("fd_gradient: unknown control block");
}

}  // namespace detail

// Central finite difference of the reduced cost along one structured
// direction, (J(w + h d) - J(w - h d)) / 2h.  This is the independent oracle
// the adjoint gradients are verified against; it shares no code with
// solve_adjoint or assemble_gradient beyond the forward simulation.
template <typename Scalar>
Scalar fd_gradient(const PhSystem<Scalar>& sys, const Signal<Scalar>& u,
                   const Signal<Scalar>& y_data, const Perturbation<Scalar>& pert, Scalar h,
                   Scalar lambda = Scalar(0), const PhSystem<Scalar>* w_ref = nullptr) {
    if (!(h > Scalar(0))) throw ParameterError("fd_gradient: step must be positive");
    PhSystem<Scalar> plus = detail::perturb(sys, pert, h);
    PhSystem<Scalar> minus = detail::perturb(sys, pert, -h);
    const Scalar c_plus = cost(simulate(plus, u).y, y_data, plus, w_ref, lambda);
    const Scalar c_minus = cost(simulate(minus, u).y, y_data, minus, w_ref, lambda);
    return (c_plus - c_minus) / (Scalar(2) * h);
}

}  // namespace phident
