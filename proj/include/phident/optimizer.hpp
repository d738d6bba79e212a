#pragma once

#include "phident/adjoint.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace phident {

// How the Q iterate moves: along the SPD geodesic (definite for any step
// length), or along the flat symmetric line with a definiteness check that
// turns violations into line-search rejections.
enum class QUpdateMode { retraction, flat_symmetrize };

template <typename Scalar>
struct OptimizerConfig {
    int max_iters = 100;
    Scalar sigma0 = Scalar(1);
    Scalar armijo_beta = Scalar(0.5);
    Scalar armijo_c = Scalar(1e-4);
    int armijo_max_backtracks = 40;
    Scalar eps_grad = Scalar(1e-10);
    Scalar eps_update = Scalar(1e-12);
    QUpdateMode q_update_mode = QUpdateMode::retraction;
    Scalar lambda = Scalar(0);

    void validate() const {
        if (!(sigma0 > Scalar(0))) throw ParameterError("OptimizerConfig: sigma0 must be positive");
        if (!(armijo_beta > Scalar(0) && armijo_beta < Scalar(1)))
            throw ParameterError("OptimizerConfig: armijo_beta must lie in (0, 1)");
        if (!(armijo_c > Scalar(0) && armijo_c < Scalar(1)))
            throw ParameterError("OptimizerConfig: armijo_c must lie in (0, 1)");
        if (armijo_max_backtracks < 1)
            throw ParameterError("OptimizerConfig: need at least one line-search trial");
        if (max_iters < 0) throw ParameterError("OptimizerConfig: max_iters must be >= 0");
        if (lambda < Scalar(0)) throw ParameterError("OptimizerConfig: lambda must be >= 0");
    }
};

// One row of the iteration log.  Row 0 describes the initial guess; row k the
// iterate after the k-th accepted update.  The dist_* columns are NaN when no
// reference system was supplied.
template <typename Scalar>
struct IterationRecord {
    int iter = 0;
    Scalar cost = Scalar(0);
    Scalar grad_norm = Scalar(0);
    Scalar step_size = Scalar(0);
    int backtracks = 0;
    Scalar dist_j = Scalar(0);
    Scalar dist_r = Scalar(0);
    Scalar dist_q = Scalar(0);
    Scalar dist_b = Scalar(0);
    Scalar skew_j = Scalar(0);
    Scalar min_eig_q = Scalar(0);
    Scalar min_eig_r = Scalar(0);
};

template <typename Scalar>
struct RunReport {
    std::vector<IterationRecord<Scalar>> rows;
    std::string termination_reason;

    Scalar initial_cost() const { return rows.front().cost; }
    Scalar final_cost() const { return rows.back().cost; }
    int iterations() const { return static_cast<int>(rows.size()) - 1; }

    // final/initial cost; defined as 1 when the initial cost is already zero
    // (nothing to improve).
    Scalar ratio() const {
        return initial_cost() > Scalar(0) ? final_cost() / initial_cost() : Scalar(1);
    }
};

// Chain rule of R = G G^T restricted to tangent directions sym(D) G: the
// gradient with respect to the factor is 2 sym(g_r) G.
template <typename Scalar>
Mat<Scalar> factor_gradient(const Mat<Scalar>& g_r, const Mat<Scalar>& factor) {
    if (g_r.rows() != factor.rows())
        throw DimensionError("factor_gradient: dimension mismatch");
    return Scalar(2) * (project_sym(g_r) * factor);
}

// One structure-preserving descent step of length sigma: J moves in the skew
// subspace, the dissipation factor in the flat factor metric (R = G G^T stays
// PSD automatically), Q per the configured mode, B and x0 freely.
template <typename Scalar>
PhSystem<Scalar> apply_update(const PhSystem<Scalar>& sys, const GradientBundle<Scalar>& grad,
                              Scalar sigma, QUpdateMode mode = QUpdateMode::retraction) {
    if (!(sigma > Scalar(0))) throw ParameterError("apply_update: sigma must be positive");
    SkewMatrix<Scalar> j_new(project_skew(Mat<Scalar>(sys.J.mat() - sigma * grad.g_j)));
    PsdFactor<Scalar> g_new(
        Mat<Scalar>(sys.G.factor() - sigma * factor_gradient(grad.g_r, sys.G.factor())));
    SpdMatrix<Scalar> q_new =
        mode == QUpdateMode::retraction
            ? spd_retract(sys.Q, Mat<Scalar>(-grad.g_q), sigma)
            : SpdMatrix<Scalar>(project_sym(Mat<Scalar>(sys.Q.mat() - sigma * grad.g_q)));
    return PhSystem<Scalar>(std::move(j_new), std::move(g_new), std::move(q_new),
                            sys.B - sigma * grad.g_b, sys.x0 - sigma * grad.g_x0);
}

template <typename Scalar>
struct ArmijoResult {
    bool accepted = false;
    Scalar sigma = Scalar(0);
    int backtracks = 0;
    Scalar cost = std::numeric_limits<Scalar>::quiet_NaN();
    std::optional<PhSystem<Scalar>> system;
    std::optional<Trajectory<Scalar>> trajectory;
};

// Backtracking line search: accept the largest sigma = sigma0 beta^k with
//
//     J(update(sys, grad, sigma)) <= J(sys) - c sigma |grad|^2 .
//
// Trials that lose definiteness, overflow the retraction, or diverge in the
// forward solve count as rejections like any insufficient decrease.  When all
// trials fail the result carries accepted = false and the last trial's data.
template <typename Scalar>
ArmijoResult<Scalar> armijo_search(const PhSystem<Scalar>& sys,
                                   const GradientBundle<Scalar>& grad,
                                   const Signal<Scalar>& u, const Signal<Scalar>& y_data,
                                   Scalar base_cost, const OptimizerConfig<Scalar>& cfg,
                                   const PhSystem<Scalar>* w_ref = nullptr) {
    const Scalar grad_sq = grad.squared_norm();
    if (!(grad_sq > Scalar(0))) throw ParameterError("armijo_search: zero gradient");

    ArmijoResult<Scalar> result;
    Scalar sigma = cfg.sigma0;
    for (int k = 0; k < cfg.armijo_max_backtracks; ++k, sigma *= cfg.armijo_beta) {
        result.sigma = sigma;
        result.backtracks = k;
        try {
            PhSystem<Scalar> candidate = apply_update(sys, grad, sigma, cfg.q_update_mode);
            Trajectory<Scalar> traj = simulate(candidate, u);
            const Scalar c = cost(traj.y, y_data, candidate, w_ref, cfg.lambda);
            result.cost = c;
            if (!std::isfinite(static_cast<double>(c))) continue;
            if (c <= base_cost - cfg.armijo_c * sigma * grad_sq) {
                result.accepted = true;
                result.system = std::move(candidate);
                result.trajectory = std::move(traj);
                return result;
            }
        } catch (const DefinitenessError&) {
        } catch (const NumericalError&) {
        } catch (const DivergenceError&) {
        }
    }
    result.accepted = false;
    return result;
}

template <typename Scalar>
struct IdentifyResult {
    PhSystem<Scalar> system;
    RunReport<Scalar> report;
};

namespace detail {

template <typename Scalar>
IterationRecord<Scalar> diagnostics_row(int iter, Scalar cost_value, Scalar grad_norm,
                                        Scalar step, int backtracks,
                                        const PhSystem<Scalar>& sys,
                                        const PhSystem<Scalar>* w_ref) {
    IterationRecord<Scalar> row;
    row.iter = iter;
    row.cost = cost_value;
    row.grad_norm = grad_norm;
    row.step_size = step;
    row.backtracks = backtracks;
    const Scalar nan = std::numeric_limits<Scalar>::quiet_NaN();
    if (w_ref != nullptr) {
        row.dist_j = (sys.J.mat() - w_ref->J.mat()).norm();
        row.dist_r = (sys.r_mat() - w_ref->r_mat()).norm();
        row.dist_q = (sys.Q.mat() - w_ref->Q.mat()).norm();
        row.dist_b = (sys.B - w_ref->B).norm();
    } else {
        row.dist_j = row.dist_r = row.dist_q = row.dist_b = nan;
    }
    row.skew_j = (sys.J.mat() + Mat<Scalar>(sys.J.mat().transpose())).norm();
    row.min_eig_q = sys.Q.min_eig();
    row.min_eig_r = min_eigenvalue(sys.r_mat());
    return row;
}

template <typename Scalar>
Scalar bundle_difference(const GradientBundle<Scalar>& a, const GradientBundle<Scalar>& b) {
    return std::sqrt((a.g_j - b.g_j).squaredNorm() + (a.g_r - b.g_r).squaredNorm() +
                     (a.g_q - b.g_q).squaredNorm() + (a.g_b - b.g_b).squaredNorm() +
                     (a.g_x0 - b.g_x0).squaredNorm());
}

}  // namespace detail

// The identification loop: simulate, solve the adjoint, assemble the
// gradient, line-search, update; stop when the gradient vanishes
// (gradient_vanished), successive gradients coincide (gradient_stalled), the
// line search finds no admissible step (armijo_stalled), or the iteration
// budget runs out (max_iterations).  Every accepted iterate appears in the
// report with its structure diagnostics.
template <typename Scalar>
IdentifyResult<Scalar> identify(const PhSystem<Scalar>& initial, const Signal<Scalar>& u,
                                const Signal<Scalar>& y_data,
                                const OptimizerConfig<Scalar>& cfg,
                                const PhSystem<Scalar>* w_ref = nullptr) {
    cfg.validate();
    if (cfg.lambda != Scalar(0) && w_ref == nullptr)
        throw ParameterError("identify: lambda > 0 requires a reference system");

    PhSystem<Scalar> sys = initial;
    Trajectory<Scalar> traj = simulate(sys, u);
    Scalar current_cost = cost(traj.y, y_data, sys, w_ref, cfg.lambda);
    GradientBundle<Scalar> bundle =
        assemble_gradient(sys, traj, solve_adjoint(sys, traj.y, y_data), u, y_data,
                          cfg.lambda, w_ref);

    RunReport<Scalar> report;
    report.rows.push_back(detail::diagnostics_row(0, current_cost, bundle.norm(), Scalar(0),
                                                  0, sys, w_ref));

    for (int k = 1; k <= cfg.max_iters; ++k) {
        if (bundle.norm() < cfg.eps_grad) {
            report.termination_reason = "gradient_vanished";
            break;
        }
        ArmijoResult<Scalar> ls =
            armijo_search(sys, bundle, u, y_data, current_cost, cfg, w_ref);
        if (!ls.accepted) {
            report.termination_reason = "armijo_stalled";
            break;
        }
        sys = std::move(*ls.system);
        traj = std::move(*ls.trajectory);
        current_cost = ls.cost;

        GradientBundle<Scalar> next =
            assemble_gradient(sys, traj, solve_adjoint(sys, traj.y, y_data), u, y_data,
                              cfg.lambda, w_ref);
        report.rows.push_back(detail::diagnostics_row(k, current_cost, next.norm(), ls.sigma,
                                                      ls.backtracks, sys, w_ref));
        const Scalar drift = detail::bundle_difference(next, bundle);
        bundle = std::move(next);
        if (drift < cfg.eps_update) {
            report.termination_reason = "gradient_stalled";
            break;
        }
    }
    if (report.termination_reason.empty()) report.termination_reason = "max_iterations";
    return IdentifyResult<Scalar>{std::move(sys), std::move(report)};
}

}  // namespace phident
