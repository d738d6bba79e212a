#include "phident/adjoint.hpp"

#include "phident/generators.hpp"
#include "phident/optimizer.hpp"

#include <doctest.h>

#include <cmath>

using namespace phident;
using M = Mat<double>;
using V = Vec<double>;

namespace {

PhSystem<double> scalar_system(double r, double q, double b) {
    M g(1, 1);
    g(0, 0) = std::sqrt(r);
    M bm(1, 1);
    bm(0, 0) = b;
    return PhSystem<double>(SkewMatrix<double>(M::Zero(1, 1)), PsdFactor<double>(g),
                            SpdMatrix<double>(q * M::Identity(1, 1)), bm, V::Zero(1));
}

Signal<double> constant_signal(const TimeGrid<double>& grid, double value, Index dim = 1) {
    return Signal<double>(grid, M::Constant(grid.nodes(), dim, value));
}

// Max node error of the discrete costate against the closed-form solution of
// the continuous adjoint equation for a constant residual e:
//
//     p(t) = (b e / r) (1 - exp(-q r (T - t))).
double scalar_adjoint_error(double dt) {
    const double r = 2.0, q = 1.5, b = 1.0, e = 0.7;
    TimeGrid<double> grid(1.0, dt);
    PhSystem<double> sys = scalar_system(r, q, b);
    Trajectory<double> traj = simulate(sys, constant_signal(grid, 1.0));
    Signal<double> y_data(grid, M(traj.y.samples.array() - e));
    AdjointTrajectory<double> adj = solve_adjoint(sys, traj.y, y_data);
    double max_err = 0.0;
    for (Index i = 0; i < grid.nodes(); ++i) {
        const double exact = b * e / r * (1.0 - std::exp(-q * r * (grid.T - grid.time(i))));
        max_err = std::max(max_err, std::abs(adj.p(i, 0) - exact));
    }
    return max_err;
}

// Inner product matching the structured perturbation of each block, so that
// fd_gradient along `pert.dir` should equal this pairing with the bundle.
double pairing(const PhSystem<double>& sys, const GradientBundle<double>& bundle,
               const Perturbation<double>& pert) {
    switch (pert.block) {
        case ControlBlock::J:
            return bundle.g_j.cwiseProduct(pert.dir).sum();
        case ControlBlock::R:
            return factor_gradient(bundle.g_r, sys.G.factor()).cwiseProduct(pert.dir).sum();
        case ControlBlock::Q:
            return bundle.g_q.cwiseProduct(pert.dir).sum();
        case ControlBlock::B:
            return bundle.g_b.cwiseProduct(pert.dir).sum();
        case ControlBlock::X0:
            return bundle.g_x0.dot(V(pert.dir.col(0)));
    }
    return 0.0;
}

}  // namespace

TEST_CASE("cost: quadrature value and validation") {
    TimeGrid<double> grid(1.0, 0.25);
    Signal<double> ones = constant_signal(grid, 1.0);
    Signal<double> zeros = constant_signal(grid, 0.0);

    CHECK(cost(ones, ones) == 0.0);
    // (dt/2) * 4 steps * 1^2 = 0.5 exactly; the right endpoint is excluded.
    CHECK(cost(ones, zeros) == 0.5);

    M bumped = ones.samples;
    bumped(grid.steps, 0) = 100.0;  // final node must not contribute
    CHECK(cost(Signal<double>(grid, bumped), zeros) == 0.5);

    TimeGrid<double> other(1.0, 0.5);
    CHECK_THROWS_AS(cost(ones, constant_signal(other, 0.0)), GridError);
    CHECK_THROWS_AS(cost(ones, constant_signal(grid, 0.0, 2)), GridError);
}

TEST_CASE("cost: penalty term against a reference system") {
    PhSystem<double> ref = gen_random_phs<double>(3, 2, 2, 41);
    TimeGrid<double> grid(0.5, 1e-2);
    Signal<double> u = standard_input(grid);
    Signal<double> y = simulate(ref, u).y;
    Signal<double> y_data = constant_signal(grid, 0.0, 2);

    const PhSystem<double>* no_ref = nullptr;
    const double base = cost(y, y_data);
    CHECK(cost(y, y_data, ref, no_ref, 0.0) == base);
    CHECK(cost(y, y_data, ref, &ref, 2.0) == base);  // w == w_ref adds nothing
    CHECK_THROWS_AS(cost(y, y_data, ref, no_ref, 1.0), ParameterError);

    // Shift only B: penalty = (lambda/2) |dB|^2.
    M db = M::Constant(3, 2, 0.5);
    PhSystem<double> shifted(ref.J, ref.G, ref.Q, M(ref.B + db), ref.x0);
    const double expect = 0.5 * 2.0 * db.squaredNorm();
    CHECK(cost(y, y_data, shifted, &ref, 2.0) == doctest::Approx(base + expect));
}

TEST_CASE("scalar closed-form oracle: first-order convergence of the costate") {
    const double e1 = scalar_adjoint_error(1e-3);
    const double e2 = scalar_adjoint_error(5e-4);
    CHECK(e1 < 5e-3);
    CHECK(e2 < 0.6 * e1);
    CHECK(e2 > 0.4 * e1);
}

TEST_CASE("zero residual gives an exactly zero costate and gradient") {
    PhSystem<double> sys = gen_random_phs<double>(4, 2, 2, 3);
    TimeGrid<double> grid(1.0, 1e-2);
    Signal<double> u = standard_input(grid);
    Trajectory<double> traj = simulate(sys, u);

    AdjointTrajectory<double> adj = solve_adjoint(sys, traj.y, traj.y);
    CHECK(adj.p.norm() == 0.0);

    GradientBundle<double> bundle = assemble_gradient(sys, traj, adj, u, traj.y);
    CHECK(bundle.norm() == 0.0);
}

TEST_CASE("costate and gradient are linear in the residual") {
    PhSystem<double> ref = gen_random_phs<double>(4, 2, 2, 11);
    PhSystem<double> sys = default_initial_guess<double>(4, 2, 2, 12);
    TimeGrid<double> grid(0.5, 1e-2);
    Signal<double> u = standard_input(grid);
    Signal<double> y_data = Signal<double>(grid, simulate(ref, u).y.samples);
    Trajectory<double> traj = simulate(sys, u);

    const double alpha = -2.0;
    M scaled = traj.y.samples - alpha * (traj.y.samples - y_data.samples);
    Signal<double> y_scaled(grid, scaled);  // residual becomes alpha * (y - y_data)

    AdjointTrajectory<double> adj = solve_adjoint(sys, traj.y, y_data);
    AdjointTrajectory<double> adj_s = solve_adjoint(sys, traj.y, y_scaled);
    CHECK((adj_s.p - alpha * adj.p).norm() < 1e-12 * std::max(1.0, adj.p.norm()));

    GradientBundle<double> b1 = assemble_gradient(sys, traj, adj, u, y_data);
    GradientBundle<double> b2 = assemble_gradient(sys, traj, adj_s, u, y_scaled);
    const double tol = 1e-12 * std::max(1.0, b1.norm());
    CHECK((b2.g_j - alpha * b1.g_j).norm() < tol);
    CHECK((b2.g_r - alpha * b1.g_r).norm() < tol);
    CHECK((b2.g_q - alpha * b1.g_q).norm() < tol);
    CHECK((b2.g_b - alpha * b1.g_b).norm() < tol);
    CHECK((b2.g_x0 - alpha * b1.g_x0).norm() < tol);
}

TEST_CASE("gradient blocks carry their structure bit-exactly") {
    PhSystem<double> ref = gen_random_phs<double>(5, 2, 2, 21);
    PhSystem<double> sys = default_initial_guess<double>(5, 2, 2, 22);
    TimeGrid<double> grid(0.5, 1e-2);
    Signal<double> u = standard_input(grid);
    Signal<double> y_data = Signal<double>(grid, simulate(ref, u).y.samples);
    Trajectory<double> traj = simulate(sys, u);
    AdjointTrajectory<double> adj = solve_adjoint(sys, traj.y, y_data);
    GradientBundle<double> bundle = assemble_gradient(sys, traj, adj, u, y_data);

    CHECK(bundle.norm() > 0.0);
    CHECK((bundle.g_j + bundle.g_j.transpose()).norm() == 0.0);
    CHECK((bundle.g_r - bundle.g_r.transpose()).norm() == 0.0);
    CHECK((bundle.g_q - bundle.g_q.transpose()).norm() == 0.0);
}

TEST_CASE("adjoint gradients match central finite differences per block") {
    PhSystem<double> ref = gen_random_phs<double>(3, 2, 2, 101);
    PhSystem<double> sys = default_initial_guess<double>(3, 2, 2, 55);
    TimeGrid<double> grid(0.4, 1e-3);
    Signal<double> u = standard_input(grid);
    Signal<double> y_data = Signal<double>(grid, simulate(ref, u).y.samples);

    Trajectory<double> traj = simulate(sys, u);
    AdjointTrajectory<double> adj = solve_adjoint(sys, traj.y, y_data);

    Rng rng(2026);
    auto probe = [&](double lambda, const PhSystem<double>* w_ref) {
        GradientBundle<double> bundle =
            assemble_gradient(sys, traj, adj, u, y_data, lambda, w_ref);
        std::vector<Perturbation<double>> perts;
        perts.push_back({ControlBlock::J,
                         project_skew(random_uniform_matrix<double>(3, 3, rng))});
        perts.push_back({ControlBlock::R, random_uniform_matrix<double>(3, 2, rng)});
        perts.push_back({ControlBlock::Q,
                         project_sym(random_uniform_matrix<double>(3, 3, rng))});
        perts.push_back({ControlBlock::Q,
                         project_sym(random_uniform_matrix<double>(3, 3, rng)), true});
        perts.push_back({ControlBlock::B, random_uniform_matrix<double>(3, 2, rng)});
        perts.push_back({ControlBlock::X0, random_uniform_matrix<double>(3, 1, rng)});
        for (const auto& pert : perts) {
            const double analytic = pairing(sys, bundle, pert);
            const double fd = fd_gradient(sys, u, y_data, pert, 1e-6, lambda, w_ref);
            const double rel = std::abs(fd - analytic) / std::max(std::abs(analytic), 1e-9);
            CAPTURE(static_cast<int>(pert.block));
            CHECK(rel < 1e-4);
        }
    };
    probe(0.0, nullptr);
    probe(0.5, &ref);
}

TEST_CASE("adjoint and finite-difference validation errors") {
    PhSystem<double> sys = gen_random_phs<double>(3, 2, 2, 7);
    TimeGrid<double> grid(0.5, 1e-2);
    TimeGrid<double> other(0.5, 2e-2);
    Signal<double> u = standard_input(grid);
    Trajectory<double> traj = simulate(sys, u);

    CHECK_THROWS_AS(solve_adjoint(sys, traj.y, constant_signal(other, 0.0, 2)), GridError);
    CHECK_THROWS_AS(solve_adjoint(sys, traj.y, constant_signal(grid, 0.0, 1)),
                    DimensionError);

    AdjointTrajectory<double> adj = solve_adjoint(sys, traj.y, traj.y);
    CHECK_THROWS_AS(assemble_gradient(sys, traj, adj, u, traj.y, 1.0,
                                      static_cast<const PhSystem<double>*>(nullptr)),
                    ParameterError);

    Perturbation<double> pert{ControlBlock::B, M::Ones(3, 2)};
    CHECK_THROWS_AS(fd_gradient(sys, u, traj.y, pert, 0.0), ParameterError);
    CHECK_THROWS_AS(fd_gradient(sys, u, traj.y, pert, -1e-6), ParameterError);
}
