#include "phident/structured.hpp"

#include "phident/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace phident;
using M = Mat<double>;

namespace {

M random_square(Index n, std::uint64_t seed) {
    Rng rng(seed);
    return random_uniform_matrix<double>(n, n, rng);
}

SpdMatrix<double> random_spd(Index n, std::uint64_t seed, double shift = 0.5) {
    M a = random_square(n, seed);
    return SpdMatrix<double>(M(a.transpose() * a) + shift * M::Identity(n, n));
}

// Truncated exponential series, the independent oracle for spd_exp.
M exp_series(const M& s, int terms) {
    M acc = M::Identity(s.rows(), s.cols());
    M power = M::Identity(s.rows(), s.cols());
    double factorial = 1.0;
    for (int k = 1; k <= terms; ++k) {
        power = M(power * s);
        factorial *= k;
        acc += power / factorial;
    }
    return acc;
}

}  // namespace

TEST_CASE("projections reproduce the arithmetic examples") {
    CHECK(project_sym(M::Identity(3, 3)) == M::Identity(3, 3));

    M m(2, 2);
    m << 1, 2, 0, 1;
    M sym_expected(2, 2);
    sym_expected << 1, 1, 1, 1;
    CHECK(project_sym(m) == sym_expected);
    M skew_expected(2, 2);
    skew_expected << 0, 1, -1, 0;
    CHECK(project_skew(m) == skew_expected);

    M k(2, 2);
    k << 0, 3, -3, 0;
    CHECK(project_sym(k) == M::Zero(2, 2));
    CHECK(project_skew(k) == k);

    M s(2, 2);
    s << 2, 5, 5, -1;
    CHECK(project_skew(s) == M::Zero(2, 2));
}

TEST_CASE("projections are idempotent, complementary, and orthogonal") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        M m = random_square(6, seed);
        M sym = project_sym(m);
        M skew = project_skew(m);
        CHECK(project_sym(sym) == sym);
        CHECK(project_skew(skew) == skew);
        CHECK((sym + skew - m).norm() < 1e-15 * m.norm());
        // Exact structural invariants, bit level.
        CHECK(sym == M(sym.transpose()));
        CHECK(skew == M(-skew.transpose()));
        // <sym(M), K> = 0 for skew K.
        M k = project_skew(random_square(6, seed + 100));
        CHECK(std::abs(sym.cwiseProduct(k).sum()) < 1e-12 * sym.norm() * k.norm());
    }
    CHECK_THROWS_AS(project_sym(M::Zero(2, 3)), DimensionError);
    CHECK_THROWS_AS(project_skew(M::Zero(3, 2)), DimensionError);
}

TEST_CASE("min_eigenvalue on diagonal and random 2x2 cases") {
    CHECK(min_eigenvalue(M::Identity(4, 4)) == doctest::Approx(1.0));
    M d = M::Zero(2, 2);
    d(0, 0) = 3;
    d(1, 1) = -2;
    CHECK(min_eigenvalue(d) == doctest::Approx(-2.0));

    // Quadratic-formula oracle on random symmetric 2x2.
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        M s = project_sym(random_square(2, seed));
        const double a = s(0, 0), b = s(0, 1), c = s(1, 1);
        const double lam_min = 0.5 * (a + c) - std::sqrt(0.25 * (a - c) * (a - c) + b * b);
        CHECK(min_eigenvalue(s) == doctest::Approx(lam_min).epsilon(1e-12));
    }

    M ns(2, 2);
    ns << 0, 1, 0, 0;
    CHECK_THROWS_AS(min_eigenvalue(ns), SymmetryError);
}

TEST_CASE("SpdMatrix symmetrizes and rejects indefinite input") {
    M almost = M::Identity(3, 3);
    almost(0, 1) = 0.1;  // asymmetric but with SPD symmetric part
    SpdMatrix<double> q(almost);
    CHECK(q.mat() == project_sym(almost));
    CHECK(q.min_eig() > 0);

    M indef = M::Identity(2, 2);
    indef(1, 1) = -0.5;
    CHECK_THROWS_AS(SpdMatrix<double>{indef}, DefinitenessError);
    CHECK_THROWS_AS(SpdMatrix<double>{M::Zero(3, 3)}, DefinitenessError);
}

TEST_CASE("SkewMatrix keeps the exact invariant and rejects non-skew input") {
    SkewMatrix<double> j(project_skew(random_square(5, 3)));
    CHECK(j.mat() == M(-j.mat().transpose()));
    CHECK(j.mat().diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(SkewMatrix<double>(M::Identity(3, 3)), SymmetryError);
}

TEST_CASE("spd_sqrt: diagonal cases and multiply-back oracle") {
    CHECK((spd_sqrt(SpdMatrix<double>(M::Identity(3, 3))).mat() - M::Identity(3, 3)).norm() <
          1e-14);
    M d = M::Zero(2, 2);
    d(0, 0) = 4;
    d(1, 1) = 9;
    M s_expected = M::Zero(2, 2);
    s_expected(0, 0) = 2;
    s_expected(1, 1) = 3;
    CHECK((spd_sqrt(SpdMatrix<double>(d)).mat() - s_expected).norm() < 1e-13);

    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SpdMatrix<double> a = random_spd(5, seed);
        M s = spd_sqrt(a).mat();
        CHECK((M(s * s) - a.mat()).norm() < 1e-10);
    }
}

TEST_CASE("spd_log and spd_exp: diagonal cases, series oracle, round trip") {
    CHECK(spd_log(SpdMatrix<double>(M::Identity(3, 3))).norm() < 1e-14);
    M d = M::Zero(2, 2);
    d(0, 0) = std::exp(1.0);
    d(1, 1) = std::exp(2.0);
    M l = spd_log(SpdMatrix<double>(d));
    CHECK(l(0, 0) == doctest::Approx(1.0));
    CHECK(l(1, 1) == doctest::Approx(2.0));

    CHECK((spd_exp(M(M::Zero(3, 3))).mat() - M::Identity(3, 3)).norm() < 1e-14);
    M e = M::Zero(2, 2);
    e(0, 0) = 1;
    e(1, 1) = -1;
    M ee = spd_exp(e).mat();
    CHECK(ee(0, 0) == doctest::Approx(std::exp(1.0)));
    CHECK(ee(1, 1) == doctest::Approx(std::exp(-1.0)));

    // Truncated-series oracle for |S| <= 1.
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        M s = project_sym(random_square(4, seed));
        s /= std::max(1.0, s.norm());
        CHECK((spd_exp(s).mat() - exp_series(s, 20)).norm() < 1e-10);
    }

    // exp(log(A)) == A on SPD matrices of moderate conditioning.
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SpdMatrix<double> a = random_spd(5, seed + 40);
        CHECK((spd_exp(spd_log(a)).mat() - a.mat()).norm() < 1e-10 * a.mat().norm());
    }

    M nonsym(2, 2);
    nonsym << 0, 1, 0, 0;
    CHECK_THROWS_AS(spd_exp(nonsym), SymmetryError);
}

TEST_CASE("spd_retract: base point, identity collapse, first-order expansion") {
    SpdMatrix<double> q = random_spd(4, 9);
    M xi = project_sym(random_square(4, 10));

    // t = 0 returns the base point exactly.
    CHECK(spd_retract(q, xi, 0.0).mat() == q.mat());
    // Zero tangent returns the base point exactly for any t.
    CHECK(spd_retract(q, M(M::Zero(4, 4)), 2.5).mat() == q.mat());

    // Q = I collapses the formula to exp(t xi).
    SpdMatrix<double> eye(M::Identity(4, 4));
    CHECK((spd_retract(eye, xi, 0.7).mat() - spd_exp(M(0.7 * xi)).mat()).norm() < 1e-12);

    // retract(Q, xi, t) = Q + t xi + O(t^2): halving t shrinks the remainder
    // by about four.
    double prev = -1.0;
    for (double t = 0.1; t > 0.1 / 64; t /= 2) {
        const double err = (spd_retract(q, xi, t).mat() - q.mat() - t * xi).norm();
        if (prev > 0) CHECK(err < 0.3 * prev);
        prev = err;
    }
}

TEST_CASE("spd_retract stays SPD for every admissible step and guards overflow") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        SpdMatrix<double> q = random_spd(5, seed);
        M xi = project_sym(random_square(5, seed + 50));
        for (double t : {-3.0, -1.0, -0.1, 0.05, 1.0, 4.0}) {
            SpdMatrix<double> r = spd_retract(q, xi, t);
            CHECK(r.min_eig() > 0);
            CHECK(r.mat() == M(r.mat().transpose()));
        }
    }
    // A step far beyond the exponent cap is rejected rather than overflowed.
    SpdMatrix<double> q = random_spd(3, 77);
    M xi = project_sym(random_square(3, 78));
    CHECK_THROWS_AS(spd_retract(q, xi, 1e9), NumericalError);
    CHECK_THROWS_AS(spd_retract(q, M(xi.topLeftCorner(2, 2)), 1.0), DimensionError);
    M nonsym(3, 3);
    nonsym << 0, 1, 0, 0, 0, 0, 0, 0, 0;
    CHECK_THROWS_AS(spd_retract(q, nonsym, 1.0), SymmetryError);
}

TEST_CASE("psd_factor: rank-1 pick, exact reproduction, zero matrix, sign convention") {
    M d = M::Zero(3, 3);
    d(0, 0) = 1;
    PsdFactor<double> f1 = psd_factor(d, 1);
    M e1 = M::Zero(3, 1);
    e1(0, 0) = 1;
    CHECK((f1.factor() - e1).norm() < 1e-14);

    // R = G G^T of exact rank r is reproduced to 1e-10.
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        M g = random_uniform_matrix<double>(6, 2, rng);
        M r = M(g * g.transpose());
        PsdFactor<double> f = psd_factor(r, 2);
        CHECK((f.product() - project_sym(r)).norm() < 1e-10);
        // Sign convention: the largest-magnitude entry of each column is
        // nonnegative.
        for (Index c = 0; c < f.factor().cols(); ++c) {
            Index imax = 0;
            f.factor().col(c).cwiseAbs().maxCoeff(&imax);
            CHECK(f.factor()(imax, c) >= 0.0);
        }
    }

    PsdFactor<double> fz = psd_factor(M(M::Zero(4, 4)), 2);
    CHECK(fz.factor().norm() == 0.0);

    M indef = M::Identity(2, 2);
    indef(1, 1) = -1;
    CHECK_THROWS_AS(psd_factor(indef, 1), DefinitenessError);
    CHECK_THROWS_AS(psd_factor(M(M::Identity(3, 3)), 4), DimensionError);
}
