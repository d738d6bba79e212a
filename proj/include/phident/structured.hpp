#pragma once

#include "phident/types.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace phident {

namespace detail {

template <typename Scalar>
void require_square(const Mat<Scalar>& m, const char* what) {
    if (m.rows() != m.cols())
        throw DimensionError(std::string(what) + ": matrix is " + std::to_string(m.rows()) +
                             "x" + std::to_string(m.cols()) + ", expected square");
}

// Relative tolerance used by symmetry/skewness checks on inputs that are
// supposed to be structured already.
template <typename Scalar>
Scalar structure_tol(const Mat<Scalar>& m) {
    return Scalar(1e-12) * std::max(Scalar(1), m.norm());
}

}  // namespace detail

// Symmetric part (M + M^T)/2.  Each unordered index pair is computed once and
// mirrored, so the result is symmetric bit-for-bit.
template <typename Derived>
Mat<typename Derived::Scalar> project_sym(const Eigen::MatrixBase<Derived>& expr) {
    using Scalar = typename Derived::Scalar;
    Mat<Scalar> m = expr;
    detail::require_square(m, "project_sym");
    Mat<Scalar> out(m.rows(), m.cols());
    for (Index i = 0; i < m.rows(); ++i) {
        out(i, i) = m(i, i);
        for (Index j = i + 1; j < m.cols(); ++j) {
            const Scalar v = (m(i, j) + m(j, i)) / Scalar(2);
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return out;
}

// Skew part (M - M^T)/2 with the diagonal forced to exact zero.
template <typename Derived>
Mat<typename Derived::Scalar> project_skew(const Eigen::MatrixBase<Derived>& expr) {
    using Scalar = typename Derived::Scalar;
    Mat<Scalar> m = expr;
    detail::require_square(m, "project_skew");
    Mat<Scalar> out(m.rows(), m.cols());
    for (Index i = 0; i < m.rows(); ++i) {
        out(i, i) = Scalar(0);
        for (Index j = i + 1; j < m.cols(); ++j) {
            const Scalar v = (m(i, j) - m(j, i)) / Scalar(2);
            out(i, j) = v;
            out(j, i) = -v;
        }
    }
    return out;
}

// Smallest eigenvalue of a symmetric matrix.
template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& expr) {
    using Scalar = typename Derived::Scalar;
    Mat<Scalar> m = expr;
    detail::require_square(m, "min_eigenvalue");
    if ((m - Mat<Scalar>(m.transpose())).norm() > detail::structure_tol(m))
        throw SymmetryError("min_eigenvalue: input is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(project_sym(m), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalError("min_eigenvalue: eigensolver did not converge");
    return es.eigenvalues().minCoeff();
}

// Skew-symmetric square matrix.  Construction accepts anything within
// round-off of skew and stores the exact projection (zero diagonal,
// lower triangle the negated upper triangle bit-for-bit).
template <typename Scalar>
class SkewMatrix {
public:
    explicit SkewMatrix(const Mat<Scalar>& m) {
        detail::require_square(m, "SkewMatrix");
        if ((m + Mat<Scalar>(m.transpose())).norm() > detail::structure_tol(m))
            throw SymmetryError("SkewMatrix: input is not skew-symmetric");
        mat_ = project_skew(m);
    }

    const Mat<Scalar>& mat() const { return mat_; }
    Index dim() const { return mat_.rows(); }

private:
    Mat<Scalar> mat_;
};

// Symmetric positive definite matrix.  Construction symmetrizes the input
// (round-off repair) and requires the minimum eigenvalue to be strictly
// positive; the extreme eigenvalues are kept for diagnostics.
template <typename Scalar>
class SpdMatrix {
public:
    explicit SpdMatrix(const Mat<Scalar>& m) {
        detail::require_square(m, "SpdMatrix");
        if (!m.allFinite()) throw NumericalError("SpdMatrix: non-finite entries");
        mat_ = project_sym(m);
        Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(mat_, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success)
            throw NumericalError("SpdMatrix: eigensolver did not converge");
        min_eig_ = es.eigenvalues().minCoeff();
        max_eig_ = es.eigenvalues().maxCoeff();
        if (!(min_eig_ > Scalar(0)))
            throw DefinitenessError("SpdMatrix: minimum eigenvalue " +
                                    std::to_string(min_eig_) + " is not positive");
    }

    const Mat<Scalar>& mat() const { return mat_; }
    Index dim() const { return mat_.rows(); }
    Scalar min_eig() const { return min_eig_; }
    Scalar max_eig() const { return max_eig_; }

private:
    Mat<Scalar> mat_;
    Scalar min_eig_ = Scalar(0);
    Scalar max_eig_ = Scalar(0);
};

// Tall factor G representing the positive semidefinite matrix R = G G^T of
// prescribed rank.  PSD-ness is automatic; the rank is the column count and
// is tracked, not enforced (the factor may lose numerical rank under
// optimization updates without invalidating the representation).
template <typename Scalar>
class PsdFactor {
public:
    explicit PsdFactor(const Mat<Scalar>& g) : g_(g) {
        if (g_.rows() < 1 || g_.cols() < 1)
            throw DimensionError("PsdFactor: factor must be non-empty");
        if (g_.cols() > g_.rows())
            throw DimensionError("PsdFactor: rank exceeds dimension");
    }

    const Mat<Scalar>& factor() const { return g_; }
    Index dim() const { return g_.rows(); }
    Index rank() const { return g_.cols(); }

    // The represented matrix G G^T, symmetrized bit-exactly.
    Mat<Scalar> product() const { return project_sym(Mat<Scalar>(g_ * g_.transpose())); }

private:
    Mat<Scalar> g_;
};

// Principal square root via symmetric eigendecomposition.
template <typename Scalar>
SpdMatrix<Scalar> spd_sqrt(const SpdMatrix<Scalar>& q) {
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(q.mat());
    if (es.info() != Eigen::Success)
        throw NumericalError("spd_sqrt: eigensolver did not converge");
    if (es.eigenvalues().minCoeff() <= Scalar(0))
        throw DefinitenessError("spd_sqrt: non-positive eigenvalue");
    Mat<Scalar> s = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
                    es.eigenvectors().transpose();
    return SpdMatrix<Scalar>(s);
}

// Matrix logarithm of an SPD matrix; the result is symmetric.
template <typename Scalar>
Mat<Scalar> spd_log(const SpdMatrix<Scalar>& q) {
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(q.mat());
    if (es.info() != Eigen::Success)
        throw NumericalError("spd_log: eigensolver did not converge");
    if (es.eigenvalues().minCoeff() <= Scalar(0))
        throw DefinitenessError("spd_log: non-positive eigenvalue");
    Mat<Scalar> l = es.eigenvectors() * es.eigenvalues().array().log().matrix().asDiagonal() *
                    es.eigenvectors().transpose();
    return project_sym(l);
}

// Matrix exponential of a symmetric matrix; the result is SPD.
template <typename Scalar>
SpdMatrix<Scalar> spd_exp(const Mat<Scalar>& s) {
    detail::require_square(s, "spd_exp");
    if ((s - Mat<Scalar>(s.transpose())).norm() > detail::structure_tol(s))
        throw SymmetryError("spd_exp: input is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(project_sym(s));
    if (es.info() != Eigen::Success)
        throw NumericalError("spd_exp: eigensolver did not converge");
    if (es.eigenvalues().cwiseAbs().maxCoeff() > Scalar(700))
        throw NumericalError("spd_exp: eigenvalue too large, exp would overflow");
    Mat<Scalar> e = es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() *
                    es.eigenvectors().transpose();
    return SpdMatrix<Scalar>(e);
}

// Geodesic step on the SPD manifold:
//
//     retract(Q, xi, t) = Q^{1/2} exp(t Q^{-1/2} xi Q^{-1/2}) Q^{1/2}
//
// which stays SPD for every step length.  Two numerical guards reject steps
// the formula cannot carry reliably in double precision; the optimizer treats
// those rejections like any failed line-search trial:
//   * the exponent's spectrum is capped (|eig| <= 40), since exp(40) ~ 2e17
//     already exhausts double-precision headroom within the sandwich;
//   * the result must be numerically SPD with min/max eigenvalue ratio above
//     1e-12, so later factorizations of the iterate remain meaningful.
template <typename Scalar>
SpdMatrix<Scalar> spd_retract(const SpdMatrix<Scalar>& q, const Mat<Scalar>& xi, Scalar t) {
    detail::require_square(xi, "spd_retract");
    if (xi.rows() != q.dim()) throw DimensionError("spd_retract: tangent dimension mismatch");
    if (!std::isfinite(static_cast<double>(t)))
        throw ParameterError("spd_retract: non-finite step");
    if ((xi - Mat<Scalar>(xi.transpose())).norm() > detail::structure_tol(xi))
        throw SymmetryError("spd_retract: tangent is not symmetric");
    if (t == Scalar(0) || xi.norm() == Scalar(0)) return q;

    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(q.mat());
    if (es.info() != Eigen::Success)
        throw NumericalError("spd_retract: eigensolver did not converge");
    if (es.eigenvalues().minCoeff() <= Scalar(0))
        throw DefinitenessError("spd_retract: base point lost definiteness");
    Mat<Scalar> sqrt_q = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
                         es.eigenvectors().transpose();
    Mat<Scalar> inv_sqrt_q = es.eigenvectors() *
                             es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                             es.eigenvectors().transpose();

    Mat<Scalar> inner = project_sym(Mat<Scalar>(t * (inv_sqrt_q * xi * inv_sqrt_q)));
    if (!inner.allFinite()) throw NumericalError("spd_retract: non-finite exponent");
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> esi(inner);
    if (esi.info() != Eigen::Success)
        throw NumericalError("spd_retract: exponent eigensolver did not converge");
    constexpr Scalar exp_arg_cap = Scalar(40);
    if (esi.eigenvalues().cwiseAbs().maxCoeff() > exp_arg_cap)
        throw NumericalError("spd_retract: step too large for the matrix exponential");
    Mat<Scalar> exp_inner = esi.eigenvectors() *
                            esi.eigenvalues().array().exp().matrix().asDiagonal() *
                            esi.eigenvectors().transpose();

    Mat<Scalar> out = project_sym(Mat<Scalar>(sqrt_q * exp_inner * sqrt_q));
    if (!out.allFinite()) throw NumericalError("spd_retract: non-finite result");
    SpdMatrix<Scalar> result(out);
    constexpr Scalar floor_rel = Scalar(1e-12);
    if (result.min_eig() <= floor_rel * result.max_eig())
        throw DefinitenessError("spd_retract: result numerically indefinite");
    return result;
}

// Best rank-r PSD approximation factor: G = U_r diag(sqrt(lambda_r)) from the
// top-r eigenpairs, negative eigenvalues clipped at zero.  Column signs are
// normalized so each column's largest-magnitude entry is nonnegative.
template <typename Scalar>
PsdFactor<Scalar> psd_factor(const Mat<Scalar>& r_mat, Index rank) {
    detail::require_square(r_mat, "psd_factor");
    if (rank < 1 || rank > r_mat.rows())
        throw DimensionError("psd_factor: rank out of range");
    if ((r_mat - Mat<Scalar>(r_mat.transpose())).norm() > detail::structure_tol(r_mat))
        throw SymmetryError("psd_factor: input is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(project_sym(r_mat));
    if (es.info() != Eigen::Success)
        throw NumericalError("psd_factor: eigensolver did not converge");
    const Scalar tol_psd = Scalar(1e-12) * r_mat.norm();
    if (es.eigenvalues().minCoeff() < -tol_psd)
        throw DefinitenessError("psd_factor: input has a negative eigenvalue");

    const Index n = r_mat.rows();
    Mat<Scalar> g(n, rank);
    for (Index k = 0; k < rank; ++k) {
        // Eigenvalues come back ascending; take them from the top.
        const Index src = n - 1 - k;
        const Scalar lam = std::max(es.eigenvalues()(src), Scalar(0));
        Vec<Scalar> col = es.eigenvectors().col(src) * std::sqrt(lam);
        Index imax = 0;
        col.cwiseAbs().maxCoeff(&imax);
        if (col(imax) < Scalar(0)) col = -col;
        g.col(k) = col;
    }
    return PsdFactor<Scalar>(g);
}

}  // namespace phident
