#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace phident {

// Dense row-major matrices throughout; trajectories store one time node per
// row, which makes the batched gradient accumulations plain matrix products.
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or size mismatch between operands.
struct DimensionError : Error {
    using Error::Error;
};

// A matrix that must be symmetric (or skew-symmetric) is not.
struct SymmetryError : Error {
    using Error::Error;
};

// A matrix that must be positive (semi)definite is not.
struct DefinitenessError : Error {
    using Error::Error;
};

// A time-stepping loop produced non-finite values.
struct DivergenceError : Error {
    using Error::Error;
};

// Two signals or trajectories do not live on the same time grid.
struct GridError : Error {
    using Error::Error;
};

// Malformed file content.
struct ParseError : Error {
    using Error::Error;
};

// Invalid scalar parameter (non-positive step size, cells < 2, ...).
struct ParameterError : Error {
    using Error::Error;
};

// An eigensolver or matrix function left its reliable regime.
struct NumericalError : Error {
    using Error::Error;
};

}  // namespace phident
