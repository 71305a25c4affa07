#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace riskhjb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A coefficient function returned a non-finite value or the wrong shape.
class ModelError : public Error {
public:
    using Error::Error;
};

/// Invalid grid, solver, simulation or run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// sigma sigma^T (or Lambda Lambda^T) is not positive definite where needed.
class EllipticityError : public Error {
public:
    using Error::Error;
};

/// Stability violation, failed linear solve or NaN during time stepping.
class SolverError : public Error {
public:
    using Error::Error;
};

/// Point query outside the support of a sampled field.
class InterpolationError : public Error {
public:
    using Error::Error;
};

/// Strategy or coefficient failure while simulating paths.
class SimulationError : public Error {
public:
    using Error::Error;
};

/// Oracle preconditions violated (bad inputs, Riccati blow-up, box search failure).
class OracleError : public Error {
public:
    using Error::Error;
};

}  // namespace riskhjb
