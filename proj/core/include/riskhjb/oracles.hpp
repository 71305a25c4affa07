#pragma once

// Reference solutions that do not go through the PDE stepper or the closed
// forms in control_law.

#include "riskhjb/control_law.hpp"
#include "riskhjb/market_model.hpp"

#include <vector>

namespace riskhjb {

struct MertonOracle {
    double h_star = 0.0;
    double rho = 0.0;
    double J = 0.0;
};

/// One asset with constant coefficients. Under a constant fraction h,
/// ln V(T) is Gaussian, so
///   J(h) = ln v0 + [r + h (a - r) - (theta+2)/4 h^2 sigma2] T,
/// maximised at h* = 2 (a - r) / ((theta+2) sigma2) with rate
/// rho = r + (a - r)^2 / ((theta+2) sigma2).
MertonOracle merton_constant_oracle(double a, double r, double sigma2, double theta, double horizon, double v0);

/// J(h) above for an arbitrary constant fraction.
double merton_criterion(double a, double r, double sigma2, double theta, double h, double horizon, double v0);

/// u(t, x) = x' K(t) x + k(t)' x + c(t) for the linear-Gaussian model.
struct RiccatiSolution {
    std::vector<double> times;  ///< ascending, 0 .. T
    std::vector<Matrix> K;
    std::vector<Vector> k;
    std::vector<double> c;

    double value(std::size_t index, const Vector& x) const;
    Vector gradient(std::size_t index, const Vector& x) const;
};

/// Time derivatives (in t) of (K, k, c) at the given state. Exposed so the
/// right-hand sides can be checked against the PDE residual directly.
struct RiccatiRates {
    Matrix dK;
    Vector dk;
    double dc = 0.0;
};
RiccatiRates riccati_rhs(const LinearGaussianSpec& spec, const ControlParams& params, const Matrix& K,
                         const Vector& k);

/// Backward RK4 from K = k = c = 0 at T with `time_steps` uniform steps.
/// Throws OracleError if the solution blows up before t = 0.
RiccatiSolution riccati_oracle(const LinearGaussianSpec& spec, const ControlParams& params, double horizon,
                               int time_steps);

struct BruteForceMin {
    double min_value = 0.0;
    Vector argmin;
    Vector lower;  ///< box actually searched
    Vector upper;
    bool expanded = false;
};

/// Dense tensor-grid minimisation of
///   1/2 (theta/2 + 1) h'Sh - h'(a - r1) - r + (theta/2) h' sigma Lambda' grad_u
/// over [lower, upper] with grid_count points per asset. If the minimiser
/// sits on the box boundary the box is doubled about its centre once.
BruteForceMin brute_force_hamiltonian(const MarketModel& model, const Vector& x, const Vector& grad_u,
                                      const ControlParams& params, const Vector& lower, const Vector& upper,
                                      int grid_count);

struct BruteForceSaddle {
    double supinf = 0.0;
    double infsup = 0.0;
    Vector h;      ///< minimiser of the inf-sup
    Vector omega;  ///< maximiser of the sup-inf
};

/// Iterated optima of the game integrand on tensor control grids.
BruteForceSaddle brute_force_saddle(const MarketModel& model, const Vector& x, const Vector& grad_u,
                                    const ControlParams& params, const Vector& h_lower, const Vector& h_upper,
                                    const Vector& omega_lower, const Vector& omega_upper, int grid_count);

}  // namespace riskhjb
