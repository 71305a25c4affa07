#pragma once

// Pointwise control maps of the risk-sensitive problem.
//
// The Hamiltonian bracket, minimised over investment fractions h, is
//
//   B(h) = 1/2 (theta/2 + 1) h' S h - h' (a - r 1) - r + (theta/2) h' sigma Lambda' p
//
// with S = sigma sigma' and p = grad u. Its infimum is K_theta(x, p) and its
// unique minimiser is the optimal feedback fraction.
//
// The game form adds an adversarial drift distortion omega in R^{m+n}:
//
//   G(h, omega) = (mu + Lambda omega + (theta/2) Lambda sigma' h)' p + c(x, h, omega)
//   c(x, h, omega) = 1/2 (theta/2 + 1) h' S h - |omega|^2 / theta - h' (a - r 1) - r
//
// G is strictly convex in h, strictly concave in omega, and separable, so
// sup-inf and inf-sup agree.

#include "riskhjb/market_model.hpp"
#include "riskhjb/types.hpp"

namespace riskhjb {

/// Risk-sensitivity parameter; theta > 0 (risk averse).
struct ControlParams {
    double theta = 1.0;

    explicit ControlParams(double risk_sensitivity);

    /// Weight of the hedging term h' sigma Lambda' grad u in the bracket.
    double hedge_coupling() const { return 0.5 * theta; }
};

struct ControlPoint {
    Vector h;      ///< investment fractions, m
    Vector omega;  ///< drift distortion, m+n
};

struct GeneratorCoefficients {
    Vector drift;      ///< mu + Lambda omega + (theta/2) Lambda sigma' h
    Matrix diffusion;  ///< Lambda Lambda'
};

/// Argmin of the Hamiltonian bracket:
/// h* = 2/(theta+2) S^{-1} [ (a - r 1) - (theta/2) sigma Lambda' grad_u ].
/// Throws EllipticityError when S is not positive definite.
Vector minimizing_selector(const LocalMarket& local, const Vector& grad_u, const ControlParams& params);
Vector minimizing_selector(const MarketModel& model, const Vector& x, const Vector& grad_u,
                           const ControlParams& params);

/// The bracket B(h) itself, evaluated at an arbitrary h.
double hamiltonian_bracket(const LocalMarket& local, const Vector& h, const Vector& grad_u,
                           const ControlParams& params);

/// K_theta(x, grad_u) = inf_h B(h) = -g' S^{-1} g / (theta + 2) - r,
/// g = (a - r 1) - (theta/2) sigma Lambda' grad_u.
double hamiltonian_K_theta(const LocalMarket& local, const Vector& grad_u, const ControlParams& params);
double hamiltonian_K_theta(const MarketModel& model, const Vector& x, const Vector& grad_u,
                           const ControlParams& params);

/// c(x, h, omega) of the game form.
double running_cost(const LocalMarket& local, const ControlPoint& ctrl, const ControlParams& params);
double running_cost(const MarketModel& model, const Vector& x, const ControlPoint& ctrl,
                    const ControlParams& params);

/// Coefficients of L^{h,omega}, which also drive the controlled factor SDE.
GeneratorCoefficients generator_coefficients(const LocalMarket& local, const ControlPoint& ctrl,
                                             const ControlParams& params);
GeneratorCoefficients generator_coefficients(const MarketModel& model, const Vector& x,
                                             const ControlPoint& ctrl, const ControlParams& params);

/// First-order part of L^{h,omega} applied to grad_u plus the running cost.
double game_integrand(const LocalMarket& local, const ControlPoint& ctrl, const Vector& grad_u,
                      const ControlParams& params);

/// (h_bar, omega_bar): h_bar = minimizing_selector, omega_bar = (theta/2) Lambda' grad_u.
ControlPoint saddle_controls(const LocalMarket& local, const Vector& grad_u, const ControlParams& params);
ControlPoint saddle_controls(const MarketModel& model, const Vector& x, const Vector& grad_u,
                             const ControlParams& params);

/// Value of the game integrand at the saddle point:
/// mu' p + (theta/4) p' M p + K_theta(x, p).
double game_value(const LocalMarket& local, const Vector& grad_u, const ControlParams& params);

}  // namespace riskhjb
