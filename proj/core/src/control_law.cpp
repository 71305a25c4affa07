#include "riskhjb/control_law.hpp"

#include <cmath>
#include <string>

namespace riskhjb {

ControlParams::ControlParams(double risk_sensitivity) : theta(risk_sensitivity) {
    if (!(theta > 0.0) || !std::isfinite(theta)) {
        throw ConfigError("risk sensitivity theta must be positive, got " + std::to_string(theta));
    }
}

namespace {

void require_elliptic(const LocalMarket& local) {
    if (!local.asset_cov_spd) throw EllipticityError("sigma sigma^T is not positive definite");
}

void require_gradient(const LocalMarket& local, const Vector& grad_u) {
    if (grad_u.size() != local.factor_drift.size()) {
        throw ConfigError("gradient has dimension " + std::to_string(grad_u.size()) + ", expected " +
                          std::to_string(local.factor_drift.size()));
    }
}

Vector hedged_excess(const LocalMarket& local, const Vector& grad_u, const ControlParams& params) {
    require_gradient(local, grad_u);
    return local.excess - params.hedge_coupling() * (local.cross * grad_u);
}

}  // namespace

Vector minimizing_selector(const LocalMarket& local, const Vector& grad_u, const ControlParams& params) {
    require_elliptic(local);
    const Vector g = hedged_excess(local, grad_u, params);
    return (2.0 / (params.theta + 2.0)) * local.asset_cov_llt.solve(g);
}

Vector minimizing_selector(const MarketModel& model, const Vector& x, const Vector& grad_u,
                           const ControlParams& params) {
    return minimizing_selector(LocalMarket::at(model, x), grad_u, params);
}

double hamiltonian_bracket(const LocalMarket& local, const Vector& h, const Vector& grad_u,
                           const ControlParams& params) {
    require_gradient(local, grad_u);
    const double quad = 0.5 * (0.5 * params.theta + 1.0) * h.dot(local.asset_cov * h);
    return quad - h.dot(local.excess) - local.rate +
           params.hedge_coupling() * h.dot(local.cross * grad_u);
}

double hamiltonian_K_theta(const LocalMarket& local, const Vector& grad_u, const ControlParams& params) {
    require_elliptic(local);
    const Vector g = hedged_excess(local, grad_u, params);
    return -g.dot(local.asset_cov_llt.solve(g)) / (params.theta + 2.0) - local.rate;
}

double hamiltonian_K_theta(const MarketModel& model, const Vector& x, const Vector& grad_u,
                           const ControlParams& params) {
    return hamiltonian_K_theta(LocalMarket::at(model, x), grad_u, params);
}

double running_cost(const LocalMarket& local, const ControlPoint& ctrl, const ControlParams& params) {
    const double quad = 0.5 * (0.5 * params.theta + 1.0) * ctrl.h.dot(local.asset_cov * ctrl.h);
    return quad - ctrl.omega.squaredNorm() / params.theta - ctrl.h.dot(local.excess) - local.rate;
}

double running_cost(const MarketModel& model, const Vector& x, const ControlPoint& ctrl,
                    const ControlParams& params) {
    return running_cost(LocalMarket::at(model, x), ctrl, params);
}

GeneratorCoefficients generator_coefficients(const LocalMarket& local, const ControlPoint& ctrl,
                                             const ControlParams& params) {
    if (ctrl.h.size() != local.sigma.rows() || ctrl.omega.size() != local.lambda.cols()) {
        throw ConfigError("control point has wrong dimensions");
    }
    GeneratorCoefficients gc;
    gc.drift = local.factor_drift + local.lambda * ctrl.omega +
               params.hedge_coupling() * (local.cross.transpose() * ctrl.h);
    gc.diffusion = local.factor_cov;
    return gc;
}

GeneratorCoefficients generator_coefficients(const MarketModel& model, const Vector& x,
                                             const ControlPoint& ctrl, const ControlParams& params) {
    return generator_coefficients(LocalMarket::at(model, x), ctrl, params);
}

double game_integrand(const LocalMarket& local, const ControlPoint& ctrl, const Vector& grad_u,
                      const ControlParams& params) {
    require_gradient(local, grad_u);
    const GeneratorCoefficients gc = generator_coefficients(local, ctrl, params);
    return gc.drift.dot(grad_u) + running_cost(local, ctrl, params);
}

ControlPoint saddle_controls(const LocalMarket& local, const Vector& grad_u, const ControlParams& params) {
    ControlPoint cp;
    cp.h = minimizing_selector(local, grad_u, params);
    cp.omega = 0.5 * params.theta * (local.lambda.transpose() * grad_u);
    return cp;
}

ControlPoint saddle_controls(const MarketModel& model, const Vector& x, const Vector& grad_u,
                             const ControlParams& params) {
    return saddle_controls(LocalMarket::at(model, x), grad_u, params);
}

double game_value(const LocalMarket& local, const Vector& grad_u, const ControlParams& params) {
    require_gradient(local, grad_u);
    return local.factor_drift.dot(grad_u) + 0.25 * params.theta * grad_u.dot(local.factor_cov * grad_u) +
           hamiltonian_K_theta(local, grad_u, params);
}

}  // namespace riskhjb
