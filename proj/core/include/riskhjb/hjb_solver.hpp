#pragma once

// Finite-horizon value function u(t, x) of the risk-sensitive problem:
//
//   u_t + mu' grad u - (theta/4) grad u' M grad u + 1/2 tr(M D2u) - K_theta(x, grad u) = 0,
//   u(T, x) = 0,
//
// solved backwards on a truncated grid. The HJB solution for wealth v is
// phi = v^{-theta/2} exp(-theta/2 u) and psi = exp(-theta/2 u) solves the
// linearised equation
//
//   psi_t + 1/2 tr(M D2psi) + mu' grad psi + H(x, psi, grad psi) = 0,
//   H = (theta/2) inf_h [ {1/2 (theta/2+1) h'Sh - h'(a - r1) - r} psi - h' sigma Lambda' grad psi ].

#include "riskhjb/control_law.hpp"
#include "riskhjb/market_model.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace riskhjb {

enum class Scheme { semi_implicit, explicit_euler };
enum class BoundaryCondition { linear_extrapolation, zero_second_derivative };

std::string to_string(Scheme s);
std::string to_string(BoundaryCondition b);
Scheme parse_scheme(const std::string& s);
BoundaryCondition parse_boundary(const std::string& s);

struct SolverConfig {
    double dt = 1e-3;
    Scheme scheme = Scheme::semi_implicit;
    BoundaryCondition boundary = BoundaryCondition::linear_extrapolation;
    /// Fixed-point sweeps on the lagged nonlinear terms per step (0 = plain
    /// semi-implicit step).
    int max_newton_iters = 0;
    double newton_tolerance = 1e-12;
    /// Relative residual bound checked after a solve (reported, not thrown).
    double tolerance = 1e-2;
    /// Fraction of the domain width excluded near each face from residual checks.
    double trust_margin = 0.1;

    void validate() const;
};

enum class FieldKind { value, psi, phi };

struct SolveDiagnostics {
    std::size_t steps = 0;
    double dt = 0.0;
    double residual_max = 0.0;      ///< max |R| over interior nodes and times
    double residual_rel_max = 0.0;  ///< max |R| / (1 + |u|)
    bool residual_ok = true;
    double wall_seconds = 0.0;      ///< metadata only; never part of payload output
};

/// Grid-sampled field over an ascending time mesh. slices()[k] holds the
/// values at times()[k] on every grid node.
class ValueField {
public:
    ValueField(Grid grid, std::vector<double> times, std::vector<Vector> slices, FieldKind kind = FieldKind::value);

    const Grid& grid() const { return grid_; }
    const std::vector<double>& times() const { return times_; }
    const std::vector<Vector>& slices() const { return slices_; }
    const Vector& slice(std::size_t k) const { return slices_.at(k); }
    FieldKind kind() const { return kind_; }
    double horizon() const { return times_.back(); }

    Vector gradient(std::size_t time_index, std::size_t node) const;

    /// Linear in time, multilinear in x. Throws InterpolationError outside
    /// [0, T] x grid box.
    double value_at(double t, const Vector& x) const;

    SolveDiagnostics diagnostics;

private:
    Grid grid_;
    std::vector<double> times_;
    std::vector<Vector> slices_;
    FieldKind kind_;
};

/// Investment fractions h(t, x) sampled on the grid; rows of each slice are
/// nodes, columns are assets.
class StrategyField {
public:
    StrategyField(Grid grid, std::vector<double> times, std::vector<Matrix> slices);

    const Grid& grid() const { return grid_; }
    const std::vector<double>& times() const { return times_; }
    const std::vector<Matrix>& slices() const { return slices_; }
    int assets() const { return static_cast<int>(slices_.front().cols()); }

    /// Linear in time (held constant outside the mesh), multilinear in x with
    /// coordinates clamped onto the grid box.
    Vector evaluate(double t, const Vector& x) const;
    /// Allocation-free variant; `out` must have assets() entries.
    void evaluate_into(double t, const Vector& x, Eigen::Ref<Vector> out) const;

    /// Multiply every fraction by `factor`.
    StrategyField scaled(double factor) const;

private:
    Grid grid_;
    std::vector<double> times_;
    std::vector<Matrix> slices_;
};

ValueField solve_finite_horizon(const MarketModel& model, const ControlParams& params, double horizon,
                                const Grid& grid, const SolverConfig& cfg);

/// psi = exp(-(theta/2) u).
ValueField to_psi(const ValueField& u, const ControlParams& params);

/// phi = v^{-theta/2} psi, formed as exp(-(theta/2)(ln v + u)).
ValueField to_phi(const ValueField& u, const ControlParams& params, double wealth);

/// Inverse of to_psi: u = -(2/theta) ln psi.
ValueField to_u(const ValueField& psi, const ControlParams& params);

struct ResidualReport {
    double max_abs = 0.0;
    double max_rel = 0.0;  ///< max |R| / (1 + |field|)
};

/// Discrete residual of the u-equation (centred in time, central in space)
/// over trust-region nodes and interior times.
ResidualReport value_residual(const ValueField& u, const MarketModel& model, const ControlParams& params,
                              double trust_margin = 0.1);

/// Max-norm of the discrete residual of the psi-equation evaluated on
/// psi = to_psi(u), over trust-region nodes and interior times.
double psi_residual(const ValueField& u, const MarketModel& model, const ControlParams& params,
                    double trust_margin = 0.1);

/// h(t, x) = minimizing_selector(x, grad u(t, x)) at every node and time.
StrategyField extract_optimal_strategy(const ValueField& u, const MarketModel& model, const ControlParams& params);

/// ln v + u(t, x).
double criterion_from_value(const ValueField& u, double t, const Vector& x, double wealth);

}  // namespace riskhjb
