#pragma once

// Ergodic pair (rho, u_hat) of
//
//   rho = mu' grad u + 1/2 tr(M D2u) - (theta/4) grad u' M grad u - K_theta(x, grad u),
//
// obtained as the long-time limit of the Cauchy problem w_s = F(w), w(0) = 0:
// w(s, x) - w(s, x0) -> u_hat(x) and dw/ds -> rho.

#include "riskhjb/assumptions.hpp"
#include "riskhjb/control_law.hpp"
#include "riskhjb/hjb_solver.hpp"
#include "riskhjb/market_model.hpp"

#include <optional>
#include <vector>

namespace riskhjb {

struct ErgodicConfig {
    double first_checkpoint = 1.0;  ///< checkpoints at first_checkpoint * 2^i
    double max_horizon = 16384.0;
    double tol_u = 1e-6;            ///< bound on the max increment of the normalised field
    double tol_rho = 1e-4;          ///< bound on std(dw/ds) relative to |rho|
    std::optional<Vector> x0;       ///< normalisation point; nearest node to the box centre if unset
    double qbu_probe = 1.0;         ///< the constant c of the gradient-bound diagnostic

    void validate() const;
};

struct CheckpointRecord {
    double horizon = 0.0;
    double rate_mean = 0.0;     ///< interior mean of dw/ds
    double rate_std = 0.0;      ///< interior std of dw/ds
    double rate_min = 0.0;
    double cauchy = 0.0;        ///< max interior |phi(T_i) - phi(T_{i-1})|, 0 at the first checkpoint
    double qbu_lhs_max = 0.0;   ///< max interior |grad w|^2 - k |dw/ds|
};

struct ErgodicSolution {
    explicit ErgodicSolution(Grid g) : grid(std::move(g)) {}

    double rho = 0.0;
    double rho_std = 0.0;
    Grid grid;
    Vector u_hat;               ///< on grid nodes, zero at x0
    Vector rate;                ///< dw/ds at the final checkpoint
    Vector x0;
    std::size_t x0_node = 0;
    double horizon = 0.0;
    double dt = 0.0;
    std::vector<CheckpointRecord> history;
    double residual = 0.0;      ///< max interior |F(u_hat) - rho|

    /// u_hat as a single-slice field at t = 0.
    ValueField field() const;
};

/// Thrown when the checkpoints fail to settle before max_horizon.
class DivergedError : public SolverError {
public:
    DivergedError(const std::string& what, std::vector<CheckpointRecord> history)
        : SolverError(what), history_(std::move(history)) {}
    const std::vector<CheckpointRecord>& history() const { return history_; }

private:
    std::vector<CheckpointRecord> history_;
};

ErgodicSolution solve_ergodic(const MarketModel& model, const ControlParams& params, const Grid& grid,
                              const SolverConfig& cfg, const ErgodicConfig& ecfg = {});

/// max interior |F(u_hat) - rho| on the same discrete operator the solver uses.
double ergodic_residual(const MarketModel& model, const ControlParams& params, const Grid& grid,
                        const Vector& u_hat, double rho, BoundaryCondition boundary, double trust_margin = 0.1);

/// Time-independent h(x) = minimizing_selector(x, grad u_hat(x)).
StrategyField stationary_strategy(const ErgodicSolution& sol, const MarketModel& model, const ControlParams& params);

struct IsaacsResult {
    double supinf = 0.0;          ///< max over omega of min over h
    double infsup = 0.0;          ///< min over h of max over omega
    double resolution_bound = 0.0;  ///< twice the largest change of the integrand across one grid cell
    Vector h_best;                ///< argmin h of the inf-sup
    Vector omega_best;            ///< argmax omega of the sup-inf
};

/// Iterated optima of the game integrand on tensor control grids with
/// `grid_count` points per coordinate.
IsaacsResult isaacs_check(const MarketModel& model, const ControlParams& params, const Vector& x,
                          const Vector& grad_u_hat, const ControlBox& box, int grid_count = 61);

struct BoundaryGrowth {
    std::size_t rays = 0;
    std::size_t increasing = 0;
    double fraction = 0.0;
    bool grows = false;  ///< fraction >= 0.9
};

/// Checks whether u_hat increases along the outer half of the ray from x0
/// to every boundary node.
BoundaryGrowth boundary_growth(const ErgodicSolution& sol);

struct QBUDiagnostic {
    std::vector<Matrix> Q;  ///< per node, n x n
    Matrix B;               ///< nodes x n
    Vector U;               ///< per node
    Vector lhs;             ///< |grad w|^2 - 4 (1+c)(theta+2) / (theta delta0) |dw/ds|
    double c = 1.0;
    double delta0 = 0.0;    ///< min over nodes of the smallest eigenvalue of Lambda Lambda'
    double lhs_max = 0.0;   ///< over trust-region nodes
};

/// Q = (theta/4) Lambda [I - theta/(theta+2) sigma' S^{-1} sigma] Lambda',
/// B = mu - theta/(theta+2) Lambda sigma' S^{-1} (a - r1),
/// U = (a - r1)' S^{-1} (a - r1) / (theta+2) + r,
/// so that mu'p - (theta/4) p'Mp - K_theta(x, p) = B'p - p'Qp + U.
/// `field` and `rate` are w and dw/ds on the grid nodes.
QBUDiagnostic compute_qbu(const MarketModel& model, const ControlParams& params, const Grid& grid,
                          const Vector& field, const Vector& rate, double c = 1.0, double trust_margin = 0.1);
QBUDiagnostic compute_qbu(const MarketModel& model, const ControlParams& params, const ErgodicSolution& sol,
                          double c = 1.0);

}  // namespace riskhjb
