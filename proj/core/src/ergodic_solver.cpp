#include "riskhjb/ergodic_solver.hpp"

#include "riskhjb/finite_difference.hpp"
#include "stepper.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace riskhjb {

void ErgodicConfig::validate() const {
    if (!(first_checkpoint > 0.0) || !std::isfinite(first_checkpoint)) {
        throw ConfigError("first checkpoint must be positive");
    }
    if (!(max_horizon >= 2.0 * first_checkpoint)) {
        throw ConfigError("max horizon must allow at least two checkpoints");
    }
    if (!(tol_u > 0.0) || !(tol_rho > 0.0)) throw ConfigError("ergodic tolerances must be positive");
    if (!(qbu_probe > 0.0)) throw ConfigError("qbu probe constant must be positive");
}

ValueField ErgodicSolution::field() const {
    return ValueField(grid, {0.0}, {u_hat}, FieldKind::value);
}

namespace {

struct Moments {
    double mean = 0.0;
    double std = 0.0;
    double min = 0.0;
};

Moments interior_moments(const Grid& grid, const Vector& v, double margin) {
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    std::size_t count = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!grid.in_trust_region(i, margin)) continue;
        sum += v[static_cast<Eigen::Index>(i)];
        lo = std::min(lo, v[static_cast<Eigen::Index>(i)]);
        ++count;
    }
    if (count == 0) throw ConfigError("grid has no trust-region nodes");
    Moments m;
    m.mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!grid.in_trust_region(i, margin)) continue;
        const double d = v[static_cast<Eigen::Index>(i)] - m.mean;
        ss += d * d;
    }
    m.std = std::sqrt(ss / static_cast<double>(count));
    m.min = lo;
    return m;
}

double interior_max_abs(const Grid& grid, const Vector& v, double margin) {
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.in_trust_region(i, margin)) worst = std::max(worst, std::abs(v[static_cast<Eigen::Index>(i)]));
    }
    return worst;
}

}  // namespace

ErgodicSolution solve_ergodic(const MarketModel& model, const ControlParams& params, const Grid& grid,
                              const SolverConfig& cfg, const ErgodicConfig& ecfg) {
    cfg.validate();
    ecfg.validate();
    const double margin = cfg.trust_margin;

    Vector x0 = ecfg.x0 ? *ecfg.x0 : Vector(0.5 * (grid.lower() + grid.upper()));
    if (x0.size() != grid.dims() || !grid.contains(x0)) throw ConfigError("x0 must lie inside the grid");
    const std::size_t x0_node = grid.nearest_node(x0);
    if (ecfg.x0 && (grid.node(x0_node) - x0).lpNorm<Eigen::Infinity>() > 1e-9 * (1.0 + x0.lpNorm<Eigen::Infinity>())) {
        throw ConfigError("x0 must be a grid node");
    }
    x0 = grid.node(x0_node);

    // every checkpoint lands on a whole number of steps
    const auto base_steps = static_cast<std::size_t>(std::max(1.0, std::ceil(ecfg.first_checkpoint / cfg.dt - 1e-9)));
    const double dt = ecfg.first_checkpoint / static_cast<double>(base_steps);
    const detail::Stepper stepper(model, params, grid, cfg, dt);

    const auto n = static_cast<Eigen::Index>(grid.size());
    Vector w = Vector::Zero(n);
    Vector next(n);
    Vector rate = Vector::Zero(n);
    Vector phi_prev;
    std::vector<CheckpointRecord> history;

    std::size_t step = 0;
    std::size_t target = base_steps;
    double horizon = ecfg.first_checkpoint;
    while (horizon <= ecfg.max_horizon * (1.0 + 1e-12)) {
        try {
            while (step < target) {
                stepper.advance(w, next);
                if (step + 1 == target) rate = (next - w) / dt;
                w.swap(next);
                ++step;
            }
        } catch (const SolverError& e) {
            std::ostringstream os;
            os << e.what() << " (ergodic run, s = " << static_cast<double>(step) * dt << ")";
            throw DivergedError(os.str(), history);
        }

        Vector phi = w.array() - w[static_cast<Eigen::Index>(x0_node)];
        phi[static_cast<Eigen::Index>(x0_node)] = 0.0;

        CheckpointRecord rec;
        rec.horizon = horizon;
        const Moments mom = interior_moments(grid, rate, margin);
        rec.rate_mean = mom.mean;
        rec.rate_std = mom.std;
        rec.rate_min = mom.min;
        rec.cauchy = phi_prev.size() == 0 ? 0.0 : interior_max_abs(grid, Vector(phi - phi_prev), margin);
        rec.qbu_lhs_max = compute_qbu(model, params, grid, w, rate, ecfg.qbu_probe, margin).lhs_max;
        history.push_back(rec);

        const bool flat = rec.rate_std <= ecfg.tol_rho * std::max(std::abs(rec.rate_mean), 1e-300);
        if (phi_prev.size() != 0 && rec.cauchy <= ecfg.tol_u && flat) {
            ErgodicSolution sol(grid);
            sol.rho = rec.rate_mean;
            sol.rho_std = rec.rate_std;
            sol.u_hat = std::move(phi);
            sol.rate = rate;
            sol.x0 = x0;
            sol.x0_node = x0_node;
            sol.horizon = horizon;
            sol.dt = dt;
            sol.history = std::move(history);
            sol.residual = ergodic_residual(model, params, grid, sol.u_hat, sol.rho, cfg.boundary, margin);
            return sol;
        }
        phi_prev = std::move(phi);
        target *= 2;
        horizon *= 2.0;
    }
    std::ostringstream os;
    os << "ergodic iteration did not settle by horizon " << ecfg.max_horizon;
    if (!history.empty()) {
        os << " (last cauchy increment " << history.back().cauchy << ", rate std " << history.back().rate_std << ")";
    }
    throw DivergedError(os.str(), std::move(history));
}

double ergodic_residual(const MarketModel& model, const ControlParams& params, const Grid& grid,
                        const Vector& u_hat, double rho, BoundaryCondition boundary, double trust_margin) {
    const detail::SpatialOperator op(model, params, grid, boundary);
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!grid.in_trust_region(i, trust_margin)) continue;
        worst = std::max(worst, std::abs(op.apply(u_hat, i) - rho));
    }
    return worst;
}

StrategyField stationary_strategy(const ErgodicSolution& sol, const MarketModel& model, const ControlParams& params) {
    return extract_optimal_strategy(sol.field(), model, params);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Vector> tensor_points(const Vector& lower, const Vector& upper, int count) {
    const auto dims = lower.size();
    std::vector<Vector> pts;
    std::size_t total = 1;
    for (Eigen::Index d = 0; d < dims; ++d) total *= static_cast<std::size_t>(count);
    pts.reserve(total);
    std::vector<int> idx(static_cast<std::size_t>(dims), 0);
    for (std::size_t k = 0; k < total; ++k) {
        Vector p(dims);
        for (Eigen::Index d = 0; d < dims; ++d) {
            const double f = static_cast<double>(idx[static_cast<std::size_t>(d)]) / (count - 1);
            p[d] = lower[d] + f * (upper[d] - lower[d]);
        }
        pts.push_back(std::move(p));
        for (std::size_t d = 0; d < idx.size(); ++d) {
            if (++idx[d] < count) break;
            idx[d] = 0;
        }
    }
    return pts;
}

// neighbours along each coordinate in the flattened tensor ordering
double max_cell_jump_rows(const Matrix& table, int count, Eigen::Index dims, bool along_rows) {
    double worst = 0.0;
    const Eigen::Index len = along_rows ? table.rows() : table.cols();
    Eigen::Index stride = 1;
    for (Eigen::Index d = 0; d < dims; ++d) {
        for (Eigen::Index k = 0; k < len; ++k) {
            if ((k / stride) % count == count - 1) continue;
            const Eigen::Index j = k + stride;
            const double jump = along_rows ? (table.row(j) - table.row(k)).cwiseAbs().maxCoeff()
                                           : (table.col(j) - table.col(k)).cwiseAbs().maxCoeff();
            worst = std::max(worst, jump);
        }
        stride *= count;
    }
    return worst;
}

}  // namespace

IsaacsResult isaacs_check(const MarketModel& model, const ControlParams& params, const Vector& x,
                          const Vector& grad_u_hat, const ControlBox& box, int grid_count) {
    box.validate(model.assets(), model.noise_dim());
    if (grid_count < 2) throw ConfigError("control grids need at least two points");
    const LocalMarket lm = LocalMarket::at(model, x);
    const auto hs = tensor_points(box.h_lower, box.h_upper, grid_count);
    const auto ws = tensor_points(box.omega_lower, box.omega_upper, grid_count);

    if (static_cast<double>(hs.size()) * static_cast<double>(ws.size()) > 5e7) {
        throw ConfigError("control grids too large for a full table");
    }
    Matrix table(static_cast<Eigen::Index>(hs.size()), static_cast<Eigen::Index>(ws.size()));
    ControlPoint ctrl;
    for (std::size_t i = 0; i < hs.size(); ++i) {
        ctrl.h = hs[i];
        for (std::size_t j = 0; j < ws.size(); ++j) {
            ctrl.omega = ws[j];
            table(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                game_integrand(lm, ctrl, grad_u_hat, params);
        }
    }

    IsaacsResult res;
    Eigen::Index arg = 0;
    res.supinf = table.colwise().minCoeff().maxCoeff(&arg);
    res.omega_best = ws[static_cast<std::size_t>(arg)];
    res.infsup = table.rowwise().maxCoeff().minCoeff(&arg);
    res.h_best = hs[static_cast<std::size_t>(arg)];
    res.resolution_bound = 2.0 * std::max(max_cell_jump_rows(table, grid_count, box.h_lower.size(), true),
                                          max_cell_jump_rows(table, grid_count, box.omega_lower.size(), false));
    return res;
}

BoundaryGrowth boundary_growth(const ErgodicSolution& sol) {
    const Grid& grid = sol.grid;
    BoundaryGrowth out;
    constexpr int samples = 11;
    for (std::size_t b = 0; b < grid.size(); ++b) {
        if (!grid.on_boundary(b)) continue;
        const Vector end = grid.node(b);
        ++out.rays;
        bool up = true;
        double prev = -std::numeric_limits<double>::infinity();
        for (int k = samples / 2; k < samples; ++k) {
            const double f = static_cast<double>(k) / (samples - 1);
            const double v = interpolate(grid, sol.u_hat, Vector(sol.x0 + f * (end - sol.x0)));
            if (v < prev) {
                up = false;
                break;
            }
            prev = v;
        }
        if (up) ++out.increasing;
    }
    out.fraction = out.rays == 0 ? 0.0 : static_cast<double>(out.increasing) / static_cast<double>(out.rays);
    out.grows = out.fraction >= 0.9;
    return out;
}

QBUDiagnostic compute_qbu(const MarketModel& model, const ControlParams& params, const Grid& grid,
                          const Vector& field, const Vector& rate, double c, double trust_margin) {
    if (!(c > 0.0)) throw ConfigError("probe constant must be positive");
    const double theta = params.theta;
    const int n = grid.dims();
    QBUDiagnostic d;
    d.c = c;
    d.Q.reserve(grid.size());
    d.B.resize(static_cast<Eigen::Index>(grid.size()), n);
    d.U.resize(static_cast<Eigen::Index>(grid.size()));
    d.lhs.resize(static_cast<Eigen::Index>(grid.size()));
    d.delta0 = std::numeric_limits<double>::infinity();

    std::vector<Vector> grads;
    grads.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const LocalMarket lm = LocalMarket::at(model, grid.node(i));
        if (!lm.asset_cov_spd) throw EllipticityError("sigma sigma^T is not positive definite");
        Eigen::SelfAdjointEigenSolver<Matrix> eig(lm.factor_cov, Eigen::EigenvaluesOnly);
        d.delta0 = std::min(d.delta0, eig.eigenvalues().minCoeff());

        const Matrix sinv_sigma = lm.asset_cov_llt.solve(lm.sigma);
        const Matrix proj = Matrix::Identity(model.noise_dim(), model.noise_dim()) -
                            (theta / (theta + 2.0)) * lm.sigma.transpose() * sinv_sigma;
        Matrix q = 0.25 * theta * lm.lambda * proj * lm.lambda.transpose();
        d.Q.push_back(0.5 * (q + q.transpose()));
        const Vector sinv_g = lm.asset_cov_llt.solve(lm.excess);
        d.B.row(static_cast<Eigen::Index>(i)) =
            (lm.factor_drift - (theta / (theta + 2.0)) * lm.cross.transpose() * sinv_g).transpose();
        d.U[static_cast<Eigen::Index>(i)] = lm.excess.dot(sinv_g) / (theta + 2.0) + lm.rate;
        grads.push_back(nodal_gradient(grid, field, i));
    }
    if (!(d.delta0 > 0.0)) throw EllipticityError("Lambda Lambda^T is not positive definite on the grid");

    const double k = 4.0 * (1.0 + c) * (theta + 2.0) / (theta * d.delta0);
    d.lhs_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto e = static_cast<Eigen::Index>(i);
        d.lhs[e] = grads[i].squaredNorm() - k * std::abs(rate[e]);
        if (grid.in_trust_region(i, trust_margin)) d.lhs_max = std::max(d.lhs_max, d.lhs[e]);
    }
    return d;
}

QBUDiagnostic compute_qbu(const MarketModel& model, const ControlParams& params, const ErgodicSolution& sol,
                          double c) {
    return compute_qbu(model, params, sol.grid, sol.u_hat, sol.rate, c);
}

}  // namespace riskhjb
