#include "stepper.hpp"

#include "riskhjb/finite_difference.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace riskhjb::detail {

namespace {

void append_row(StencilRows& rows, const std::map<std::size_t, double>& entries) {
    for (const auto& [col, w] : entries) {
        if (w == 0.0) continue;
        rows.cols.push_back(static_cast<std::uint32_t>(col));
        rows.weights.push_back(w);
    }
    rows.offsets.push_back(rows.cols.size());
}

}  // namespace

SpatialOperator::SpatialOperator(const MarketModel& model, const ControlParams& params, const Grid& grid,
                                 BoundaryCondition boundary)
    : grid_(grid), params_(params) {
    if (grid.dims() != model.factors()) throw ConfigError("grid dimension does not match factor count");
    if (grid.dims() > 2) throw ConfigError("grid solvers support one or two factors");
    const std::size_t size = grid.size();
    if (size >= (std::size_t{1} << 31)) throw ConfigError("grid too large");

    locals_.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        locals_.push_back(LocalMarket::at(model, grid.node(i)));
        const LocalMarket& lm = locals_.back();
        if (!lm.asset_cov_spd) {
            std::ostringstream os;
            os << "sigma sigma^T is not positive definite at node " << i << " (x = " << grid.node(i).transpose() << ")";
            throw EllipticityError(os.str());
        }
        Eigen::LLT<Matrix> factor_llt(lm.factor_cov);
        if (factor_llt.info() != Eigen::Success) {
            std::ostringstream os;
            os << "Lambda Lambda^T is not positive definite at node " << i;
            throw EllipticityError(os.str());
        }
        max_trace_ = std::max(max_trace_, lm.factor_cov.trace());
    }

    const int n = grid.dims();
    grad_.assign(static_cast<std::size_t>(n), StencilRows{});
    algebraic_.assign(size, false);
    sources_.assign(size, {0, 0});

    for (std::size_t node = 0; node < size; ++node) {
        for (int d = 0; d < n; ++d) {
            std::map<std::size_t, double> entries;
            first_derivative_stencil(grid, node, d, [&](std::size_t c, double w) { entries[c] += w; });
            append_row(grad_[static_cast<std::size_t>(d)], entries);
        }

        if (boundary == BoundaryCondition::linear_extrapolation && grid.on_boundary(node)) {
            algebraic_[node] = true;
            for (int d = 0; d < n; ++d) {
                const int i = grid.coordinate_index(node, d);
                if (i == 0 || i == grid.points(d) - 1) {
                    const std::size_t s = grid.stride(d);
                    sources_[node] = (i == 0) ? std::array<std::size_t, 2>{node + s, node + 2 * s}
                                              : std::array<std::size_t, 2>{node - s, node - 2 * s};
                    break;
                }
            }
            linear_.offsets.push_back(linear_.cols.size());
            continue;
        }

        const LocalMarket& lm = locals_[node];
        std::map<std::size_t, double> entries;
        for (int d = 0; d < n; ++d) {
            const double mu = lm.factor_drift[d];
            first_derivative_stencil(grid, node, d, [&](std::size_t c, double w) { entries[c] += mu * w; });
        }
        for (int i = 0; i < n; ++i) {
            for (int j = i; j < n; ++j) {
                const double coef = (i == j) ? 0.5 * lm.factor_cov(i, i) : lm.factor_cov(i, j);
                if (coef == 0.0) continue;
                second_derivative_stencil(grid, node, i, j, [&](std::size_t c, double w) { entries[c] += coef * w; });
            }
        }
        append_row(linear_, entries);
    }

    for (std::size_t node = 0; node < size; ++node) {
        if (algebraic_[node]) order_.push_back(node);
    }
    auto faces = [&](std::size_t node) {
        int count = 0;
        for (int d = 0; d < n; ++d) {
            const int i = grid.coordinate_index(node, d);
            if (i == 0 || i == grid.points(d) - 1) ++count;
        }
        return count;
    };
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return faces(a) < faces(b); });
}

Vector SpatialOperator::gradient(const Vector& w, std::size_t node) const {
    Vector g(grid_.dims());
    for (int d = 0; d < grid_.dims(); ++d) g[d] = grad_[static_cast<std::size_t>(d)].apply(node, w);
    return g;
}

double SpatialOperator::nonlinear_part(const Vector& w, std::size_t node) const {
    const LocalMarket& lm = locals_[node];
    const Vector p = gradient(w, node);
    return -0.25 * params_.theta * p.dot(lm.factor_cov * p) - hamiltonian_K_theta(lm, p, params_);
}

// ---------------------------------------------------------------------------

Stepper::Stepper(const MarketModel& model, const ControlParams& params, const Grid& grid, const SolverConfig& cfg,
                 double dt)
    : op_(model, params, grid, cfg.boundary), cfg_(cfg), dt_(dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time step must be positive");

    if (cfg.scheme == Scheme::explicit_euler) {
        const double hmin = grid.spacing().minCoeff();
        const double bound = hmin * hmin / (2.0 * std::max(op_.max_diffusion_trace(), 1e-300));
        if (dt > bound) {
            std::ostringstream os;
            os << "explicit scheme unstable: dt = " << dt << " exceeds dx^2/(2 max tr M) = " << bound;
            throw SolverError(os.str());
        }
        return;
    }

    const std::size_t size = grid.size();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(op_.linear_rows().cols.size() + 3 * size);
    for (std::size_t row = 0; row < size; ++row) {
        const auto r = static_cast<int>(row);
        if (op_.algebraic(row)) {
            const auto& src = op_.extrapolation_sources(row);
            triplets.emplace_back(r, r, 1.0);
            triplets.emplace_back(r, static_cast<int>(src[0]), -2.0);
            triplets.emplace_back(r, static_cast<int>(src[1]), 1.0);
            continue;
        }
        triplets.emplace_back(r, r, 1.0);
        const auto& rows = op_.linear_rows();
        for (std::size_t k = rows.offsets[row]; k < rows.offsets[row + 1]; ++k) {
            triplets.emplace_back(r, static_cast<int>(rows.cols[k]), -dt * rows.weights[k]);
        }
    }
    Eigen::SparseMatrix<double> system(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
    system.setFromTriplets(triplets.begin(), triplets.end());
    system.makeCompressed();
    lu_.analyzePattern(system);
    lu_.factorize(system);
    if (lu_.info() != Eigen::Success) {
        throw SolverError("implicit diffusion system could not be factorised: " + lu_.lastErrorMessage());
    }
}

void Stepper::apply_extrapolation(Vector& w) const {
    for (std::size_t node : op_.extrapolation_order()) {
        const auto& src = op_.extrapolation_sources(node);
        w[static_cast<Eigen::Index>(node)] = 2.0 * w[static_cast<Eigen::Index>(src[0])] - w[static_cast<Eigen::Index>(src[1])];
    }
}

void Stepper::advance(const Vector& current, Vector& next) const {
    const std::size_t size = op_.grid().size();
    if (cfg_.scheme == Scheme::explicit_euler) {
        next.resize(current.size());
        for (std::size_t i = 0; i < size; ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            next[k] = op_.algebraic(i) ? 0.0 : current[k] + dt_ * op_.apply(current, i);
        }
        apply_extrapolation(next);
    } else {
        Vector rhs(current.size());
        auto fill_rhs = [&](const Vector& lagged) {
            for (std::size_t i = 0; i < size; ++i) {
                const auto k = static_cast<Eigen::Index>(i);
                rhs[k] = op_.algebraic(i) ? 0.0 : current[k] + dt_ * op_.nonlinear_part(lagged, i);
            }
        };
        fill_rhs(current);
        next = lu_.solve(rhs);
        if (lu_.info() != Eigen::Success) throw SolverError("implicit solve failed");
        bool converged = cfg_.max_newton_iters == 0;
        for (int it = 0; it < cfg_.max_newton_iters; ++it) {
            fill_rhs(next);
            Vector refined = lu_.solve(rhs);
            const double change = (refined - next).lpNorm<Eigen::Infinity>();
            const double scale = 1.0 + refined.lpNorm<Eigen::Infinity>();
            next = std::move(refined);
            if (change <= cfg_.newton_tolerance * scale) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            throw SolverError("nonlinear fixed-point iteration did not converge in " +
                              std::to_string(cfg_.max_newton_iters) + " sweeps");
        }
    }
    if (!next.allFinite()) throw SolverError("non-finite value produced by time step");
}

}  // namespace riskhjb::detail
