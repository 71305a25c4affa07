#pragma once

// Time stepper for  w_s = F(w),
//   F(w) = mu' grad w + 1/2 tr(M D2w) - (theta/4) grad w' M grad w - K_theta(x, grad w),
// in time-to-go s. With s = T - t this is the finite-horizon u-equation; it is
// also, verbatim, the auxiliary Cauchy problem whose long-time limit gives the
// ergodic pair. The linear part L w = mu' grad w + 1/2 tr(M D2w) is implicit,
// the nonlinear part N(w) = -(theta/4) grad w' M grad w - K_theta is lagged.

#include "riskhjb/control_law.hpp"
#include "riskhjb/hjb_solver.hpp"
#include "riskhjb/market_model.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <array>
#include <cstdint>
#include <vector>

namespace riskhjb::detail {

/// Row-compressed linear stencils, one row per node.
struct StencilRows {
    std::vector<std::size_t> offsets{0};
    std::vector<std::uint32_t> cols;
    std::vector<double> weights;

    double apply(std::size_t row, const Vector& w) const {
        double acc = 0.0;
        for (std::size_t k = offsets[row]; k < offsets[row + 1]; ++k) {
            acc += weights[k] * w[cols[k]];
        }
        return acc;
    }
};

/// Cached coefficients and stencils of F on one grid.
class SpatialOperator {
public:
    SpatialOperator(const MarketModel& model, const ControlParams& params, const Grid& grid,
                    BoundaryCondition boundary);

    Vector gradient(const Vector& w, std::size_t node) const;
    double linear_part(const Vector& w, std::size_t node) const { return linear_.apply(node, w); }
    double nonlinear_part(const Vector& w, std::size_t node) const;
    double apply(const Vector& w, std::size_t node) const { return linear_part(w, node) + nonlinear_part(w, node); }

    const LocalMarket& local(std::size_t node) const { return locals_[node]; }
    const Grid& grid() const { return grid_; }
    const ControlParams& params() const { return params_; }
    const StencilRows& linear_rows() const { return linear_; }

    /// Rows replaced by u_b - 2 u_{b+e} + u_{b+2e} = 0.
    bool algebraic(std::size_t node) const { return algebraic_[node]; }
    const std::array<std::size_t, 2>& extrapolation_sources(std::size_t node) const { return sources_[node]; }
    /// Algebraic nodes ordered so that sources are settled before use.
    const std::vector<std::size_t>& extrapolation_order() const { return order_; }

    double max_diffusion_trace() const { return max_trace_; }

private:
    Grid grid_;
    ControlParams params_;
    std::vector<LocalMarket> locals_;
    StencilRows linear_;
    std::vector<StencilRows> grad_;
    std::vector<bool> algebraic_;
    std::vector<std::array<std::size_t, 2>> sources_;
    std::vector<std::size_t> order_;
    double max_trace_ = 0.0;
};

class Stepper {
public:
    Stepper(const MarketModel& model, const ControlParams& params, const Grid& grid, const SolverConfig& cfg,
            double dt);

    /// One step of size dt in time-to-go. Throws SolverError on NaN.
    void advance(const Vector& current, Vector& next) const;

    const SpatialOperator& op() const { return op_; }
    double dt() const { return dt_; }

private:
    void apply_extrapolation(Vector& w) const;

    SpatialOperator op_;
    SolverConfig cfg_;
    double dt_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

}  // namespace riskhjb::detail
