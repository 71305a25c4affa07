#include "riskhjb/hjb_solver.hpp"

#include "riskhjb/finite_difference.hpp"
#include "stepper.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace riskhjb {

std::string to_string(Scheme s) {
    return s == Scheme::semi_implicit ? "semi_implicit" : "explicit";
}

std::string to_string(BoundaryCondition b) {
    return b == BoundaryCondition::linear_extrapolation ? "linear_extrapolation" : "zero_second_derivative";
}

Scheme parse_scheme(const std::string& s) {
    if (s == "semi_implicit") return Scheme::semi_implicit;
    if (s == "explicit") return Scheme::explicit_euler;
    throw ConfigError("unknown scheme '" + s + "' (expected semi_implicit or explicit)");
}

BoundaryCondition parse_boundary(const std::string& s) {
    if (s == "linear_extrapolation") return BoundaryCondition::linear_extrapolation;
    if (s == "zero_second_derivative") return BoundaryCondition::zero_second_derivative;
    throw ConfigError("unknown boundary '" + s + "' (expected linear_extrapolation or zero_second_derivative)");
}

void SolverConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("solver dt must be positive");
    if (max_newton_iters < 0) throw ConfigError("max_newton_iters must be >= 0");
    if (!(newton_tolerance > 0.0)) throw ConfigError("newton_tolerance must be positive");
    if (!(tolerance > 0.0)) throw ConfigError("solver tolerance must be positive");
    if (!(trust_margin >= 0.0 && trust_margin < 0.5)) throw ConfigError("trust_margin must lie in [0, 0.5)");
}

// ---------------------------------------------------------------------------

ValueField::ValueField(Grid grid, std::vector<double> times, std::vector<Vector> slices, FieldKind kind)
    : grid_(std::move(grid)), times_(std::move(times)), slices_(std::move(slices)), kind_(kind) {
    if (times_.empty() || times_.size() != slices_.size()) {
        throw ConfigError("value field needs one slice per time");
    }
    for (std::size_t k = 1; k < times_.size(); ++k) {
        if (!(times_[k] > times_[k - 1])) throw ConfigError("value field times must be ascending");
    }
    for (const auto& s : slices_) {
        if (s.size() != static_cast<Eigen::Index>(grid_.size())) throw ConfigError("slice size does not match grid");
    }
}

Vector ValueField::gradient(std::size_t time_index, std::size_t node) const {
    return nodal_gradient(grid_, slices_.at(time_index), node);
}

double ValueField::value_at(double t, const Vector& x) const {
    const double span = std::max(1.0, std::abs(times_.back()));
    if (!std::isfinite(t) || t < times_.front() - 1e-12 * span || t > times_.back() + 1e-12 * span) {
        std::ostringstream os;
        os << "time " << t << " outside field support [" << times_.front() << ", " << times_.back() << "]";
        throw InterpolationError(os.str());
    }
    if (!grid_.contains(x)) throw InterpolationError("point outside the grid box");
    if (times_.size() == 1) return interpolate(grid_, slices_.front(), x);
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - times_.begin());
    hi = std::clamp<std::size_t>(hi, 1, times_.size() - 1);
    const std::size_t lo = hi - 1;
    const double w = std::clamp((t - times_[lo]) / (times_[hi] - times_[lo]), 0.0, 1.0);
    const double v0 = interpolate(grid_, slices_[lo], x);
    if (w == 0.0) return v0;
    return (1.0 - w) * v0 + w * interpolate(grid_, slices_[hi], x);
}

// ---------------------------------------------------------------------------

StrategyField::StrategyField(Grid grid, std::vector<double> times, std::vector<Matrix> slices)
    : grid_(std::move(grid)), times_(std::move(times)), slices_(std::move(slices)) {
    if (times_.empty() || times_.size() != slices_.size()) throw ConfigError("strategy field needs one slice per time");
    for (const auto& s : slices_) {
        if (s.rows() != static_cast<Eigen::Index>(grid_.size()) || s.cols() != slices_.front().cols()) {
            throw ConfigError("strategy slice has wrong shape");
        }
    }
    if (grid_.dims() > 4) throw ConfigError("strategy fields support at most four factors");
}

namespace {

struct Corners {
    std::array<std::size_t, 16> index{};
    std::array<double, 16> weight{};
    int count = 0;
};

Corners corner_weights(const Grid& grid, const Vector& x) {
    const int n = grid.dims();
    std::size_t base = 0;
    std::array<double, 4> frac{};
    for (int d = 0; d < n; ++d) {
        const double pos = std::clamp((x[d] - grid.lower()[d]) / grid.spacing()[d], 0.0,
                                      static_cast<double>(grid.points(d) - 1));
        int i = static_cast<int>(pos);
        if (i >= grid.points(d) - 1) i = grid.points(d) - 2;
        frac[static_cast<std::size_t>(d)] = pos - i;
        base += static_cast<std::size_t>(i) * grid.stride(d);
    }
    Corners c;
    for (unsigned corner = 0; corner < (1u << n); ++corner) {
        double w = 1.0;
        std::size_t idx = base;
        for (int d = 0; d < n; ++d) {
            const double f = frac[static_cast<std::size_t>(d)];
            if (corner & (1u << d)) {
                w *= f;
                idx += grid.stride(d);
            } else {
                w *= 1.0 - f;
            }
        }
        if (w == 0.0) continue;
        c.index[static_cast<std::size_t>(c.count)] = idx;
        c.weight[static_cast<std::size_t>(c.count)] = w;
        ++c.count;
    }
    return c;
}

}  // namespace

Vector StrategyField::evaluate(double t, const Vector& x) const {
    Vector h(assets());
    evaluate_into(t, x, h);
    return h;
}

void StrategyField::evaluate_into(double t, const Vector& x, Eigen::Ref<Vector> out) const {
    if (x.size() != grid_.dims()) throw InterpolationError("query point has wrong dimension");
    if (out.size() != assets()) throw InterpolationError("output has wrong size");
    const Corners c = corner_weights(grid_, x);
    auto spatial = [&](const Matrix& slice, double scale) {
        for (int k = 0; k < c.count; ++k) {
            out += (scale * c.weight[static_cast<std::size_t>(k)]) *
                   slice.row(static_cast<Eigen::Index>(c.index[static_cast<std::size_t>(k)])).transpose();
        }
    };
    out.setZero();
    if (times_.size() == 1 || t <= times_.front()) return spatial(slices_.front(), 1.0);
    if (t >= times_.back()) return spatial(slices_.back(), 1.0);
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
    spatial(slices_[lo], 1.0 - w);
    if (w != 0.0) spatial(slices_[hi], w);
}

StrategyField StrategyField::scaled(double factor) const {
    std::vector<Matrix> s;
    s.reserve(slices_.size());
    for (const auto& m : slices_) s.push_back(factor * m);
    return StrategyField(grid_, times_, std::move(s));
}

// ---------------------------------------------------------------------------

ValueField solve_finite_horizon(const MarketModel& model, const ControlParams& params, double horizon,
                                const Grid& grid, const SolverConfig& cfg) {
    cfg.validate();
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be a finite value >= 0");
    const auto start = std::chrono::steady_clock::now();

    const std::size_t steps =
        horizon == 0.0 ? 0 : std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(horizon / cfg.dt - 1e-9)));
    const double dt = steps == 0 ? 0.0 : horizon / static_cast<double>(steps);

    std::vector<double> times(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) times[k] = horizon * static_cast<double>(k) / static_cast<double>(std::max<std::size_t>(steps, 1));
    times.back() = horizon;

    std::vector<Vector> slices(steps + 1, Vector::Zero(static_cast<Eigen::Index>(grid.size())));
    if (steps > 0) {
        const detail::Stepper stepper(model, params, grid, cfg, dt);
        Vector w = Vector::Zero(static_cast<Eigen::Index>(grid.size()));
        Vector next;
        for (std::size_t j = 1; j <= steps; ++j) {
            try {
                stepper.advance(w, next);
            } catch (const SolverError& e) {
                std::ostringstream os;
                os << e.what() << " (step " << j << " of " << steps << ", t = " << horizon - j * dt << ")";
                throw SolverError(os.str());
            }
            w.swap(next);
            slices[steps - j] = w;
        }
    } else {
        // still validate the coefficients on the grid
        detail::SpatialOperator check(model, params, grid, cfg.boundary);
        (void)check;
    }

    ValueField field(grid, std::move(times), std::move(slices), FieldKind::value);
    field.diagnostics.steps = steps;
    field.diagnostics.dt = dt;
    const ResidualReport res = value_residual(field, model, params, cfg.trust_margin);
    field.diagnostics.residual_max = res.max_abs;
    field.diagnostics.residual_rel_max = res.max_rel;
    field.diagnostics.residual_ok = res.max_rel <= cfg.tolerance;
    field.diagnostics.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return field;
}

// ---------------------------------------------------------------------------

ValueField to_psi(const ValueField& u, const ControlParams& params) {
    std::vector<Vector> out;
    out.reserve(u.slices().size());
    for (const auto& s : u.slices()) out.push_back((-0.5 * params.theta * s.array()).exp().matrix());
    return ValueField(u.grid(), u.times(), std::move(out), FieldKind::psi);
}

ValueField to_phi(const ValueField& u, const ControlParams& params, double wealth) {
    if (!(wealth > 0.0)) throw ConfigError("wealth must be positive");
    const double log_v = std::log(wealth);
    std::vector<Vector> out;
    out.reserve(u.slices().size());
    for (const auto& s : u.slices()) out.push_back((-0.5 * params.theta * (s.array() + log_v)).exp().matrix());
    return ValueField(u.grid(), u.times(), std::move(out), FieldKind::phi);
}

ValueField to_u(const ValueField& psi, const ControlParams& params) {
    std::vector<Vector> out;
    out.reserve(psi.slices().size());
    for (const auto& s : psi.slices()) {
        if ((s.array() <= 0.0).any()) throw ConfigError("psi must be positive");
        out.push_back((-2.0 / params.theta) * s.array().log().matrix());
    }
    return ValueField(psi.grid(), psi.times(), std::move(out), FieldKind::value);
}

ResidualReport value_residual(const ValueField& u, const MarketModel& model, const ControlParams& params,
                              double trust_margin) {
    ResidualReport rep;
    const auto& times = u.times();
    if (times.size() < 3) return rep;
    const detail::SpatialOperator op(model, params, u.grid(), BoundaryCondition::zero_second_derivative);
    for (std::size_t k = 1; k + 1 < times.size(); ++k) {
        const Vector& w = u.slice(k);
        const double dt2 = times[k + 1] - times[k - 1];
        for (std::size_t node = 0; node < u.grid().size(); ++node) {
            if (!u.grid().in_trust_region(node, trust_margin)) continue;
            const auto i = static_cast<Eigen::Index>(node);
            const double ut = (u.slice(k + 1)[i] - u.slice(k - 1)[i]) / dt2;
            const double r = std::abs(ut + op.apply(w, node));
            rep.max_abs = std::max(rep.max_abs, r);
            rep.max_rel = std::max(rep.max_rel, r / (1.0 + std::abs(w[i])));
        }
    }
    return rep;
}

double psi_residual(const ValueField& u, const MarketModel& model, const ControlParams& params, double trust_margin) {
    const ValueField psi = to_psi(u, params);
    const auto& times = psi.times();
    if (times.size() < 3) return 0.0;
    const Grid& grid = psi.grid();
    const detail::SpatialOperator op(model, params, grid, BoundaryCondition::zero_second_derivative);
    const double theta = params.theta;
    double worst = 0.0;
    for (std::size_t k = 1; k + 1 < times.size(); ++k) {
        const Vector& w = psi.slice(k);
        const double dt2 = times[k + 1] - times[k - 1];
        for (std::size_t node = 0; node < grid.size(); ++node) {
            if (!grid.in_trust_region(node, trust_margin)) continue;
            const auto i = static_cast<Eigen::Index>(node);
            const LocalMarket& lm = op.local(node);
            const double value = w[i];
            const Vector grad = op.gradient(w, node);
            // inf over h of the bracket, closed form of a convex quadratic in h
            const Vector lin = value * lm.excess + lm.cross * grad;
            const double inf = -lin.dot(lm.asset_cov_llt.solve(lin)) / ((theta + 2.0) * value) - lm.rate * value;
            const double hterm = 0.5 * theta * inf;
            const double psi_t = (psi.slice(k + 1)[i] - psi.slice(k - 1)[i]) / dt2;
            worst = std::max(worst, std::abs(psi_t + op.linear_part(w, node) + hterm));
        }
    }
    return worst;
}

StrategyField extract_optimal_strategy(const ValueField& u, const MarketModel& model, const ControlParams& params) {
    const Grid& grid = u.grid();
    std::vector<LocalMarket> locals;
    locals.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) locals.push_back(LocalMarket::at(model, grid.node(i)));
    std::vector<Matrix> slices;
    slices.reserve(u.slices().size());
    for (std::size_t k = 0; k < u.slices().size(); ++k) {
        Matrix h(static_cast<Eigen::Index>(grid.size()), model.assets());
        for (std::size_t node = 0; node < grid.size(); ++node) {
            h.row(static_cast<Eigen::Index>(node)) =
                minimizing_selector(locals[node], u.gradient(k, node), params).transpose();
        }
        slices.push_back(std::move(h));
    }
    return StrategyField(grid, u.times(), std::move(slices));
}

double criterion_from_value(const ValueField& u, double t, const Vector& x, double wealth) {
    if (!(wealth > 0.0)) throw ConfigError("wealth must be positive");
    return std::log(wealth) + u.value_at(t, x);
}

}  // namespace riskhjb
