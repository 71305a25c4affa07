#include "riskhjb/assumptions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace riskhjb {

const CoefficientEstimate& AssumptionReport::coefficient(const std::string& name) const {
    for (const auto& c : coefficients) {
        if (c.name == name) return c;
    }
    throw ConfigError("no coefficient estimate named " + name);
}

namespace {

struct Snapshot {
    Vector a;
    Vector mu;
    Matrix sigma;
    Matrix lambda;
    double r;
};

Snapshot evaluate(const MarketModel& model, const Vector& x) {
    return {model.asset_drift(x), model.factor_drift(x), model.asset_vol(x), model.factor_vol(x),
            model.short_rate(x)};
}

double min_eigenvalue(const Matrix& sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace

AssumptionReport validate_assumptions(const MarketModel& model, const Grid& grid, int pair_samples,
                                      std::uint64_t seed) {
    if (pair_samples < 1) throw ConfigError("pair_samples must be at least 1");
    if (grid.dims() != model.factors()) throw ConfigError("grid dimension does not match factor count");

    AssumptionReport rep;
    rep.coefficients = {{"a", 0, 0}, {"mu", 0, 0}, {"sigma", 0, 0}, {"lambda", 0, 0}, {"r", 0, 0}};
    auto& ca = rep.coefficients[0];
    auto& cmu = rep.coefficients[1];
    auto& cs = rep.coefficients[2];
    auto& cl = rep.coefficients[3];
    auto& cr = rep.coefficients[4];

    rep.asset_ellipticity = std::numeric_limits<double>::infinity();
    rep.factor_ellipticity = std::numeric_limits<double>::infinity();
    rep.min_rate = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Snapshot s = evaluate(model, grid.node(i));
        ca.bound = std::max(ca.bound, s.a.norm());
        cmu.bound = std::max(cmu.bound, s.mu.norm());
        cs.bound = std::max(cs.bound, s.sigma.norm());
        cl.bound = std::max(cl.bound, s.lambda.norm());
        cr.bound = std::max(cr.bound, std::abs(s.r));
        rep.min_rate = std::min(rep.min_rate, s.r);
        rep.asset_ellipticity =
            std::min(rep.asset_ellipticity, min_eigenvalue(s.sigma * s.sigma.transpose()));
        rep.factor_ellipticity =
            std::min(rep.factor_ellipticity, min_eigenvalue(s.lambda * s.lambda.transpose()));
    }
    rep.nodes_sampled = grid.size();
    rep.ellipticity_delta0 = std::min(rep.asset_ellipticity, rep.factor_ellipticity);

    // Even pairs are independent uniform points (global slope), odd pairs are
    // one grid cell apart (local slope).
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int n = grid.dims();
    auto uniform_point = [&] {
        Vector x(n);
        for (int d = 0; d < n; ++d) x[d] = grid.lower()[d] + unit(rng) * (grid.upper()[d] - grid.lower()[d]);
        return x;
    };
    for (int k = 0; k < pair_samples; ++k) {
        const Vector x = uniform_point();
        Vector y;
        if (k % 2 == 0) {
            y = uniform_point();
        } else {
            Vector dir(n);
            for (int d = 0; d < n; ++d) dir[d] = gauss(rng);
            y = x + dir.normalized().cwiseProduct(grid.spacing());
        }
        const double dist = (x - y).norm();
        if (!(dist > 0.0)) continue;
        const Snapshot sx = evaluate(model, x);
        const Snapshot sy = evaluate(model, y);
        ca.lipschitz = std::max(ca.lipschitz, (sx.a - sy.a).norm() / dist);
        cmu.lipschitz = std::max(cmu.lipschitz, (sx.mu - sy.mu).norm() / dist);
        cs.lipschitz = std::max(cs.lipschitz, (sx.sigma - sy.sigma).norm() / dist);
        cl.lipschitz = std::max(cl.lipschitz, (sx.lambda - sy.lambda).norm() / dist);
        cr.lipschitz = std::max(cr.lipschitz, std::abs(sx.r - sy.r) / dist);
    }
    rep.pairs_sampled = static_cast<std::size_t>(pair_samples);

    bool finite = true;
    for (const auto& c : rep.coefficients) finite = finite && std::isfinite(c.lipschitz) && std::isfinite(c.bound);
    rep.regularity_pass = finite && rep.min_rate > 0.0;
    rep.ellipticity_pass = rep.ellipticity_delta0 > 0.0;

    if (!model.globally_bounded()) {
        rep.warnings.emplace_back(
            "coefficients grow without bound outside the grid; boundedness holds on the "
            "truncated domain only");
    }
    if (!(rep.min_rate > 0.0)) rep.warnings.emplace_back("short rate is not positive on the grid");
    if (!rep.ellipticity_pass) rep.warnings.emplace_back("diffusion is degenerate somewhere on the grid");
    return rep;
}

// ---------------------------------------------------------------------------

LyapunovCandidate quadratic_lyapunov(int factors) {
    LyapunovCandidate c;
    c.value = [](const Vector& x) { return x.squaredNorm(); };
    c.gradient = [](const Vector& x) -> Vector { return 2.0 * x; };
    c.hessian = [factors](const Vector&) -> Matrix { return 2.0 * Matrix::Identity(factors, factors); };
    c.declared_growth_degree = 1;
    return c;
}

ControlBox ControlBox::symmetric(int assets, int noise_dim, double h_radius, double omega_radius) {
    if (!(h_radius >= 0.0) || !(omega_radius >= 0.0)) throw ConfigError("control box radius must be >= 0");
    return {Vector::Constant(assets, -h_radius), Vector::Constant(assets, h_radius),
            Vector::Constant(noise_dim, -omega_radius), Vector::Constant(noise_dim, omega_radius)};
}

void ControlBox::validate(int assets, int noise_dim) const {
    if (h_lower.size() != assets || h_upper.size() != assets || omega_lower.size() != noise_dim ||
        omega_upper.size() != noise_dim) {
        throw ConfigError("control box has wrong dimensions");
    }
    if (!h_lower.allFinite() || !h_upper.allFinite() || !omega_lower.allFinite() || !omega_upper.allFinite()) {
        throw ConfigError("control box must be bounded");
    }
    if ((h_lower.array() > h_upper.array()).any() || (omega_lower.array() > omega_upper.array()).any()) {
        throw ConfigError("control box lower corner exceeds upper corner");
    }
}

namespace {

std::vector<Vector> shell_directions(int n, int count) {
    std::vector<Vector> dirs;
    if (n == 1) {
        dirs.push_back(Vector::Constant(1, 1.0));
        dirs.push_back(Vector::Constant(1, -1.0));
        return dirs;
    }
    if (n == 2) {
        for (int k = 0; k < count; ++k) {
            const double phi = 2.0 * std::numbers::pi * k / count;
            Vector d(2);
            d << std::cos(phi), std::sin(phi);
            dirs.push_back(d);
        }
        return dirs;
    }
    for (int d = 0; d < n; ++d) {
        dirs.push_back(Vector::Unit(n, d));
        dirs.push_back(-Vector::Unit(n, d));
    }
    std::mt19937_64 rng(0xd1ec);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int k = 0; k < count; ++k) {
        Vector d(n);
        for (int i = 0; i < n; ++i) d[i] = gauss(rng);
        dirs.push_back(d.normalized());
    }
    return dirs;
}

}  // namespace

LyapunovReport check_lyapunov(const MarketModel& model, const LyapunovCandidate& cand,
                              const ControlParams& params, const std::vector<double>& radii,
                              const ControlBox& box, int directions) {
    if (radii.empty()) throw ConfigError("check_lyapunov needs at least one radius");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] > 0.0) || (i > 0 && !(radii[i] > radii[i - 1]))) {
            throw ConfigError("check_lyapunov radii must be positive and strictly ascending");
        }
    }
    if (!cand.value || !cand.gradient || !cand.hessian) throw ConfigError("Lyapunov candidate is incomplete");
    box.validate(model.assets(), model.noise_dim());

    LyapunovReport rep;
    rep.declared_growth_degree = cand.declared_growth_degree;
    const Vector h_mid = 0.5 * (box.h_lower + box.h_upper);
    const Vector h_half = 0.5 * (box.h_upper - box.h_lower);
    const Vector w_mid = 0.5 * (box.omega_lower + box.omega_upper);
    const Vector w_half = 0.5 * (box.omega_upper - box.omega_lower);
    const auto dirs = shell_directions(model.factors(), std::max(directions, 4));

    for (double radius : radii) {
        LyapunovShell shell;
        shell.radius = radius;
        shell.max_generator = -std::numeric_limits<double>::infinity();
        shell.min_value = std::numeric_limits<double>::infinity();
        for (const Vector& dir : dirs) {
            const Vector x = radius * dir;
            const LocalMarket local = LocalMarket::at(model, x);
            const Vector grad = cand.gradient(x);
            const Matrix hess = cand.hessian(x);
            const GeneratorCoefficients gc = generator_coefficients(local, {h_mid, w_mid}, params);
            const double centre = gc.drift.dot(grad) + 0.5 * (gc.diffusion.cwiseProduct(hess)).sum();
            const Vector dh = params.hedge_coupling() * (local.cross * grad);
            const Vector dw = local.lambda.transpose() * grad;
            const double spread = dh.cwiseAbs().dot(h_half) + dw.cwiseAbs().dot(w_half);
            shell.max_generator = std::max(shell.max_generator, centre + spread);
            const double v = cand.value(x);
            shell.min_value = std::min(shell.min_value, v);
            if (v < 0.0) rep.nonnegative = false;
            ++shell.points;
        }
        rep.shells.push_back(shell);
    }

    std::size_t first_negative = rep.shells.size();
    for (std::size_t i = 0; i < rep.shells.size(); ++i) {
        if (rep.shells[i].max_generator < 0.0) {
            first_negative = i;
            break;
        }
    }
    bool consistent = rep.nonnegative && first_negative < rep.shells.size();
    for (std::size_t i = first_negative + 1; consistent && i < rep.shells.size(); ++i) {
        consistent = rep.shells[i].max_generator < 0.0 &&
                     rep.shells[i].max_generator < rep.shells[i - 1].max_generator;
    }
    rep.consistent = consistent;
    return rep;
}

}  // namespace riskhjb
