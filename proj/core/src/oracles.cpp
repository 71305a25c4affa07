#include "riskhjb/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace riskhjb {

MertonOracle merton_constant_oracle(double a, double r, double sigma2, double theta, double horizon, double v0) {
    if (!(sigma2 > 0.0)) throw OracleError("Merton oracle needs sigma2 > 0");
    if (!(theta > 0.0)) throw OracleError("Merton oracle needs theta > 0");
    if (!(v0 > 0.0)) throw OracleError("Merton oracle needs v0 > 0");
    MertonOracle o;
    o.h_star = 2.0 * (a - r) / ((theta + 2.0) * sigma2);
    o.rho = r + (a - r) * (a - r) / ((theta + 2.0) * sigma2);
    o.J = std::log(v0) + o.rho * horizon;
    return o;
}

double merton_criterion(double a, double r, double sigma2, double theta, double h, double horizon, double v0) {
    if (!(v0 > 0.0)) throw OracleError("Merton criterion needs v0 > 0");
    return std::log(v0) + (r + h * (a - r) - 0.25 * (theta + 2.0) * h * h * sigma2) * horizon;
}

// ---------------------------------------------------------------------------

double RiccatiSolution::value(std::size_t index, const Vector& x) const {
    return x.dot(K.at(index) * x) + k.at(index).dot(x) + c.at(index);
}

Vector RiccatiSolution::gradient(std::size_t index, const Vector& x) const {
    return (K.at(index) + K.at(index).transpose()) * x + k.at(index);
}

RiccatiRates riccati_rhs(const LinearGaussianSpec& spec, const ControlParams& params, const Matrix& K,
                         const Vector& k) {
    const double theta = params.theta;
    const Matrix M = spec.Lambda * spec.Lambda.transpose();
    const Matrix C = spec.Sigma * spec.Lambda.transpose();
    const Matrix S = (spec.Sigma * spec.Sigma.transpose()).inverse() / (theta + 2.0);
    const Vector alpha = (spec.a0.array() - spec.r0).matrix() - 0.5 * theta * C * k;
    const Matrix gamma = spec.A - theta * C * K;

    RiccatiRates out;
    out.dK = -(spec.B.transpose() * K + K * spec.B) + theta * K * M * K - gamma.transpose() * S * gamma;
    out.dk = -(2.0 * K * spec.b0 + spec.B.transpose() * k) + theta * K * M * k - 2.0 * gamma.transpose() * S * alpha;
    out.dc = -spec.b0.dot(k) + 0.25 * theta * k.dot(M * k) - (M * K).trace() - alpha.dot(S * alpha) - spec.r0;
    return out;
}

RiccatiSolution riccati_oracle(const LinearGaussianSpec& spec, const ControlParams& params, double horizon,
                               int time_steps) {
    const auto n = spec.b0.size();
    if (n < 1 || n > 2) throw OracleError("Riccati oracle supports one or two factors");
    if (time_steps < 1) throw OracleError("Riccati oracle needs at least one step");
    if (!(horizon >= 0.0)) throw OracleError("horizon must be >= 0");
    if (spec.A.rows() != spec.a0.size() || spec.A.cols() != n || spec.B.rows() != n || spec.B.cols() != n) {
        throw OracleError("linear spec has inconsistent shapes");
    }

    const auto steps = static_cast<std::size_t>(time_steps);
    const double h = horizon / static_cast<double>(steps);
    RiccatiSolution sol;
    sol.times.resize(steps + 1);
    sol.K.assign(steps + 1, Matrix::Zero(n, n));
    sol.k.assign(steps + 1, Vector::Zero(n));
    sol.c.assign(steps + 1, 0.0);
    for (std::size_t j = 0; j <= steps; ++j) sol.times[j] = horizon * static_cast<double>(j) / static_cast<double>(steps);

    Matrix K = Matrix::Zero(n, n);
    Vector k = Vector::Zero(n);
    double c = 0.0;
    // march in time-to-go s = T - t, where d/ds = -d/dt
    for (std::size_t j = steps; j-- > 0;) {
        const RiccatiRates r1 = riccati_rhs(spec, params, K, k);
        const RiccatiRates r2 = riccati_rhs(spec, params, K - 0.5 * h * r1.dK, k - 0.5 * h * r1.dk);
        const RiccatiRates r3 = riccati_rhs(spec, params, K - 0.5 * h * r2.dK, k - 0.5 * h * r2.dk);
        const RiccatiRates r4 = riccati_rhs(spec, params, K - h * r3.dK, k - h * r3.dk);
        K -= (h / 6.0) * (r1.dK + 2.0 * r2.dK + 2.0 * r3.dK + r4.dK);
        k -= (h / 6.0) * (r1.dk + 2.0 * r2.dk + 2.0 * r3.dk + r4.dk);
        c -= (h / 6.0) * (r1.dc + 2.0 * r2.dc + 2.0 * r3.dc + r4.dc);
        K = 0.5 * (K + K.transpose()).eval();
        if (!K.allFinite() || !k.allFinite() || !std::isfinite(c) || K.cwiseAbs().maxCoeff() > 1e12) {
            std::ostringstream os;
            os << "Riccati solution blows up at t = " << sol.times[j] << "; horizon too long";
            throw OracleError(os.str());
        }
        sol.K[j] = K;
        sol.k[j] = k;
        sol.c[j] = c;
    }
    return sol;
}

// ---------------------------------------------------------------------------

namespace {

struct Coefficients {
    std::vector<double> excess;             // a - r
    std::vector<std::vector<double>> cov;   // sigma sigma'
    std::vector<double> hedge;              // sigma Lambda' grad_u
    std::vector<double> lambda_grad;        // Lambda' grad_u
    double drift_grad = 0.0;                // mu' grad_u
    double r = 0.0;
    int m = 0;
    int d = 0;
};

Coefficients coefficients(const MarketModel& model, const Vector& x, const Vector& grad) {
    Coefficients c;
    c.m = model.assets();
    c.d = model.noise_dim();
    const int n = model.factors();
    if (grad.size() != n) throw OracleError("gradient has wrong dimension");
    const Vector a = model.asset_drift(x);
    const Vector mu = model.factor_drift(x);
    const Matrix sigma = model.asset_vol(x);
    const Matrix lambda = model.factor_vol(x);
    c.r = model.short_rate(x);
    c.excess.resize(static_cast<std::size_t>(c.m));
    c.cov.assign(static_cast<std::size_t>(c.m), std::vector<double>(static_cast<std::size_t>(c.m), 0.0));
    c.hedge.assign(static_cast<std::size_t>(c.m), 0.0);
    c.lambda_grad.assign(static_cast<std::size_t>(c.d), 0.0);
    for (int i = 0; i < c.m; ++i) {
        c.excess[static_cast<std::size_t>(i)] = a[i] - c.r;
        for (int j = 0; j < c.m; ++j) {
            double s = 0.0;
            for (int k = 0; k < c.d; ++k) s += sigma(i, k) * sigma(j, k);
            c.cov[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = s;
        }
    }
    for (int k = 0; k < c.d; ++k) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += lambda(l, k) * grad[l];
        c.lambda_grad[static_cast<std::size_t>(k)] = s;
    }
    for (int i = 0; i < c.m; ++i) {
        double s = 0.0;
        for (int k = 0; k < c.d; ++k) s += sigma(i, k) * c.lambda_grad[static_cast<std::size_t>(k)];
        c.hedge[static_cast<std::size_t>(i)] = s;
    }
    for (int l = 0; l < n; ++l) c.drift_grad += mu[l] * grad[l];
    return c;
}

double h_part(const Coefficients& c, const std::vector<double>& h, double theta) {
    double quad = 0.0;
    double lin = 0.0;
    double hedge = 0.0;
    for (int i = 0; i < c.m; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        for (int j = 0; j < c.m; ++j) quad += h[ii] * c.cov[ii][static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(j)];
        lin += h[ii] * c.excess[ii];
        hedge += h[ii] * c.hedge[ii];
    }
    return 0.5 * (0.5 * theta + 1.0) * quad - lin + 0.5 * theta * hedge;
}

double omega_part(const Coefficients& c, const std::vector<double>& omega, double theta) {
    double lin = 0.0;
    double sq = 0.0;
    for (int k = 0; k < c.d; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        lin += omega[kk] * c.lambda_grad[kk];
        sq += omega[kk] * omega[kk];
    }
    return lin - sq / theta;
}

// visit every point of a tensor grid over [lo, hi]
template <class F>
void for_each_point(const Vector& lo, const Vector& hi, int count, F&& f) {
    const auto dims = static_cast<std::size_t>(lo.size());
    std::vector<int> idx(dims, 0);
    std::vector<double> p(dims);
    std::size_t total = 1;
    for (std::size_t d = 0; d < dims; ++d) total *= static_cast<std::size_t>(count);
    for (std::size_t t = 0; t < total; ++t) {
        for (std::size_t d = 0; d < dims; ++d) {
            const auto e = static_cast<Eigen::Index>(d);
            p[d] = lo[e] + (hi[e] - lo[e]) * static_cast<double>(idx[d]) / static_cast<double>(count - 1);
        }
        f(p, idx);
        for (std::size_t d = 0; d < dims; ++d) {
            if (++idx[d] < count) break;
            idx[d] = 0;
        }
    }
}

Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

BruteForceMin brute_force_hamiltonian(const MarketModel& model, const Vector& x, const Vector& grad_u,
                                      const ControlParams& params, const Vector& lower, const Vector& upper,
                                      int grid_count) {
    const Coefficients c = coefficients(model, x, grad_u);
    if (lower.size() != c.m || upper.size() != c.m || (upper.array() <= lower.array()).any()) {
        throw OracleError("h box is malformed");
    }
    if (grid_count < 3) throw OracleError("grid needs at least three points per asset");

    BruteForceMin out;
    out.lower = lower;
    out.upper = upper;
    for (int attempt = 0; attempt < 2; ++attempt) {
        double best = std::numeric_limits<double>::infinity();
        std::vector<double> arg;
        bool on_face = false;
        for_each_point(out.lower, out.upper, grid_count, [&](const std::vector<double>& h, const std::vector<int>& idx) {
            const double v = h_part(c, h, params.theta) - c.r;
            if (v < best) {
                best = v;
                arg = h;
                on_face = std::any_of(idx.begin(), idx.end(), [&](int i) { return i == 0 || i == grid_count - 1; });
            }
        });
        out.min_value = best;
        out.argmin = to_vector(arg);
        if (!on_face) return out;
        if (attempt == 0) {
            const Vector centre = 0.5 * (out.lower + out.upper);
            const Vector half = out.upper - out.lower;
            out.lower = centre - half;
            out.upper = centre + half;
            out.expanded = true;
        }
    }
    throw OracleError("brute-force minimiser stays on the box boundary after expansion");
}

BruteForceSaddle brute_force_saddle(const MarketModel& model, const Vector& x, const Vector& grad_u,
                                    const ControlParams& params, const Vector& h_lower, const Vector& h_upper,
                                    const Vector& omega_lower, const Vector& omega_upper, int grid_count) {
    const Coefficients c = coefficients(model, x, grad_u);
    if (h_lower.size() != c.m || h_upper.size() != c.m || omega_lower.size() != c.d || omega_upper.size() != c.d) {
        throw OracleError("control boxes have wrong dimension");
    }
    if (grid_count < 2) throw OracleError("grid needs at least two points");
    const double theta = params.theta;

    std::vector<std::vector<double>> hs;
    std::vector<std::vector<double>> ws;
    for_each_point(h_lower, h_upper, grid_count, [&](const std::vector<double>& p, const std::vector<int>&) { hs.push_back(p); });
    for_each_point(omega_lower, omega_upper, grid_count, [&](const std::vector<double>& p, const std::vector<int>&) { ws.push_back(p); });

    if (static_cast<double>(hs.size()) * static_cast<double>(ws.size()) > 5e7) {
        throw OracleError("control grids too large for a full table");
    }
    // full table without using the separable structure
    std::vector<double> table(hs.size() * ws.size());
    for (std::size_t i = 0; i < hs.size(); ++i) {
        for (std::size_t j = 0; j < ws.size(); ++j) {
            table[i * ws.size() + j] =
                c.drift_grad + h_part(c, hs[i], theta) + omega_part(c, ws[j], theta) - c.r;
        }
    }

    BruteForceSaddle out;
    out.supinf = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < ws.size(); ++j) {
        double inner = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < hs.size(); ++i) inner = std::min(inner, table[i * ws.size() + j]);
        if (inner > out.supinf) {
            out.supinf = inner;
            out.omega = to_vector(ws[j]);
        }
    }
    out.infsup = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < hs.size(); ++i) {
        double inner = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < ws.size(); ++j) inner = std::max(inner, table[i * ws.size() + j]);
        if (inner < out.infsup) {
            out.infsup = inner;
            out.h = to_vector(hs[i]);
        }
    }
    return out;
}

}  // namespace riskhjb
