#include "riskhjb/simulation.hpp"

#include "riskhjb/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace riskhjb {

void SimConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("simulation dt must be positive");
    if (n_paths < 1) throw ConfigError("simulation needs at least one path");
}

Strategy constant_strategy(std::string name, Vector h) {
    return Strategy{std::move(name), [h = std::move(h)](double, const Vector&, Eigen::Ref<Vector> out) {
                        if (out.size() != h.size()) throw SimulationError("constant strategy has wrong size");
                        out = h;
                    }};
}

Strategy field_strategy(std::string name, StrategyField field) {
    return Strategy{std::move(name), [f = std::move(field)](double t, const Vector& x, Eigen::Ref<Vector> out) {
                        f.evaluate_into(t, x, out);
                    }};
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum class Mode { wealth, controlled, game };

struct EngineSpec {
    Mode mode = Mode::wealth;
    const FeedbackRule* h_rule = nullptr;
    const FeedbackRule* omega_rule = nullptr;
    double theta = 1.0;
    double log_v0 = 0.0;
};

struct EngineOut {
    PathBundle bundle;
    Vector game_average;  // per path, game mode only
};

EngineOut run_engine(const MarketModel& model, const Vector& x0, double horizon, const SimConfig& cfg,
                     const std::vector<double>& record, const EngineSpec& spec) {
    cfg.validate();
    if (x0.size() != model.factors() || !x0.allFinite()) throw ConfigError("initial factor point has wrong size");
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be finite and >= 0");

    const int m = model.assets();
    const int n = model.factors();
    const int d = model.noise_dim();
    const std::size_t steps =
        horizon == 0.0 ? 0 : std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(horizon / cfg.dt - 1e-9)));
    const double dt = steps == 0 ? 0.0 : horizon / static_cast<double>(steps);
    const double sqdt = std::sqrt(dt);

    // recorded step indices
    std::vector<std::size_t> rec_steps{0};
    if (cfg.keep_paths) {
        for (std::size_t k = 1; k <= steps; ++k) rec_steps.push_back(k);
    } else {
        for (double t : record) {
            if (!(t >= 0.0) || t > horizon * (1.0 + 1e-12)) throw ConfigError("recorded horizon outside [0, T]");
            rec_steps.push_back(dt == 0.0 ? 0 : static_cast<std::size_t>(std::llround(t / dt)));
        }
        rec_steps.push_back(steps);
        std::sort(rec_steps.begin(), rec_steps.end());
        rec_steps.erase(std::unique(rec_steps.begin(), rec_steps.end()), rec_steps.end());
    }
    std::vector<long> slot(steps + 1, -1);
    for (std::size_t i = 0; i < rec_steps.size(); ++i) slot[rec_steps[i]] = static_cast<long>(i);

    const std::size_t paths = cfg.n_paths;
    EngineOut out;
    PathBundle& b = out.bundle;
    b.steps = steps;
    b.dt = dt;
    for (std::size_t k : rec_steps) b.times.push_back(steps == 0 ? 0.0 : horizon * static_cast<double>(k) / static_cast<double>(steps));
    b.factors.assign(rec_steps.size(), Matrix(static_cast<Eigen::Index>(paths), n));
    if (spec.mode == Mode::wealth) b.log_wealth.resize(static_cast<Eigen::Index>(paths), static_cast<Eigen::Index>(rec_steps.size()));
    b.path_seeds.resize(paths);
    for (std::size_t p = 0; p < paths; ++p) b.path_seeds[p] = path_seed(cfg.seed, p);
    if (spec.mode == Mode::game) out.game_average.resize(static_cast<Eigen::Index>(paths));

    const bool fixed = model.constant_loadings();
    Matrix sigma0, lambda0, cov0, cross_t0;
    double r0 = 0.0;
    if (fixed) {
        sigma0 = model.asset_vol(x0);
        lambda0 = model.factor_vol(x0);
        r0 = model.short_rate(x0);
        cov0 = sigma0 * sigma0.transpose();
        cross_t0 = lambda0 * sigma0.transpose();
    }
    const bool needs_h = spec.mode == Mode::wealth || spec.h_rule != nullptr;

    parallel_for(paths, [&](std::size_t begin, std::size_t end) {
        Vector x(n), z(d), dw(d), h = Vector::Zero(m), omega = Vector::Zero(d), drift(n), a(m), sdw(m), sh(m);
        Matrix sigma = sigma0, lambda = lambda0, cov = cov0, cross_t = cross_t0;
        double r = r0;
        for (std::size_t p = begin; p < end; ++p) {
            std::mt19937_64 rng(b.path_seeds[p]);
            std::normal_distribution<double> normal(0.0, 1.0);
            x = x0;
            double logv = spec.log_v0;
            double cost = 0.0;
            auto store = [&](std::size_t k) {
                const long s = slot[k];
                if (s < 0) return;
                b.factors[static_cast<std::size_t>(s)].row(static_cast<Eigen::Index>(p)) = x.transpose();
                if (spec.mode == Mode::wealth) b.log_wealth(static_cast<Eigen::Index>(p), s) = logv;
            };
            store(0);
            for (std::size_t k = 0; k < steps; ++k) {
                const double t = static_cast<double>(k) * dt;
                try {
                    if (!fixed) {
                        sigma = model.asset_vol(x);
                        lambda = model.factor_vol(x);
                        r = model.short_rate(x);
                        cov.noalias() = sigma * sigma.transpose();
                        cross_t.noalias() = lambda * sigma.transpose();
                    }
                    drift = model.factor_drift(x);
                    if (spec.mode != Mode::controlled || needs_h) a = model.asset_drift(x);
                    if (needs_h) (*spec.h_rule)(t, x, h);
                    if (spec.omega_rule != nullptr) (*spec.omega_rule)(t, x, omega);
                } catch (const SimulationError&) {
                    throw;
                } catch (const std::exception& e) {
                    std::ostringstream os;
                    os << "evaluation failed on path " << p << " at step " << k << ": " << e.what();
                    throw SimulationError(os.str());
                }
                if (!h.allFinite() || !omega.allFinite()) {
                    std::ostringstream os;
                    os << "strategy returned a non-finite value on path " << p << " at step " << k;
                    throw SimulationError(os.str());
                }
                for (int j = 0; j < d; ++j) z[j] = normal(rng);
                dw = sqdt * z;

                if (spec.mode == Mode::wealth) {
                    sh.noalias() = cov * h;
                    sdw.noalias() = sigma * dw;
                    logv += (r + (h.dot(a) - r * h.sum()) - 0.5 * h.dot(sh)) * dt + h.dot(sdw);
                } else {
                    if (spec.omega_rule != nullptr) drift.noalias() += lambda * omega;
                    if (spec.h_rule != nullptr) drift.noalias() += (0.5 * spec.theta) * (cross_t * h);
                    if (spec.mode == Mode::game) {
                        sh.noalias() = cov * h;
                        const double c = 0.5 * (0.5 * spec.theta + 1.0) * h.dot(sh) - omega.squaredNorm() / spec.theta -
                                         (h.dot(a) - r * h.sum()) - r;
                        cost += c * dt;
                    }
                }
                x.noalias() += dt * drift;
                x.noalias() += lambda * dw;
                if (!x.allFinite() || !std::isfinite(logv)) {
                    std::ostringstream os;
                    os << "non-finite state on path " << p << " at step " << k + 1;
                    throw SimulationError(os.str());
                }
                store(k + 1);
            }
            if (spec.mode == Mode::game) out.game_average[static_cast<Eigen::Index>(p)] = horizon > 0.0 ? cost / horizon : 0.0;
        }
    });
    return out;
}

}  // namespace

std::uint64_t path_seed(std::uint64_t seed, std::size_t path) {
    return splitmix64(splitmix64(seed) + static_cast<std::uint64_t>(path));
}

Vector PathBundle::log_wealth_at(double t) const {
    if (log_wealth.size() == 0) throw ConfigError("bundle holds no wealth paths");
    std::size_t best = 0;
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (std::abs(times[k] - t) < std::abs(times[best] - t)) best = k;
    }
    return log_wealth.col(static_cast<Eigen::Index>(best));
}

PathBundle simulate(const MarketModel& model, const Strategy& strategy, const Vector& x0, double v0, double horizon,
                    const SimConfig& cfg, const std::vector<double>& record) {
    if (!(v0 > 0.0)) throw ConfigError("initial wealth must be positive");
    if (!strategy.rule) throw ConfigError("strategy '" + strategy.name + "' has no rule");
    EngineSpec spec;
    spec.mode = Mode::wealth;
    spec.h_rule = &strategy.rule;
    spec.log_v0 = std::log(v0);
    return run_engine(model, x0, horizon, cfg, record, spec).bundle;
}

PathBundle simulate_controlled_factor(const MarketModel& model, const FeedbackRule& h_rule,
                                      const FeedbackRule& omega_rule, const Vector& x0, double horizon,
                                      const ControlParams& params, const SimConfig& cfg) {
    EngineSpec spec;
    spec.mode = Mode::controlled;
    spec.h_rule = h_rule ? &h_rule : nullptr;
    spec.omega_rule = omega_rule ? &omega_rule : nullptr;
    spec.theta = params.theta;
    return run_engine(model, x0, horizon, cfg, {}, spec).bundle;
}

// ---------------------------------------------------------------------------

namespace {

struct Weights {
    Vector e;        // exp(y - max)
    double mean = 0.0;
    double shift = 0.0;
};

Weights exponential_weights(const Vector& log_wealth, double theta) {
    Weights w;
    const Vector y = (-0.5 * theta) * log_wealth;
    w.shift = y.maxCoeff();
    w.e = (y.array() - w.shift).exp();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < w.e.size(); ++i) sum += w.e[i];
    w.mean = sum / static_cast<double>(w.e.size());
    return w;
}

double sample_sd(const Vector& v) {
    const auto n = v.size();
    if (n < 2) return 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) sum += v[i];
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) ss += (v[i] - mean) * (v[i] - mean);
    return std::sqrt(ss / static_cast<double>(n - 1));
}

}  // namespace

CriterionEstimate estimate_criterion(const Vector& log_wealth, const ControlParams& params, double horizon) {
    if (log_wealth.size() == 0) throw ConfigError("no paths to estimate from");
    if (!log_wealth.allFinite()) throw SimulationError("non-finite terminal log-wealth");
    const double theta = params.theta;
    const Weights w = exponential_weights(log_wealth, theta);
    const auto n = static_cast<double>(log_wealth.size());

    CriterionEstimate est;
    est.n_paths = static_cast<std::size_t>(log_wealth.size());
    est.horizon = horizon;
    est.value = (-2.0 / theta) * (w.shift + std::log(w.mean));
    est.std_error = (2.0 / theta) * sample_sd(w.e) / (w.mean * std::sqrt(n));
    double s1 = 0.0;
    double s2 = 0.0;
    double lw = 0.0;
    for (Eigen::Index i = 0; i < w.e.size(); ++i) {
        s1 += w.e[i];
        s2 += w.e[i] * w.e[i];
        lw += log_wealth[i];
    }
    est.ess = s1 * s1 / s2;
    est.low_ess = est.ess < 100.0;
    est.mean_log_wealth = lw / n;
    return est;
}

CriterionEstimate estimate_criterion_finite(const PathBundle& bundle, const ControlParams& params) {
    if (bundle.log_wealth.size() == 0) throw ConfigError("bundle holds no wealth paths");
    return estimate_criterion(bundle.log_wealth.col(bundle.log_wealth.cols() - 1), params, bundle.times.back());
}

ErgodicEstimate estimate_criterion_ergodic(const MarketModel& model, const Strategy& strategy, const Vector& x0,
                                           double v0, const ControlParams& params, const SimConfig& cfg,
                                           std::vector<double> horizons) {
    if (horizons.empty()) throw ConfigError("need at least one horizon");
    std::sort(horizons.begin(), horizons.end());
    if (!(horizons.front() > 0.0)) throw ConfigError("horizons must be positive");
    const PathBundle bundle = simulate(model, strategy, x0, v0, horizons.back(), cfg, horizons);
    ErgodicEstimate out;
    for (double T : horizons) {
        const Vector lv = bundle.log_wealth_at(T);
        // the recorded time may differ from T by rounding to the step grid
        std::size_t k = 0;
        for (std::size_t j = 1; j < bundle.times.size(); ++j) {
            if (std::abs(bundle.times[j] - T) < std::abs(bundle.times[k] - T)) k = j;
        }
        const double t_rec = bundle.times[k];
        CriterionEstimate est = estimate_criterion(lv, params, t_rec);
        est.value /= t_rec;
        est.std_error /= t_rec;
        out.entries.push_back(est);
    }
    int direction = 0;
    for (std::size_t i = 1; i < out.entries.size(); ++i) {
        const double step = out.entries[i].value - out.entries[i - 1].value;
        const int s = (step > 0.0) - (step < 0.0);
        if (s != 0 && direction != 0 && s != direction) out.monotone = false;
        if (s != 0) direction = s;
        out.last_change = step;
    }
    return out;
}

ComparisonTable compare_strategies(const MarketModel& model, const std::vector<Strategy>& strategies,
                                   const Vector& x0, double v0, double horizon, const ControlParams& params,
                                   const SimConfig& cfg) {
    if (strategies.empty()) throw ConfigError("no strategies to compare");
    const double theta = params.theta;
    std::vector<Vector> terminal;
    terminal.reserve(strategies.size());
    for (const auto& s : strategies) {
        const PathBundle b = simulate(model, s, x0, v0, horizon, cfg);
        terminal.push_back(b.log_wealth.col(b.log_wealth.cols() - 1));
    }
    ComparisonTable table;
    table.reference = strategies.front().name;
    table.seed = cfg.seed;
    const Weights ref = exponential_weights(terminal.front(), theta);
    const CriterionEstimate ref_est = estimate_criterion(terminal.front(), params, horizon);
    const auto n = static_cast<double>(terminal.front().size());
    for (std::size_t i = 0; i < strategies.size(); ++i) {
        ComparisonRow row;
        row.name = strategies[i].name;
        row.estimate = estimate_criterion(terminal[i], params, horizon);
        row.diff = row.estimate.value - ref_est.value;
        const Weights w = exponential_weights(terminal[i], theta);
        const Vector influence = ref.e / ref.mean - w.e / w.mean;
        row.joint_se = (2.0 / theta) * sample_sd(influence) / std::sqrt(n);
        if (i > 0 && row.diff > 2.0 * row.joint_se) table.alarm = true;
        table.rows.push_back(std::move(row));
    }
    std::stable_sort(table.rows.begin(), table.rows.end(),
                     [](const ComparisonRow& a, const ComparisonRow& b) { return a.estimate.value > b.estimate.value; });
    for (std::size_t i = 0; i < table.rows.size(); ++i) table.rows[i].rank = i + 1;
    return table;
}

GameAverage game_value_estimate(const MarketModel& model, const FeedbackRule& h_rule, const FeedbackRule& omega_rule,
                                const Vector& x0, const ControlParams& params, const SimConfig& cfg, double horizon) {
    if (!(horizon > 0.0)) throw ConfigError("game average needs a positive horizon");
    EngineSpec spec;
    spec.mode = Mode::game;
    spec.h_rule = h_rule ? &h_rule : nullptr;
    spec.omega_rule = omega_rule ? &omega_rule : nullptr;
    spec.theta = params.theta;
    const EngineOut out = run_engine(model, x0, horizon, cfg, {}, spec);
    GameAverage g;
    g.horizon = horizon;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < out.game_average.size(); ++i) sum += out.game_average[i];
    g.value = sum / static_cast<double>(out.game_average.size());
    g.std_error = sample_sd(out.game_average) / std::sqrt(static_cast<double>(out.game_average.size()));
    return g;
}

}  // namespace riskhjb
