#pragma once

// Monte Carlo for the factor market. Factors follow Euler-Maruyama,
// log-wealth is updated with the Ito-corrected increment
//
//   d ln V = [r + h'(a - r1) - 1/2 h' S h] dt + h' sigma dW,
//
// so wealth stays positive. Every path owns a random stream derived from
// (seed, path index): adding paths never reshuffles existing ones, and the
// result does not depend on the worker count.

#include "riskhjb/control_law.hpp"
#include "riskhjb/hjb_solver.hpp"
#include "riskhjb/market_model.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace riskhjb {

struct SimConfig {
    double dt = 1e-2;
    std::size_t n_paths = 10000;
    std::uint64_t seed = 42;
    /// Record every step instead of only t = 0, requested horizons and T.
    bool keep_paths = false;

    void validate() const;
};

/// Feedback rule (t, x) -> value written into `out`.
using FeedbackRule = std::function<void(double t, const Vector& x, Eigen::Ref<Vector> out)>;

struct Strategy {
    std::string name;
    FeedbackRule rule;
};

Strategy constant_strategy(std::string name, Vector h);
Strategy field_strategy(std::string name, StrategyField field);

/// Seed of the random stream of one path.
std::uint64_t path_seed(std::uint64_t seed, std::size_t path);

struct PathBundle {
    std::vector<double> times;        ///< recorded times, ascending, first 0
    std::vector<Matrix> factors;      ///< per recorded time: paths x n
    Matrix log_wealth;                ///< paths x recorded times (empty for factor-only runs)
    std::vector<std::uint64_t> path_seeds;
    std::size_t steps = 0;
    double dt = 0.0;

    std::size_t paths() const { return path_seeds.size(); }
    /// Column of log_wealth at the recorded time closest to t.
    Vector log_wealth_at(double t) const;
};

/// Paths of (X, ln V) under the feedback strategy. `record` lists extra
/// horizons to keep when keep_paths is off.
PathBundle simulate(const MarketModel& model, const Strategy& strategy, const Vector& x0, double v0, double horizon,
                    const SimConfig& cfg, const std::vector<double>& record = {});

/// Factor paths of dX = [mu + Lambda omega + (theta/2) Lambda sigma' h] dt + Lambda dW.
PathBundle simulate_controlled_factor(const MarketModel& model, const FeedbackRule& h_rule,
                                      const FeedbackRule& omega_rule, const Vector& x0, double horizon,
                                      const ControlParams& params, const SimConfig& cfg);

struct CriterionEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    double horizon = 0.0;
    double ess = 0.0;             ///< Kish effective sample size of the exponential weights
    bool low_ess = false;         ///< ess < 100
    double mean_log_wealth = 0.0;
};

/// (-2/theta) ln mean exp(-(theta/2) ln V(T)) with a delta-method standard error.
CriterionEstimate estimate_criterion(const Vector& log_wealth, const ControlParams& params, double horizon);
CriterionEstimate estimate_criterion_finite(const PathBundle& bundle, const ControlParams& params);

struct ErgodicEstimate {
    std::vector<CriterionEstimate> entries;  ///< J^T / T per horizon (value and std_error both divided by T)
    bool monotone = true;                    ///< successive entries move in one direction
    double last_change = 0.0;
};

/// One simulation up to the largest horizon, evaluated at each horizon.
ErgodicEstimate estimate_criterion_ergodic(const MarketModel& model, const Strategy& strategy, const Vector& x0,
                                           double v0, const ControlParams& params, const SimConfig& cfg,
                                           std::vector<double> horizons);

struct ComparisonRow {
    std::string name;
    CriterionEstimate estimate;
    double diff = 0.0;      ///< this minus the reference
    double joint_se = 0.0;  ///< standard error of diff under common random numbers
    std::size_t rank = 0;   ///< 1 = best
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;  ///< sorted by estimate, best first
    std::string reference;
    bool alarm = false;               ///< some strategy beats the reference by more than 2 joint std errors
    std::uint64_t seed = 0;
};

/// All strategies see the same random draws. The first strategy is the reference.
ComparisonTable compare_strategies(const MarketModel& model, const std::vector<Strategy>& strategies,
                                   const Vector& x0, double v0, double horizon, const ControlParams& params,
                                   const SimConfig& cfg);

struct GameAverage {
    double value = 0.0;      ///< path mean of (1/T) int c(X, h, omega) dt
    double std_error = 0.0;
    double horizon = 0.0;
};

/// Long-run average of the running cost along controlled factor paths.
GameAverage game_value_estimate(const MarketModel& model, const FeedbackRule& h_rule, const FeedbackRule& omega_rule,
                                const Vector& x0, const ControlParams& params, const SimConfig& cfg, double horizon);

}  // namespace riskhjb
