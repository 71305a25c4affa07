#pragma once

// Run configuration: one INI file, every key optionally overridden on the
// command line with --set section.key=value.

#include "riskhjb/assumptions.hpp"
#include "riskhjb/ergodic_solver.hpp"
#include "riskhjb/hjb_solver.hpp"
#include "riskhjb/market_model.hpp"
#include "riskhjb/simulation.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace riskhjb::cli {

struct RunConfig {
    // [model]
    std::string family;  ///< merton, constant, linear_gaussian, ou_factor, bounded_nonlinear
    double merton_a = 0.0;
    double merton_r = 0.0;
    double merton_sigma2 = 0.0;
    std::optional<ConstantSpec> constant;
    std::optional<LinearGaussianSpec> linear;
    std::optional<BoundedNonlinearSpec> bounded;

    // [grid]
    Vector grid_lower;
    Vector grid_upper;
    std::vector<int> grid_points;

    // [solver], [ergodic]
    SolverConfig solver;
    ErgodicConfig ergodic;

    // [control]
    double theta = 2.0;
    double horizon = 1.0;
    std::string mode = "finite";  ///< finite or ergodic
    std::vector<double> horizons;  ///< ergodic evaluation horizons

    // [simulation]
    SimConfig sim;
    Vector x0;
    double v0 = 1.0;
    std::string strategy = "optimal";
    std::vector<std::string> strategies;

    // [check]
    int pair_samples = 2000;
    std::vector<double> lyapunov_radii;
    double h_radius = 5.0;
    double omega_radius = 5.0;

    // [oracle]
    std::optional<double> oracle_tolerance;
    int riccati_steps = 4000;

    // [output]
    std::filesystem::path output_dir = "out";
    std::size_t time_stride = 1;

    // [run]
    int workers = 0;

    MarketModel model() const;
    Grid grid() const;
    int factors() const;
    int assets() const;
    /// Resolved values, for echoing into outputs.
    nlohmann::json to_json() const;
};

using Overrides = std::vector<std::pair<std::string, std::string>>;  // "section.key", value

/// Parses INI text. Unknown sections or keys, malformed values and
/// inconsistent shapes throw ConfigError naming the offending field.
RunConfig parse_config(const std::string& text, const Overrides& overrides = {}, const std::string& origin = "config");
RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

/// "section.key=value" -> pair.
std::pair<std::string, std::string> parse_override(const std::string& item);

}  // namespace riskhjb::cli
