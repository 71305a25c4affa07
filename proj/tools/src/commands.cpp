#include "commands.hpp"

#include "riskhjb/assumptions.hpp"
#include "riskhjb/ergodic_solver.hpp"
#include "riskhjb/hjb_solver.hpp"
#include "riskhjb/oracles.hpp"
#include "riskhjb/parallel.hpp"
#include "riskhjb/serialize.hpp"
#include "riskhjb/simulation.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

namespace riskhjb::cli {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

json vec(const Vector& v) {
    json j = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

void write_json(const RunConfig& cfg, const std::string& name, const json& j) {
    write_text(cfg.output_dir / name, j.dump(2) + "\n");
}

// timings and worker counts live here so payload files stay byte-identical
void write_meta(const RunConfig& cfg, const std::string& command, Clock::time_point start, json extra = json::object()) {
    extra["command"] = command;
    extra["wall_seconds"] = std::chrono::duration<double>(Clock::now() - start).count();
    extra["workers"] = worker_count();
    write_text(cfg.output_dir / (command + ".meta.json"), extra.dump(2) + "\n");
}

json estimate_json(const CriterionEstimate& e) {
    return {{"value", e.value},         {"std_error", e.std_error}, {"n_paths", e.n_paths},
            {"horizon", e.horizon},     {"ess", e.ess},             {"low_ess", e.low_ess},
            {"mean_log_wealth", e.mean_log_wealth}};
}

json grid_json(const Grid& g) {
    return {{"lower", vec(g.lower())}, {"upper", vec(g.upper())}, {"points", g.points()}, {"spacing", vec(g.spacing())}};
}

json history_json(const std::vector<CheckpointRecord>& history) {
    json h = json::array();
    for (const auto& r : history) {
        h.push_back({{"horizon", r.horizon},
                     {"rate_mean", r.rate_mean},
                     {"rate_std", r.rate_std},
                     {"rate_min", r.rate_min},
                     {"cauchy", r.cauchy},
                     {"qbu_lhs_max", r.qbu_lhs_max}});
    }
    return h;
}

double finite_or_zero(double v) { return std::isfinite(v) ? v : 0.0; }

/// Interior max and min of u(0, .) plus its value at x.
json slice_summary(const ValueField& u, std::size_t k, const Vector& x, double margin) {
    const Grid& g = u.grid();
    double lo = INFINITY;
    double hi = -INFINITY;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!g.in_trust_region(i, margin)) continue;
        lo = std::min(lo, u.slice(k)[static_cast<Eigen::Index>(i)]);
        hi = std::max(hi, u.slice(k)[static_cast<Eigen::Index>(i)]);
    }
    json j{{"interior_min", finite_or_zero(lo)}, {"interior_max", finite_or_zero(hi)}};
    if (g.contains(x)) j["at_x0"] = u.value_at(u.times()[k], x);
    return j;
}

// ---------------------------------------------------------------------------
// strategies

struct Optimal {
    std::optional<ValueField> value;
    std::optional<ErgodicSolution> ergodic;
    std::optional<StrategyField> field;
};

Optimal solve_optimal(const RunConfig& cfg, const MarketModel& model, const ControlParams& params) {
    Optimal o;
    const Grid grid = cfg.grid();
    if (cfg.mode == "finite") {
        o.value = solve_finite_horizon(model, params, cfg.horizon, grid, cfg.solver);
        o.field = extract_optimal_strategy(*o.value, model, params);
    } else {
        o.ergodic = solve_ergodic(model, params, grid, cfg.solver, cfg.ergodic);
        o.field = stationary_strategy(*o.ergodic, model, params);
    }
    return o;
}

/// optimal | <factor>*optimal | zero | const:<h1> <h2> ...
Strategy make_strategy(const std::string& item, int assets, Optimal& opt, const RunConfig& cfg,
                       const MarketModel& model, const ControlParams& params) {
    if (item == "zero") return constant_strategy(item, Vector::Zero(assets));
    if (item.rfind("const:", 0) == 0) {
        std::istringstream in(item.substr(6));
        std::vector<double> h;
        double v = 0.0;
        while (in >> v) h.push_back(v);
        if (!in.eof() || static_cast<int>(h.size()) != assets) {
            throw ConfigError("strategy '" + item + "': expected " + std::to_string(assets) + " numbers after const:");
        }
        return constant_strategy(item, Eigen::Map<const Vector>(h.data(), assets));
    }
    double factor = 1.0;
    std::string base = item;
    if (const auto star = item.find('*'); star != std::string::npos) {
        const std::string f = item.substr(0, star);
        char* end = nullptr;
        factor = std::strtod(f.c_str(), &end);
        if (f.empty() || end != f.c_str() + f.size() || !std::isfinite(factor)) {
            throw ConfigError("strategy '" + item + "': bad scale factor");
        }
        base = item.substr(star + 1);
    }
    if (base != "optimal") {
        throw ConfigError("strategy '" + item + "': expected optimal, <factor>*optimal, zero or const:<values>");
    }
    if (!opt.field) opt = solve_optimal(cfg, model, params);
    return field_strategy(item, factor == 1.0 ? *opt.field : opt.field->scaled(factor));
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_check(const RunConfig& cfg, std::ostream& out) {
    const auto start = Clock::now();
    const MarketModel model = cfg.model();
    const ControlParams params(cfg.theta);
    const Grid grid = cfg.grid();
    const AssumptionReport rep = validate_assumptions(model, grid, cfg.pair_samples);

    json j;
    j["config"] = cfg.to_json();
    json coeffs = json::array();
    for (const auto& c : rep.coefficients) {
        coeffs.push_back({{"name", c.name}, {"lipschitz", c.lipschitz}, {"bound", c.bound}});
    }
    j["coefficients"] = coeffs;
    j["asset_ellipticity"] = rep.asset_ellipticity;
    j["factor_ellipticity"] = rep.factor_ellipticity;
    j["ellipticity_delta0"] = rep.ellipticity_delta0;
    j["min_rate"] = rep.min_rate;
    j["regularity_pass"] = rep.regularity_pass;
    j["ellipticity_pass"] = rep.ellipticity_pass;
    j["nodes_sampled"] = rep.nodes_sampled;
    j["pairs_sampled"] = rep.pairs_sampled;
    j["warnings"] = rep.warnings;

    json lyap;
    lyap["advisory"] = true;
    try {
        const LyapunovReport lr =
            check_lyapunov(model, quadratic_lyapunov(model.factors()), params, cfg.lyapunov_radii,
                           ControlBox::symmetric(model.assets(), model.noise_dim(), cfg.h_radius, cfg.omega_radius));
        json shells = json::array();
        for (const auto& s : lr.shells) {
            shells.push_back({{"radius", s.radius},
                              {"max_generator", s.max_generator},
                              {"min_value", s.min_value},
                              {"points", s.points}});
        }
        lyap["candidate"] = "squared_norm";
        lyap["shells"] = shells;
        lyap["nonnegative"] = lr.nonnegative;
        lyap["consistent"] = lr.consistent;
        lyap["declared_growth_degree"] = lr.declared_growth_degree;
    } catch (const Error& e) {
        lyap["error"] = e.what();
        lyap["consistent"] = false;
    }
    j["lyapunov"] = lyap;
    const bool pass = rep.regularity_pass && rep.ellipticity_pass;
    j["pass"] = pass;
    write_json(cfg, "check.json", j);
    write_meta(cfg, "check", start);

    out << "regularity: " << (rep.regularity_pass ? "pass" : "FAIL") << '\n';
    out << "ellipticity: " << (rep.ellipticity_pass ? "pass" : "FAIL") << " (delta0 = " << rep.ellipticity_delta0
        << ")\n";
    out << "stability (advisory): " << (lyap.value("consistent", false) ? "plausible" : "not shown") << '\n';
    for (const auto& w : rep.warnings) out << "warning: " << w << '\n';
    return pass ? ok : assumption_failure;
}

int cmd_solve(const RunConfig& cfg, std::ostream& out) {
    const auto start = Clock::now();
    const MarketModel model = cfg.model();
    const ControlParams params(cfg.theta);
    const Grid grid = cfg.grid();

    if (cfg.mode == "finite") {
        const ValueField u = solve_finite_horizon(model, params, cfg.horizon, grid, cfg.solver);
        const StrategyField h = extract_optimal_strategy(u, model, params);
        json j;
        j["config"] = cfg.to_json();
        j["mode"] = "finite";
        j["grid"] = grid_json(grid);
        j["steps"] = u.diagnostics.steps;
        j["dt"] = u.diagnostics.dt;
        j["residual_max"] = u.diagnostics.residual_max;
        j["residual_rel_max"] = u.diagnostics.residual_rel_max;
        j["residual_ok"] = u.diagnostics.residual_ok;
        j["psi_residual"] = psi_residual(u, model, params, cfg.solver.trust_margin);
        j["u0"] = slice_summary(u, 0, cfg.x0, cfg.solver.trust_margin);
        if (grid.contains(cfg.x0)) j["criterion_at_x0"] = criterion_from_value(u, 0.0, cfg.x0, cfg.v0);
        write_json(cfg, "solve.json", j);
        write_text(cfg.output_dir / "value.csv", value_field_csv(u, cfg.time_stride));
        write_text(cfg.output_dir / "strategy.csv", strategy_field_csv(h, cfg.time_stride));
        write_meta(cfg, "solve", start, {{"solver_wall_seconds", u.diagnostics.wall_seconds}});
        out << "steps " << u.diagnostics.steps << ", residual " << u.diagnostics.residual_max << '\n';
        if (j["u0"].contains("at_x0")) out << "u(0, x0) = " << j["u0"]["at_x0"].get<double>() << '\n';
        if (!u.diagnostics.residual_ok) {
            out << "warning: relative residual " << u.diagnostics.residual_rel_max << " exceeds tolerance\n";
        }
        return ok;
    }

    json j;
    j["config"] = cfg.to_json();
    j["mode"] = "ergodic";
    j["grid"] = grid_json(grid);
    try {
        const ErgodicSolution sol = solve_ergodic(model, params, grid, cfg.solver, cfg.ergodic);
        const StrategyField h = stationary_strategy(sol, model, params);
        const BoundaryGrowth growth = boundary_growth(sol);
        const QBUDiagnostic qbu = compute_qbu(model, params, sol, cfg.ergodic.qbu_probe);
        j["status"] = "converged";
        j["rho"] = sol.rho;
        j["rho_std"] = sol.rho_std;
        j["horizon"] = sol.horizon;
        j["dt"] = sol.dt;
        j["x0"] = vec(sol.x0);
        j["residual"] = sol.residual;
        j["history"] = history_json(sol.history);
        j["boundary_growth"] = {{"rays", growth.rays},
                                {"increasing", growth.increasing},
                                {"fraction", growth.fraction},
                                {"grows", growth.grows}};
        j["qbu"] = {{"c", qbu.c}, {"delta0", qbu.delta0}, {"lhs_max", qbu.lhs_max}};
        write_json(cfg, "ergodic.json", j);
        write_text(cfg.output_dir / "ergodic.csv", ergodic_csv(sol, h));
        write_text(cfg.output_dir / "checkpoints.csv", checkpoint_csv(sol.history));
        write_text(cfg.output_dir / "qbu.csv", qbu_csv(qbu, grid));
        write_meta(cfg, "solve", start);
        out << "rho = " << sol.rho << " (std " << sol.rho_std << ", horizon " << sol.horizon << ")\n";
        return ok;
    } catch (const DivergedError& e) {
        j["status"] = "diverged";
        j["message"] = e.what();
        j["history"] = history_json(e.history());
        write_json(cfg, "ergodic.json", j);
        write_text(cfg.output_dir / "checkpoints.csv", checkpoint_csv(e.history()));
        write_meta(cfg, "solve", start);
        throw;
    }
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    const auto start = Clock::now();
    const MarketModel model = cfg.model();
    const ControlParams params(cfg.theta);
    Optimal opt;
    const Strategy s = make_strategy(cfg.strategy, model.assets(), opt, cfg, model, params);
    const PathBundle b = simulate(model, s, cfg.x0, cfg.v0, cfg.horizon, cfg.sim);
    const Vector lv = b.log_wealth.col(b.log_wealth.cols() - 1);
    const double mean = lv.mean();
    const double sd = lv.size() > 1 ? std::sqrt((lv.array() - mean).square().sum() / static_cast<double>(lv.size() - 1)) : 0.0;

    json j;
    j["config"] = cfg.to_json();
    j["strategy"] = s.name;
    j["seed"] = cfg.sim.seed;
    j["n_paths"] = b.paths();
    j["steps"] = b.steps;
    j["dt"] = b.dt;
    j["horizon"] = cfg.horizon;
    j["log_wealth"] = {{"mean", mean}, {"std", sd}, {"min", lv.minCoeff()}, {"max", lv.maxCoeff()}};
    j["terminal_factor_mean"] = vec(b.factors.back().colwise().mean().transpose());
    j["criterion"] = estimate_json(estimate_criterion_finite(b, params));
    write_json(cfg, "simulate.json", j);
    if (cfg.sim.keep_paths) write_text(cfg.output_dir / "paths.csv", paths_csv(b));
    write_meta(cfg, "simulate", start);
    out << "mean log-wealth " << mean << " (std " << sd << ")\n";
    return ok;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
    const auto start = Clock::now();
    const MarketModel model = cfg.model();
    const ControlParams params(cfg.theta);
    Optimal opt;
    const Strategy s = make_strategy(cfg.strategy, model.assets(), opt, cfg, model, params);

    json j;
    j["config"] = cfg.to_json();
    j["strategy"] = s.name;
    j["seed"] = cfg.sim.seed;
    if (cfg.mode == "finite") {
        const PathBundle b = simulate(model, s, cfg.x0, cfg.v0, cfg.horizon, cfg.sim);
        const CriterionEstimate e = estimate_criterion_finite(b, params);
        j["mode"] = "finite";
        j["estimate"] = estimate_json(e);
        if (opt.value && opt.value->grid().contains(cfg.x0)) {
            j["value_function_prediction"] = criterion_from_value(*opt.value, 0.0, cfg.x0, cfg.v0);
        }
        out << "J = " << e.value << " +- " << e.std_error << '\n';
        if (e.low_ess) out << "warning: effective sample size " << e.ess << " is below 100\n";
    } else {
        const ErgodicEstimate est = estimate_criterion_ergodic(model, s, cfg.x0, cfg.v0, params, cfg.sim, cfg.horizons);
        j["mode"] = "ergodic";
        json entries = json::array();
        for (const auto& e : est.entries) entries.push_back(estimate_json(e));
        j["entries"] = entries;
        j["monotone"] = est.monotone;
        j["last_change"] = est.last_change;
        if (opt.ergodic) j["rho"] = opt.ergodic->rho;
        for (const auto& e : est.entries) out << "T = " << e.horizon << ": J/T = " << e.value << " +- " << e.std_error << '\n';
    }
    write_json(cfg, "evaluate.json", j);
    write_meta(cfg, "evaluate", start);
    return ok;
}

int cmd_compare(const RunConfig& cfg, std::ostream& out) {
    const auto start = Clock::now();
    const MarketModel model = cfg.model();
    const ControlParams params(cfg.theta);
    Optimal opt;
    std::vector<Strategy> strategies;
    for (const auto& item : cfg.strategies) {
        strategies.push_back(make_strategy(item, model.assets(), opt, cfg, model, params));
    }
    const ComparisonTable table = compare_strategies(model, strategies, cfg.x0, cfg.v0, cfg.horizon, params, cfg.sim);

    json j;
    j["config"] = cfg.to_json();
    j["seed"] = table.seed;
    j["reference"] = table.reference;
    j["alarm"] = table.alarm;
    json rows = json::array();
    for (const auto& r : table.rows) {
        rows.push_back({{"rank", r.rank},
                        {"name", r.name},
                        {"estimate", estimate_json(r.estimate)},
                        {"diff", r.diff},
                        {"joint_se", r.joint_se}});
    }
    j["rows"] = rows;
    write_json(cfg, "compare.json", j);
    write_text(cfg.output_dir / "compare.csv", comparison_csv(table));
    write_meta(cfg, "compare", start);
    for (const auto& r : table.rows) {
        out << r.rank << ". " << r.name << "  " << r.estimate.value << " +- " << r.estimate.std_error << '\n';
    }
    if (table.alarm) out << "warning: a strategy beats " << table.reference << " by more than 2 joint std errors\n";
    return ok;
}

int cmd_oracle_compare(const RunConfig& cfg, std::ostream& out) {
    const auto start = Clock::now();
    const MarketModel model = cfg.model();
    const ControlParams params(cfg.theta);
    const Grid grid = cfg.grid();
    const double margin = cfg.solver.trust_margin;

    struct Row {
        std::string quantity;
        double error;
        double tolerance;
    };
    std::vector<Row> rows;
    json j;
    j["config"] = cfg.to_json();

    if (cfg.family == "merton" || cfg.family == "constant") {
        const double tol = cfg.oracle_tolerance.value_or(1e-4);
        const Vector centre = 0.5 * (grid.lower() + grid.upper());
        const double kbar = hamiltonian_K_theta(model, centre, Vector::Zero(model.factors()), params);
        const ValueField u = solve_finite_horizon(model, params, cfg.horizon, grid, cfg.solver);
        double err = 0.0;
        for (std::size_t k = 0; k < u.times().size(); ++k) {
            const double exact = -kbar * (cfg.horizon - u.times()[k]);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                if (grid.in_trust_region(i, margin)) err = std::max(err, std::abs(u.slice(k)[static_cast<Eigen::Index>(i)] - exact));
            }
        }
        rows.push_back({"u_sup_error", err, tol});
        j["oracle"] = "constant_coefficients";
        j["rate"] = -kbar;
        if (cfg.family == "merton") {
            const MertonOracle mo =
                merton_constant_oracle(cfg.merton_a, cfg.merton_r, cfg.merton_sigma2, cfg.theta, cfg.horizon, cfg.v0);
            j["merton"] = {{"h_star", mo.h_star}, {"rho", mo.rho}, {"J", mo.J}};
            const StrategyField h = extract_optimal_strategy(u, model, params);
            double herr = 0.0;
            for (const auto& s : h.slices()) herr = std::max(herr, (s.array() - mo.h_star).abs().maxCoeff());
            rows.push_back({"h_sup_error", herr, 1e-10});
            const ErgodicSolution sol = solve_ergodic(model, params, grid, cfg.solver, cfg.ergodic);
            rows.push_back({"rho_error", std::abs(sol.rho - mo.rho), tol});
        }
    } else if (cfg.family == "linear_gaussian" || cfg.family == "ou_factor") {
        const double tol = cfg.oracle_tolerance.value_or(1e-2);
        const ValueField u = solve_finite_horizon(model, params, cfg.horizon, grid, cfg.solver);
        const std::size_t steps = std::max<std::size_t>(u.diagnostics.steps, 1);
        const std::size_t sub = std::max<std::size_t>(1, (static_cast<std::size_t>(cfg.riccati_steps) + steps - 1) / steps);
        const RiccatiSolution r = riccati_oracle(*cfg.linear, params, cfg.horizon, static_cast<int>(steps * sub));
        double err0 = 0.0;
        double err_all = 0.0;
        for (std::size_t k = 0; k < u.times().size(); ++k) {
            for (std::size_t i = 0; i < grid.size(); ++i) {
                if (!grid.in_trust_region(i, margin)) continue;
                const double e = std::abs(u.slice(k)[static_cast<Eigen::Index>(i)] - r.value(k * sub, grid.node(i)));
                err_all = std::max(err_all, e);
                if (k == 0) err0 = std::max(err0, e);
            }
        }
        rows.push_back({"u0_sup_error", err0, tol});
        rows.push_back({"u_sup_error_all_times", err_all, tol});
        j["oracle"] = "riccati";
        j["riccati_steps"] = steps * sub;
        json kmat = json::array();
        for (Eigen::Index i = 0; i < r.K.front().rows(); ++i) kmat.push_back(vec(r.K.front().row(i).transpose()));
        j["riccati_t0"] = {{"K", kmat}, {"k", vec(r.k.front())}, {"c", r.c.front()}};
    } else {
        throw ConfigError("oracle-compare: no oracle for model family '" + cfg.family + "'");
    }

    bool pass = true;
    json table = json::array();
    std::ostringstream csv;
    csv << "quantity,error,tolerance,pass\n";
    for (const auto& row : rows) {
        const bool p = row.error <= row.tolerance;
        pass = pass && p;
        table.push_back({{"quantity", row.quantity}, {"error", row.error}, {"tolerance", row.tolerance}, {"pass", p}});
        csv << row.quantity << ',' << format_number(row.error) << ',' << format_number(row.tolerance) << ','
            << (p ? "true" : "false") << '\n';
        out << row.quantity << ": " << row.error << " (tolerance " << row.tolerance << ") " << (p ? "pass" : "FAIL")
            << '\n';
    }
    j["rows"] = table;
    j["pass"] = pass;
    write_json(cfg, "oracle_compare.json", j);
    write_text(cfg.output_dir / "oracle_compare.csv", csv.str());
    write_meta(cfg, "oracle-compare", start);
    return pass ? ok : numerical_failure;
}

// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Risk-sensitive portfolio optimisation in factor models", "riskhjb"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "riskhjb 0.1.0");

    std::string config_path;
    std::vector<std::string> sets;
    std::string output;
    int workers = -1;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"check", "check coefficient regularity, ellipticity and (advisory) stability"},
        {"solve", "solve the finite-horizon or ergodic equation"},
        {"simulate", "simulate factor and wealth paths"},
        {"evaluate", "estimate the risk-sensitive criterion by Monte Carlo"},
        {"compare", "rank strategies under common random numbers"},
        {"oracle-compare", "compare the solver against a closed-form oracle"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("config", config_path, "INI configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--set", sets, "override a config key: section.key=value")->take_all();
        sub->add_option("-o,--output", output, "output directory (overrides output.directory)");
        sub->add_option("-j,--workers", workers, "worker threads (overrides run.workers)")->check(CLI::NonNegativeNumber);
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o;
        std::ostringstream e2;
        const int code = app.exit(e, o, e2);
        out << o.str();
        err << e2.str();
        return code == 0 ? ok : usage_error;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        Overrides overrides;
        for (const auto& s : sets) overrides.push_back(parse_override(s));
        if (!output.empty()) overrides.push_back({"output.directory", output});
        if (workers >= 0) overrides.push_back({"run.workers", std::to_string(workers)});
        const RunConfig cfg = load_config(config_path, overrides);

        const char* env = std::getenv("RISK_HJB_WORKERS");
        set_worker_count(env != nullptr && *env != '\0' ? 0 : cfg.workers);
        (void)worker_count();  // validates the environment variable

        if (command == "check") return cmd_check(cfg, out);
        if (command == "solve") return cmd_solve(cfg, out);
        if (command == "simulate") return cmd_simulate(cfg, out);
        if (command == "evaluate") return cmd_evaluate(cfg, out);
        if (command == "compare") return cmd_compare(cfg, out);
        return cmd_oracle_compare(cfg, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return usage_error;
    } catch (const EllipticityError& e) {
        err << "assumption failure: " << e.what() << '\n';
        return assumption_failure;
    } catch (const Error& e) {
        err << "numerical failure: " << e.what() << '\n';
        return numerical_failure;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return numerical_failure;
    }
}

}  // namespace riskhjb::cli
