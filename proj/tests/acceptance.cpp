// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "commands.hpp"

#include "riskhjb/assumptions.hpp"
#include "riskhjb/ergodic_solver.hpp"
#include "riskhjb/hjb_solver.hpp"
#include "riskhjb/oracles.hpp"
#include "riskhjb/simulation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

using namespace riskhjb;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Grid grid1(double lo, double hi, int points) { return Grid(Vector::Constant(1, lo), Vector::Constant(1, hi), {points}); }

SolverConfig solver(double dt) {
    SolverConfig c;
    c.dt = dt;
    return c;
}

// ---------------------------------------------------------------------------

Outcome merton_consistency() {
    const MarketModel m = make_model(merton_spec(0.10, 0.03, 0.04));
    const ControlParams params(2.0);
    const double h = minimizing_selector(m, Vector::Zero(1), Vector::Zero(1), params)[0];
    const double T = 1.0;
    const ValueField u = solve_finite_horizon(m, params, T, grid1(-1, 1, 101), solver(1e-3));
    const double uerr = (u.slice(0).array() - 0.060625 * T).abs().maxCoeff();
    const ErgodicSolution sol = solve_ergodic(m, params, grid1(-1, 1, 101), solver(1e-3));
    const double rerr = std::abs(sol.rho - 0.060625);
    Outcome o;
    o.pass = std::abs(h - 0.875) <= 1e-10 && uerr <= 1e-4 && rerr <= 1e-4;
    o.detail = "h*=" + fmt("%.12f", h) + " |u(0)-0.060625T|=" + fmt("%.2e", uerr) + " |rho-0.060625|=" + fmt("%.2e", rerr);
    return o;
}

double riccati_error(const ValueField& u, const LinearGaussianSpec& spec, const ControlParams& params) {
    const std::size_t steps = u.diagnostics.steps;
    const std::size_t sub = std::max<std::size_t>(1, (4000 + steps - 1) / steps);
    const RiccatiSolution r = riccati_oracle(spec, params, u.horizon(), static_cast<int>(steps * sub));
    double err = 0.0;
    for (std::size_t k = 0; k < u.times().size(); ++k) {
        for (std::size_t i = 0; i < u.grid().size(); ++i) {
            if (!u.grid().in_trust_region(i)) continue;
            err = std::max(err, std::abs(u.slice(k)[static_cast<Eigen::Index>(i)] - r.value(k * sub, u.grid().node(i))));
        }
    }
    return err;
}

struct RefinementPair {
    ValueField coarse;
    ValueField fine;
};

const RefinementPair& ou_refinement() {
    static const RefinementPair pair{
        solve_finite_horizon(make_model(ou_factor_spec()), ControlParams(2.0), 1.0, grid1(-4, 4, 401), solver(4e-3)),
        solve_finite_horizon(make_model(ou_factor_spec()), ControlParams(2.0), 1.0, grid1(-4, 4, 801), solver(1e-3))};
    return pair;
}

Outcome riccati_cross_validation() {
    const RefinementPair& p = ou_refinement();
    const double e1 = riccati_error(p.coarse, ou_factor_spec(), ControlParams(2.0));
    const double e2 = riccati_error(p.fine, ou_factor_spec(), ControlParams(2.0));
    const double ratio = e1 / e2;
    Outcome o;
    o.pass = e1 <= 1e-2 && ratio >= 3.0 && ratio <= 5.0;
    o.detail = "err(401)=" + fmt("%.3e", e1) + " err(801)=" + fmt("%.3e", e2) + " ratio=" + fmt("%.3f", ratio);
    return o;
}

Outcome monte_carlo_optimality() {
    const MarketModel m = make_model(ou_factor_spec());
    const ControlParams params(2.0);
    const ValueField u = solve_finite_horizon(m, params, 1.0, grid1(-4, 4, 401), solver(1e-3));
    const StrategyField h = extract_optimal_strategy(u, m, params);
    const std::vector<Strategy> s{field_strategy("optimal", h), field_strategy("0.8*optimal", h.scaled(0.8)),
                                  field_strategy("1.2*optimal", h.scaled(1.2)), constant_strategy("zero", Vector::Zero(1))};
    SimConfig cfg;
    cfg.n_paths = 100000;
    cfg.dt = 1e-2;
    cfg.seed = 11;
    const ComparisonTable t = compare_strategies(m, s, Vector::Zero(1), 1.0, 1.0, params, cfg);
    bool pass = t.rows.front().name == "optimal" && !t.alarm;
    std::ostringstream d;
    d << "best=" << t.rows.front().name;
    for (const auto& r : t.rows) {
        if (r.name == "optimal") continue;
        const double z = -r.diff / r.joint_se;
        if (r.name != "zero") pass = pass && z > 2.0;
        else pass = pass && r.diff < 0.0;
        d << " " << r.name << ":" << fmt("%.2f", z) << "se";
    }
    return {pass, d.str()};
}

Outcome transform_consistency() {
    const RefinementPair& p = ou_refinement();
    const ControlParams params(2.0);
    const MarketModel m = make_model(ou_factor_spec());
    const double r1 = psi_residual(p.coarse, m, params);
    const double r2 = psi_residual(p.fine, m, params);
    double trip = 0.0;
    const ValueField back = to_u(to_psi(p.coarse, params), params);
    for (std::size_t k = 0; k < back.times().size(); ++k) {
        trip = std::max(trip, (back.slice(k) - p.coarse.slice(k)).cwiseAbs().maxCoeff());
    }
    Outcome o;
    o.pass = r1 / r2 >= 2.0 && trip <= 1e-12;
    o.detail = "psi-res " + fmt("%.3e", r1) + " -> " + fmt("%.3e", r2) + " (x" + fmt("%.2f", r1 / r2) + ") round-trip=" + fmt("%.1e", trip);
    return o;
}

Outcome ergodic_limit() {
    const MarketModel m = make_model(ou_factor_spec());
    const ControlParams params(2.0);
    const ErgodicSolution sol = solve_ergodic(m, params, grid1(-4, 4, 201), solver(1e-2));
    const CheckpointRecord& last = sol.history.back();
    const StrategyField h = stationary_strategy(sol, m, params);
    SimConfig cfg;
    cfg.n_paths = 20000;
    cfg.dt = 1e-2;
    cfg.seed = 5;
    const ErgodicEstimate est =
        estimate_criterion_ergodic(m, field_strategy("stationary", h), Vector::Zero(1), 1.0, params, cfg, {32.0});
    const CriterionEstimate& e = est.entries.back();
    const double diff = std::abs(e.value - sol.rho);
    Outcome o;
    const bool flat = last.rate_std <= 1e-4 * std::abs(sol.rho);
    const bool cauchy = last.cauchy <= 1e-6;
    const bool mc = diff <= 0.05 * sol.rho && diff <= 3.0 * e.std_error;
    o.pass = flat && cauchy && mc;
    o.detail = "rho=" + fmt("%.8f", sol.rho) + " std/rho=" + fmt("%.1e", last.rate_std / sol.rho) + " cauchy=" + fmt("%.1e", last.cauchy) +
               " J/T(32)=" + fmt("%.6f", e.value) + "+-" + fmt("%.1e", e.std_error) + " (" + fmt("%.2f", 100.0 * diff / sol.rho) + "%, " +
               fmt("%.2f", diff / e.std_error) + "se)";
    return o;
}

Outcome stationarity() {
    // assets on noises 1-2, factor on noise 3; drift depends on the factor
    LinearGaussianSpec s;
    s.a0 = Vector(2);
    s.a0 << 0.08, 0.11;
    s.A = Matrix(2, 1);
    s.A << 0.03, -0.02;
    s.b0 = Vector::Zero(1);
    s.B = Matrix::Constant(1, 1, -1.0);
    s.Sigma = Matrix::Zero(2, 3);
    s.Sigma.leftCols(2) << 0.2, 0.0, 0.06, 0.25;
    s.Lambda = Matrix::Zero(1, 3);
    s.Lambda(0, 2) = 0.5;
    s.r0 = 0.03;
    const MarketModel m = make_model(s);
    const ControlParams params(2.0);
    const ValueField u = solve_finite_horizon(m, params, 1.0, grid1(-4, 4, 201), solver(1e-2));
    const StrategyField h = extract_optimal_strategy(u, m, params);
    const Matrix S = s.Sigma * s.Sigma.transpose();
    double drift = 0.0;
    double closed = 0.0;
    for (const auto& slice : h.slices()) {
        drift = std::max(drift, (slice - h.slices().front()).cwiseAbs().maxCoeff());
        for (std::size_t i = 0; i < u.grid().size(); ++i) {
            const Vector x = u.grid().node(i);
            const Vector expect = (2.0 / (params.theta + 2.0)) * S.ldlt().solve(s.a0 + s.A * x - Vector::Constant(2, s.r0));
            closed = std::max(closed, (slice.row(static_cast<Eigen::Index>(i)).transpose() - expect).cwiseAbs().maxCoeff());
        }
    }
    Outcome o;
    o.pass = drift <= 1e-12 && closed <= 1e-12;
    o.detail = "slices=" + std::to_string(h.slices().size()) + " max time variation=" + fmt("%.1e", drift) + " max closed-form gap=" + fmt("%.1e", closed);
    return o;
}

Outcome isaacs() {
    const MarketModel m = make_model(ou_factor_spec());
    const ControlParams params(2.0);
    const ControlBox box = ControlBox::symmetric(1, 2, 5.0, 5.0);
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> ux(-3.0, 3.0);
    std::uniform_real_distribution<double> up(-1.0, 1.0);
    constexpr int count = 61;
    auto axis = [](double lo, double hi, int i) { return lo + (hi - lo) * i / (count - 1); };
    bool pass = true;
    double worst_gap_ratio = 0.0;
    double worst_saddle = 0.0;
    for (int probe = 0; probe < 50; ++probe) {
        const Vector x = Vector::Constant(1, ux(rng));
        const Vector p = Vector::Constant(1, up(rng));
        const IsaacsResult r = isaacs_check(m, params, x, p, box, count);
        const double gap = std::abs(r.supinf - r.infsup);
        worst_gap_ratio = std::max(worst_gap_ratio, gap / r.resolution_bound);
        pass = pass && gap <= r.resolution_bound;

        const LocalMarket lm = LocalMarket::at(m, x);
        const ControlPoint bar = saddle_controls(lm, p, params);
        const double v = game_integrand(lm, bar, p, params);
        const double tol = 1e-12 * (1.0 + std::abs(v));
        ControlPoint c = bar;
        for (int i = 0; i < count; ++i) {
            c.h[0] = axis(box.h_lower[0], box.h_upper[0], i);
            worst_saddle = std::max(worst_saddle, v - game_integrand(lm, c, p, params));
        }
        c = bar;
        for (int i = 0; i < count; ++i) {
            for (int j = 0; j < count; ++j) {
                c.omega[0] = axis(box.omega_lower[0], box.omega_upper[0], i);
                c.omega[1] = axis(box.omega_lower[1], box.omega_upper[1], j);
                worst_saddle = std::max(worst_saddle, game_integrand(lm, c, p, params) - v);
            }
        }
        pass = pass && worst_saddle <= tol;
    }
    Outcome o;
    o.pass = pass;
    o.detail = "50 probes, max gap/bound=" + fmt("%.2e", worst_gap_ratio) + " max saddle violation=" + fmt("%.1e", worst_saddle);
    return o;
}

std::map<std::string, std::string> payload(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.find(".meta.json") != std::string::npos) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        files[name] = ss.str();
    }
    return files;
}

Outcome determinism() {
    const std::string dir = RISKHJB_CONFIG_DIR;
    const std::vector<std::vector<std::string>> runs{
        {"check", dir + "/ou_factor.ini"},
        {"solve", dir + "/ou_factor.ini", "--set", "grid.points=201", "--set", "solver.dt=0.005"},
        {"solve", dir + "/bounded.ini"},
        {"simulate", dir + "/ou_factor.ini", "--set", "simulation.n_paths=2000", "--set", "simulation.keep_paths=true", "--set", "grid.points=101"},
        {"evaluate", dir + "/bounded.ini", "--set", "simulation.n_paths=1000"},
        {"compare", dir + "/ou_factor.ini", "--set", "simulation.n_paths=5000", "--set", "grid.points=201", "--set", "solver.dt=0.005"},
        {"oracle-compare", dir + "/linear_gaussian.ini"},
    };
    const fs::path root = fs::temp_directory_path() / "riskhjb_acceptance";
    std::size_t files = 0;
    std::size_t bytes = 0;
    bool pass = true;
    std::string failed;
    int idx = 0;
    for (const auto& base : runs) {
        std::vector<std::map<std::string, std::string>> outs;
        for (const char* workers : {"1", "1", "4"}) {
            const fs::path out = root / (std::to_string(idx) + "_" + std::to_string(outs.size()));
            fs::remove_all(out);
            auto args = base;
            args.insert(args.end(), {"-o", out.string(), "-j", workers});
            std::ostringstream sink;
            const int code = cli::run(args, sink, sink);
            if (code != 0) {
                pass = false;
                failed += " " + base[0] + "(exit " + std::to_string(code) + ")";
            }
            outs.push_back(payload(out));
        }
        if (outs[0].empty() || outs[0] != outs[1] || outs[0] != outs[2]) {
            pass = false;
            failed += " " + base[0];
        }
        files += outs[0].size();
        for (const auto& [name, body] : outs[0]) bytes += body.size();
        ++idx;
    }
    fs::remove_all(root);
    Outcome o;
    o.pass = pass;
    o.detail = std::to_string(runs.size()) + " commands x {1,1,4} workers, " + std::to_string(files) + " files, " + std::to_string(bytes) +
               " bytes" + (failed.empty() ? "" : ", mismatch:" + failed);
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
        double budget_seconds;
    };
    const std::vector<Criterion> criteria{
        {"AC1 Merton consistency", merton_consistency, 30},
        {"AC2 Riccati cross-validation", riccati_cross_validation, 120},
        {"AC3 Monte Carlo optimality", monte_carlo_optimality, 120},
        {"AC4 transform consistency", transform_consistency, 0},
        {"AC5 ergodic limit agreement", ergodic_limit, 300},
        {"AC6 stationarity under orthogonal noise", stationarity, 0},
        {"AC7 saddle / Isaacs property", isaacs, 0},
        {"AC8 determinism and reproducibility", determinism, 0},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_seconds > 0.0 && secs > c.budget_seconds) {
            o.pass = false;
            o.detail += " (over the " + fmt("%.0f", c.budget_seconds) + " s budget)";
        }
        if (!o.pass) ++failures;
        std::printf("%-42s %s  %s  [%.1f s]\n", c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
