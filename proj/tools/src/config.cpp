#include "config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace riskhjb::cli {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s{
        {"model", {"family", "a", "r", "sigma2", "mu", "sigma", "lambda", "a0", "A", "b0", "B", "Sigma", "Lambda", "r0", "scale"}},
        {"grid", {"lower", "upper", "points"}},
        {"solver", {"dt", "scheme", "boundary", "max_newton_iters", "newton_tolerance", "tolerance", "trust_margin"}},
        {"ergodic", {"first_checkpoint", "max_horizon", "tol_u", "tol_rho", "x0", "qbu_probe"}},
        {"control", {"theta", "horizon", "mode", "horizons"}},
        {"simulation", {"dt", "n_paths", "seed", "x0", "v0", "keep_paths", "strategy", "strategies"}},
        {"check", {"pair_samples", "lyapunov_radii", "h_radius", "omega_radius"}},
        {"oracle", {"tolerance", "riccati_steps"}},
        {"output", {"directory", "time_stride"}},
        {"run", {"workers"}},
    };
    return s;
}

const std::map<std::string, std::set<std::string>>& family_keys() {
    static const std::map<std::string, std::set<std::string>> f{
        {"merton", {"a", "r", "sigma2"}},
        {"constant", {"a", "mu", "sigma", "lambda", "r"}},
        {"linear_gaussian", {"a0", "A", "b0", "B", "Sigma", "Lambda", "r0"}},
        {"bounded_nonlinear", {"a0", "A", "b0", "B", "Sigma", "Lambda", "r0", "scale"}},
        {"ou_factor", {}},
    };
    return f;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& field, const std::string& msg) {
    throw ConfigError(field + ": " + msg);
}

double to_double(const std::string& field, const std::string& raw) {
    const std::string s = trim(raw);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        bad(field, "expected a finite number, got '" + raw + "'");
    }
    return v;
}

long long to_int(const std::string& field, const std::string& raw) {
    const std::string s = trim(raw);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) bad(field, "expected an integer, got '" + raw + "'");
    return v;
}

std::uint64_t to_u64(const std::string& field, const std::string& raw) {
    const std::string s = trim(raw);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        bad(field, "expected a non-negative integer, got '" + raw + "'");
    }
    return v;
}

bool to_bool(const std::string& field, const std::string& raw) {
    const std::string s = trim(raw);
    if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
    if (s == "false" || s == "no" || s == "0" || s == "off") return false;
    bad(field, "expected true or false, got '" + raw + "'");
}

std::vector<std::string> tokens(const std::string& raw, const std::string& seps) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : raw) {
        if (seps.find(ch) != std::string::npos) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<double> to_list(const std::string& field, const std::string& raw) {
    std::vector<double> v;
    for (const auto& t : tokens(raw, " \t,")) v.push_back(to_double(field, t));
    if (v.empty()) bad(field, "expected at least one number");
    return v;
}

Vector to_vector(const std::string& field, const std::string& raw) {
    const auto v = to_list(field, raw);
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix to_matrix(const std::string& field, const std::string& raw) {
    std::vector<std::vector<double>> rows;
    for (const auto& r : tokens(raw, ";")) {
        if (trim(r).empty()) continue;
        rows.push_back(to_list(field, r));
    }
    if (rows.empty()) bad(field, "expected a matrix with rows separated by ';'");
    const std::size_t cols = rows.front().size();
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) bad(field, "matrix rows have different lengths");
        for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

void expect_shape(const std::string& field, const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << "expected a " << rows << "x" << cols << " matrix, got " << m.rows() << "x" << m.cols();
        bad(field, os.str());
    }
}

void expect_len(const std::string& field, const Vector& v, Eigen::Index n) {
    if (v.size() != n) bad(field, "expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
}

/// Typed access to one section.
class Section {
public:
    Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

    std::optional<std::string> get(const std::string& key) const {
        if (tree_ == nullptr) return std::nullopt;
        const auto it = tree_->find(key);
        if (it == tree_->not_found()) return std::nullopt;
        return it->second.data();
    }
    std::string field(const std::string& key) const { return name_ + "." + key; }
    std::string require(const std::string& key) const {
        auto v = get(key);
        if (!v) bad(field(key), "missing");
        return *v;
    }
    double num(const std::string& key, double fallback) const {
        auto v = get(key);
        return v ? to_double(field(key), *v) : fallback;
    }

private:
    const pt::ptree* tree_;
    std::string name_;
};

std::optional<std::string> nonempty(const std::optional<std::string>& v) {
    if (v && trim(*v).empty()) return std::nullopt;
    return v;
}

}  // namespace

std::pair<std::string, std::string> parse_override(const std::string& item) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + item + "' is not of the form section.key=value");
    const std::string path = trim(item.substr(0, eq));
    const auto dot = path.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == path.size() || path.find('.', dot + 1) != std::string::npos) {
        throw ConfigError("override '" + item + "' must name section.key");
    }
    return {path, item.substr(eq + 1)};
}

RunConfig parse_config(const std::string& text, const Overrides& overrides, const std::string& origin) {
    pt::ptree root;
    try {
        std::istringstream in(text);
        pt::ini_parser::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        std::ostringstream os;
        os << origin << ":" << e.line() << ": " << e.message();
        throw ConfigError(os.str());
    }
    for (const auto& [path, value] : overrides) {
        const auto dot = path.find('.');
        const std::string sec = path.substr(0, dot);
        const std::string key = path.substr(dot + 1);
        auto sit = root.find(sec);
        if (sit == root.not_found()) {
            root.push_back({sec, pt::ptree()});
            sit = root.find(sec);
        }
        pt::ptree& child = sit->second;
        auto it = child.find(key);
        if (it == child.not_found()) {
            child.push_back({key, pt::ptree(value)});
        } else {
            it->second.data() = value;
        }
    }

    for (const auto& [sec, body] : root) {
        const auto it = schema().find(sec);
        if (it == schema().end()) {
            if (body.empty() && !body.data().empty()) throw ConfigError(origin + ": key '" + sec + "' outside any section");
            throw ConfigError(origin + ": unknown section [" + sec + "]");
        }
        for (const auto& [key, value] : body) {
            if (!value.empty()) throw ConfigError(sec + "." + key + ": nested keys are not supported");
            if (!it->second.count(key)) throw ConfigError(sec + "." + key + ": unknown key");
        }
    }
    auto section = [&](const std::string& name) {
        const auto it = root.find(name);
        return Section(it == root.not_found() ? nullptr : &it->second, name);
    };

    RunConfig c;

    // model
    const Section model = section("model");
    c.family = trim(model.require("family"));
    const auto fam = family_keys().find(c.family);
    if (fam == family_keys().end()) {
        bad("model.family", "unknown family '" + c.family +
                                "' (expected merton, constant, linear_gaussian, ou_factor or bounded_nonlinear)");
    }
    if (const auto it = root.find("model"); it != root.not_found()) {
        for (const auto& [key, value] : it->second) {
            if (key != "family" && !fam->second.count(key)) bad("model." + key, "does not apply to family " + c.family);
        }
    }
    if (c.family == "merton") {
        c.merton_a = to_double(model.field("a"), model.require("a"));
        c.merton_r = to_double(model.field("r"), model.require("r"));
        c.merton_sigma2 = to_double(model.field("sigma2"), model.require("sigma2"));
        if (!(c.merton_sigma2 > 0.0)) bad("model.sigma2", "must be positive");
        c.constant = merton_spec(c.merton_a, c.merton_r, c.merton_sigma2);
    } else if (c.family == "constant") {
        ConstantSpec s;
        s.a = to_vector(model.field("a"), model.require("a"));
        s.mu = to_vector(model.field("mu"), model.require("mu"));
        s.sigma = to_matrix(model.field("sigma"), model.require("sigma"));
        s.lambda = to_matrix(model.field("lambda"), model.require("lambda"));
        s.r = to_double(model.field("r"), model.require("r"));
        const auto m = s.a.size();
        const auto n = s.mu.size();
        expect_shape(model.field("sigma"), s.sigma, m, m + n);
        expect_shape(model.field("lambda"), s.lambda, n, m + n);
        c.constant = s;
    } else if (c.family == "ou_factor") {
        c.linear = ou_factor_spec();
    } else {
        LinearGaussianSpec s;
        s.a0 = to_vector(model.field("a0"), model.require("a0"));
        s.A = to_matrix(model.field("A"), model.require("A"));
        s.b0 = to_vector(model.field("b0"), model.require("b0"));
        s.B = to_matrix(model.field("B"), model.require("B"));
        s.Sigma = to_matrix(model.field("Sigma"), model.require("Sigma"));
        s.Lambda = to_matrix(model.field("Lambda"), model.require("Lambda"));
        s.r0 = to_double(model.field("r0"), model.require("r0"));
        const auto m = s.a0.size();
        const auto n = s.b0.size();
        expect_shape(model.field("A"), s.A, m, n);
        expect_shape(model.field("B"), s.B, n, n);
        expect_shape(model.field("Sigma"), s.Sigma, m, m + n);
        expect_shape(model.field("Lambda"), s.Lambda, n, m + n);
        if (c.family == "linear_gaussian") {
            c.linear = s;
        } else {
            BoundedNonlinearSpec b;
            b.a0 = s.a0;
            b.A = s.A;
            b.b0 = s.b0;
            b.B = s.B;
            b.Sigma = s.Sigma;
            b.Lambda = s.Lambda;
            b.r0 = s.r0;
            b.scale = to_vector(model.field("scale"), model.require("scale"));
            expect_len(model.field("scale"), b.scale, n);
            c.bounded = b;
        }
    }
    const int n = c.factors();

    // grid
    const Section grid = section("grid");
    const bool affine_family = c.family == "linear_gaussian" || c.family == "ou_factor" || c.family == "bounded_nonlinear";
    auto broadcast = [&](const std::string& key, double fallback) {
        auto v = nonempty(grid.get(key));
        if (!v) return Vector(Vector::Constant(n, fallback));
        Vector x = to_vector(grid.field(key), *v);
        if (x.size() == 1 && n > 1) x = Vector::Constant(n, x[0]);
        expect_len(grid.field(key), x, n);
        return x;
    };
    c.grid_lower = broadcast("lower", affine_family ? -4.0 : -1.0);
    c.grid_upper = broadcast("upper", affine_family ? 4.0 : 1.0);
    if (auto v = nonempty(grid.get("points"))) {
        for (const auto& t : tokens(*v, " \t,")) {
            const long long p = to_int(grid.field("points"), t);
            if (p < 3 || p > 100000) bad(grid.field("points"), "each entry must lie in [3, 100000]");
            c.grid_points.push_back(static_cast<int>(p));
        }
        if (c.grid_points.size() == 1 && n > 1) c.grid_points.assign(static_cast<std::size_t>(n), c.grid_points[0]);
        if (static_cast<int>(c.grid_points.size()) != n) bad(grid.field("points"), "expected one entry per factor");
    } else {
        c.grid_points.assign(static_cast<std::size_t>(n), n == 1 ? 201 : 61);
    }
    try {
        (void)c.grid();
    } catch (const ConfigError& e) {
        bad("grid", e.what());
    }

    // solver
    const Section solver = section("solver");
    c.solver.dt = solver.num("dt", c.solver.dt);
    if (auto v = solver.get("scheme")) c.solver.scheme = parse_scheme(trim(*v));
    if (auto v = solver.get("boundary")) c.solver.boundary = parse_boundary(trim(*v));
    if (auto v = solver.get("max_newton_iters")) c.solver.max_newton_iters = static_cast<int>(to_int(solver.field("max_newton_iters"), *v));
    c.solver.newton_tolerance = solver.num("newton_tolerance", c.solver.newton_tolerance);
    c.solver.tolerance = solver.num("tolerance", c.solver.tolerance);
    c.solver.trust_margin = solver.num("trust_margin", c.solver.trust_margin);
    try {
        c.solver.validate();
    } catch (const ConfigError& e) {
        bad("solver", e.what());
    }

    // ergodic
    const Section erg = section("ergodic");
    c.ergodic.first_checkpoint = erg.num("first_checkpoint", c.ergodic.first_checkpoint);
    c.ergodic.max_horizon = erg.num("max_horizon", c.ergodic.max_horizon);
    c.ergodic.tol_u = erg.num("tol_u", c.ergodic.tol_u);
    c.ergodic.tol_rho = erg.num("tol_rho", c.ergodic.tol_rho);
    c.ergodic.qbu_probe = erg.num("qbu_probe", c.ergodic.qbu_probe);
    if (auto v = nonempty(erg.get("x0"))) {
        c.ergodic.x0 = to_vector(erg.field("x0"), *v);
        expect_len(erg.field("x0"), *c.ergodic.x0, n);
    }
    try {
        c.ergodic.validate();
    } catch (const ConfigError& e) {
        bad("ergodic", e.what());
    }

    // control
    const Section control = section("control");
    c.theta = control.num("theta", c.theta);
    if (!(c.theta > 0.0)) bad("control.theta", "must be positive");
    c.horizon = control.num("horizon", c.horizon);
    if (!(c.horizon >= 0.0)) bad("control.horizon", "must be >= 0");
    if (auto v = control.get("mode")) c.mode = trim(*v);
    if (c.mode != "finite" && c.mode != "ergodic") bad("control.mode", "expected finite or ergodic");
    if (auto v = nonempty(control.get("horizons"))) {
        c.horizons = to_list(control.field("horizons"), *v);
        for (double h : c.horizons) {
            if (!(h > 0.0)) bad("control.horizons", "entries must be positive");
        }
    } else {
        c.horizons = {c.horizon > 0.0 ? c.horizon : 1.0};
    }

    // simulation
    const Section sim = section("simulation");
    c.sim.dt = sim.num("dt", c.sim.dt);
    if (auto v = sim.get("n_paths")) {
        const long long p = to_int(sim.field("n_paths"), *v);
        if (p < 1) bad(sim.field("n_paths"), "must be >= 1");
        c.sim.n_paths = static_cast<std::size_t>(p);
    }
    if (auto v = sim.get("seed")) c.sim.seed = to_u64(sim.field("seed"), *v);
    if (auto v = sim.get("keep_paths")) c.sim.keep_paths = to_bool(sim.field("keep_paths"), *v);
    try {
        c.sim.validate();
    } catch (const ConfigError& e) {
        bad("simulation", e.what());
    }
    if (auto v = nonempty(sim.get("x0"))) {
        c.x0 = to_vector(sim.field("x0"), *v);
        expect_len(sim.field("x0"), c.x0, n);
    } else {
        c.x0 = Vector::Zero(n);
    }
    c.v0 = sim.num("v0", c.v0);
    if (!(c.v0 > 0.0)) bad("simulation.v0", "must be positive");
    if (auto v = sim.get("strategy")) c.strategy = trim(*v);
    if (auto v = nonempty(sim.get("strategies"))) {
        for (const auto& t : tokens(*v, ",")) {
            if (!trim(t).empty()) c.strategies.push_back(trim(t));
        }
    } else {
        c.strategies = {"optimal", "0.8*optimal", "1.2*optimal", "zero"};
    }

    // check
    const Section check = section("check");
    if (auto v = check.get("pair_samples")) {
        const long long p = to_int(check.field("pair_samples"), *v);
        if (p < 1) bad(check.field("pair_samples"), "must be >= 1");
        c.pair_samples = static_cast<int>(p);
    }
    if (auto v = nonempty(check.get("lyapunov_radii"))) {
        c.lyapunov_radii = to_list(check.field("lyapunov_radii"), *v);
    } else {
        c.lyapunov_radii = {1.0, 2.0, 4.0, 8.0};
    }
    c.h_radius = check.num("h_radius", c.h_radius);
    c.omega_radius = check.num("omega_radius", c.omega_radius);
    if (!(c.h_radius > 0.0) || !(c.omega_radius > 0.0)) bad("check", "control box radii must be positive");

    // oracle
    const Section oracle = section("oracle");
    if (auto v = oracle.get("tolerance")) {
        c.oracle_tolerance = to_double(oracle.field("tolerance"), *v);
        if (!(*c.oracle_tolerance > 0.0)) bad(oracle.field("tolerance"), "must be positive");
    }
    if (auto v = oracle.get("riccati_steps")) {
        const long long s = to_int(oracle.field("riccati_steps"), *v);
        if (s < 1) bad(oracle.field("riccati_steps"), "must be >= 1");
        c.riccati_steps = static_cast<int>(s);
    }

    // output
    const Section output = section("output");
    if (auto v = nonempty(output.get("directory"))) c.output_dir = trim(*v);
    if (auto v = output.get("time_stride")) {
        const long long s = to_int(output.field("time_stride"), *v);
        if (s < 1) bad(output.field("time_stride"), "must be >= 1");
        c.time_stride = static_cast<std::size_t>(s);
    }

    // run
    if (auto v = section("run").get("workers")) {
        const long long w = to_int("run.workers", *v);
        if (w < 0) bad("run.workers", "must be >= 0");
        c.workers = static_cast<int>(w);
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), overrides, path.string());
}

// ---------------------------------------------------------------------------

MarketModel RunConfig::model() const {
    if (constant) return make_model(*constant);
    if (linear) return make_model(*linear);
    if (bounded) return make_model(*bounded);
    throw ConfigError("model section is incomplete");
}

Grid RunConfig::grid() const { return Grid(grid_lower, grid_upper, grid_points); }

int RunConfig::factors() const {
    if (constant) return static_cast<int>(constant->mu.size());
    if (linear) return static_cast<int>(linear->b0.size());
    if (bounded) return static_cast<int>(bounded->b0.size());
    return 0;
}

int RunConfig::assets() const {
    if (constant) return static_cast<int>(constant->a.size());
    if (linear) return static_cast<int>(linear->a0.size());
    if (bounded) return static_cast<int>(bounded->a0.size());
    return 0;
}

namespace {

nlohmann::json vec(const Vector& v) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

nlohmann::json mat(const Matrix& m) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) j.push_back(vec(m.row(i).transpose()));
    return j;
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    nlohmann::json m;
    m["family"] = family;
    if (family == "merton") {
        m["a"] = merton_a;
        m["r"] = merton_r;
        m["sigma2"] = merton_sigma2;
    } else if (constant) {
        m["a"] = vec(constant->a);
        m["mu"] = vec(constant->mu);
        m["sigma"] = mat(constant->sigma);
        m["lambda"] = mat(constant->lambda);
        m["r"] = constant->r;
    } else if (linear) {
        m["a0"] = vec(linear->a0);
        m["A"] = mat(linear->A);
        m["b0"] = vec(linear->b0);
        m["B"] = mat(linear->B);
        m["Sigma"] = mat(linear->Sigma);
        m["Lambda"] = mat(linear->Lambda);
        m["r0"] = linear->r0;
    } else if (bounded) {
        m["a0"] = vec(bounded->a0);
        m["A"] = mat(bounded->A);
        m["b0"] = vec(bounded->b0);
        m["B"] = mat(bounded->B);
        m["Sigma"] = mat(bounded->Sigma);
        m["Lambda"] = mat(bounded->Lambda);
        m["r0"] = bounded->r0;
        m["scale"] = vec(bounded->scale);
    }
    j["model"] = m;
    j["grid"] = {{"lower", vec(grid_lower)}, {"upper", vec(grid_upper)}, {"points", grid_points}};
    j["solver"] = {{"dt", solver.dt},
                   {"scheme", to_string(solver.scheme)},
                   {"boundary", to_string(solver.boundary)},
                   {"max_newton_iters", solver.max_newton_iters},
                   {"newton_tolerance", solver.newton_tolerance},
                   {"tolerance", solver.tolerance},
                   {"trust_margin", solver.trust_margin}};
    j["ergodic"] = {{"first_checkpoint", ergodic.first_checkpoint},
                    {"max_horizon", ergodic.max_horizon},
                    {"tol_u", ergodic.tol_u},
                    {"tol_rho", ergodic.tol_rho},
                    {"qbu_probe", ergodic.qbu_probe}};
    if (ergodic.x0) j["ergodic"]["x0"] = vec(*ergodic.x0);
    j["control"] = {{"theta", theta}, {"horizon", horizon}, {"mode", mode}, {"horizons", horizons}};
    j["simulation"] = {{"dt", sim.dt},
                       {"n_paths", sim.n_paths},
                       {"seed", sim.seed},
                       {"keep_paths", sim.keep_paths},
                       {"x0", vec(x0)},
                       {"v0", v0},
                       {"strategy", strategy},
                       {"strategies", strategies}};
    return j;
}

}  // namespace riskhjb::cli
