#include "riskhjb/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace riskhjb {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";  // folds -0
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw ConfigError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw ConfigError("write failed for " + path.string());
}

namespace {

void coord_header(std::ostringstream& os, int dims) {
    for (int d = 0; d < dims; ++d) os << ",x" << d + 1;
}

void coords(std::ostringstream& os, const Vector& x) {
    for (Eigen::Index d = 0; d < x.size(); ++d) os << ',' << format_number(x[d]);
}

// RFC 4180 quoting for free-text fields
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

std::vector<std::size_t> strided(std::size_t count, std::size_t stride) {
    if (stride == 0) stride = 1;
    std::vector<std::size_t> ks;
    for (std::size_t k = 0; k < count; k += stride) ks.push_back(k);
    if (ks.empty() || ks.back() != count - 1) ks.push_back(count - 1);
    return ks;
}

}  // namespace

std::string value_field_csv(const ValueField& field, std::size_t time_stride) {
    const Grid& g = field.grid();
    std::ostringstream os;
    os << 't';
    coord_header(os, g.dims());
    os << ",value\n";
    for (std::size_t k : strided(field.times().size(), time_stride)) {
        const std::string t = format_number(field.times()[k]);
        const Vector& s = field.slice(k);
        for (std::size_t i = 0; i < g.size(); ++i) {
            os << t;
            coords(os, g.node(i));
            os << ',' << format_number(s[static_cast<Eigen::Index>(i)]) << '\n';
        }
    }
    return os.str();
}

std::string strategy_field_csv(const StrategyField& field, std::size_t time_stride) {
    const Grid& g = field.grid();
    std::ostringstream os;
    os << 't';
    coord_header(os, g.dims());
    for (int j = 0; j < field.assets(); ++j) os << ",h" << j + 1;
    os << '\n';
    for (std::size_t k : strided(field.times().size(), time_stride)) {
        const std::string t = format_number(field.times()[k]);
        const Matrix& s = field.slices()[k];
        for (std::size_t i = 0; i < g.size(); ++i) {
            os << t;
            coords(os, g.node(i));
            for (Eigen::Index j = 0; j < s.cols(); ++j) os << ',' << format_number(s(static_cast<Eigen::Index>(i), j));
            os << '\n';
        }
    }
    return os.str();
}

std::string ergodic_csv(const ErgodicSolution& sol, const StrategyField& strategy) {
    const Grid& g = sol.grid;
    std::ostringstream os;
    os << "x1";
    for (int d = 1; d < g.dims(); ++d) os << ",x" << d + 1;
    os << ",u_hat,rate";
    for (int j = 0; j < strategy.assets(); ++j) os << ",h" << j + 1;
    os << '\n';
    const Matrix& h = strategy.slices().front();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vector x = g.node(i);
        for (Eigen::Index d = 0; d < x.size(); ++d) os << (d ? "," : "") << format_number(x[d]);
        const auto e = static_cast<Eigen::Index>(i);
        os << ',' << format_number(sol.u_hat[e]) << ',' << format_number(sol.rate[e]);
        for (Eigen::Index j = 0; j < h.cols(); ++j) os << ',' << format_number(h(e, j));
        os << '\n';
    }
    return os.str();
}

std::string checkpoint_csv(const std::vector<CheckpointRecord>& history) {
    std::ostringstream os;
    os << "horizon,rate_mean,rate_std,rate_min,cauchy,qbu_lhs_max\n";
    for (const auto& r : history) {
        os << format_number(r.horizon) << ',' << format_number(r.rate_mean) << ',' << format_number(r.rate_std) << ','
           << format_number(r.rate_min) << ',' << format_number(r.cauchy) << ',' << format_number(r.qbu_lhs_max) << '\n';
    }
    return os.str();
}

std::string qbu_csv(const QBUDiagnostic& diag, const Grid& g) {
    const int n = g.dims();
    std::ostringstream os;
    os << "x1";
    for (int d = 1; d < n; ++d) os << ",x" << d + 1;
    os << ",U";
    for (int d = 0; d < n; ++d) os << ",B" << d + 1;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) os << ",Q" << i + 1 << j + 1;
    }
    os << ",lhs\n";
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Vector x = g.node(k);
        const auto e = static_cast<Eigen::Index>(k);
        for (Eigen::Index d = 0; d < x.size(); ++d) os << (d ? "," : "") << format_number(x[d]);
        os << ',' << format_number(diag.U[e]);
        for (int d = 0; d < n; ++d) os << ',' << format_number(diag.B(e, d));
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) os << ',' << format_number(diag.Q[k](i, j));
        }
        os << ',' << format_number(diag.lhs[e]) << '\n';
    }
    return os.str();
}

std::string comparison_csv(const ComparisonTable& table) {
    std::ostringstream os;
    os << "rank,name,value,std_error,diff,joint_se,ess,n_paths,horizon\n";
    for (const auto& r : table.rows) {
        os << r.rank << ',' << csv_field(r.name) << ',' << format_number(r.estimate.value) << ','
           << format_number(r.estimate.std_error) << ',' << format_number(r.diff) << ',' << format_number(r.joint_se)
           << ',' << format_number(r.estimate.ess) << ',' << r.estimate.n_paths << ','
           << format_number(r.estimate.horizon) << '\n';
    }
    return os.str();
}

std::string paths_csv(const PathBundle& bundle) {
    std::ostringstream os;
    const auto n = bundle.factors.empty() ? 0 : bundle.factors.front().cols();
    os << "t,path";
    coord_header(os, static_cast<int>(n));
    const bool wealth = bundle.log_wealth.size() != 0;
    if (wealth) os << ",log_wealth";
    os << '\n';
    for (std::size_t k = 0; k < bundle.times.size(); ++k) {
        const std::string t = format_number(bundle.times[k]);
        for (std::size_t p = 0; p < bundle.paths(); ++p) {
            const auto e = static_cast<Eigen::Index>(p);
            os << t << ',' << p;
            for (Eigen::Index d = 0; d < n; ++d) os << ',' << format_number(bundle.factors[k](e, d));
            if (wealth) os << ',' << format_number(bundle.log_wealth(e, static_cast<Eigen::Index>(k)));
            os << '\n';
        }
    }
    return os.str();
}

}  // namespace riskhjb
