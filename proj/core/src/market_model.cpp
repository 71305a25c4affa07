#include "riskhjb/market_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace riskhjb {

namespace {

std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
    std::ostringstream os;
    os << rows << "x" << cols;
    return os.str();
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& value, const char* what) {
    if (!value.allFinite()) {
        throw ModelError(std::string("non-finite value from coefficient ") + what);
    }
}

}  // namespace

MarketModel::MarketModel(int assets, int factors, VectorFn asset_drift, VectorFn factor_drift,
                         MatrixFn asset_vol, MatrixFn factor_vol, ScalarFn short_rate,
                         std::string family, bool globally_bounded, bool constant_loadings)
    : assets_(assets),
      factors_(factors),
      a_(std::move(asset_drift)),
      mu_(std::move(factor_drift)),
      sigma_(std::move(asset_vol)),
      lambda_(std::move(factor_vol)),
      r_(std::move(short_rate)),
      family_(std::move(family)),
      globally_bounded_(globally_bounded),
      constant_loadings_(constant_loadings) {
    if (assets_ < 1) throw ConfigError("market model needs at least one asset");
    if (factors_ < 1) throw ConfigError("market model needs at least one factor");
    if (!a_ || !mu_ || !sigma_ || !lambda_ || !r_) {
        throw ConfigError("market model coefficient function is empty");
    }
}

void MarketModel::check_point(const Vector& x) const {
    if (x.size() != factors_) {
        throw ModelError("factor point has dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(factors_));
    }
    if (!x.allFinite()) throw ModelError("non-finite factor point");
}

Vector MarketModel::asset_drift(const Vector& x) const {
    check_point(x);
    Vector v = a_(x);
    if (v.size() != assets_) throw ModelError("a(x) has wrong length " + std::to_string(v.size()));
    require_finite(v, "a");
    return v;
}

Vector MarketModel::factor_drift(const Vector& x) const {
    check_point(x);
    Vector v = mu_(x);
    if (v.size() != factors_) throw ModelError("mu(x) has wrong length " + std::to_string(v.size()));
    require_finite(v, "mu");
    return v;
}

Matrix MarketModel::asset_vol(const Vector& x) const {
    check_point(x);
    Matrix s = sigma_(x);
    if (s.rows() != assets_ || s.cols() != noise_dim()) {
        throw ModelError("sigma(x) has shape " + shape_str(s.rows(), s.cols()) + ", expected " +
                         shape_str(assets_, noise_dim()));
    }
    require_finite(s, "sigma");
    return s;
}

Matrix MarketModel::factor_vol(const Vector& x) const {
    check_point(x);
    Matrix l = lambda_(x);
    if (l.rows() != factors_ || l.cols() != noise_dim()) {
        throw ModelError("Lambda(x) has shape " + shape_str(l.rows(), l.cols()) + ", expected " +
                         shape_str(factors_, noise_dim()));
    }
    require_finite(l, "Lambda");
    return l;
}

double MarketModel::short_rate(const Vector& x) const {
    check_point(x);
    const double r = r_(x);
    if (!std::isfinite(r)) throw ModelError("non-finite value from coefficient r");
    return r;
}

LocalMarket LocalMarket::at(const MarketModel& model, const Vector& x) {
    LocalMarket lm;
    lm.rate = model.short_rate(x);
    lm.excess = model.asset_drift(x).array() - lm.rate;
    lm.factor_drift = model.factor_drift(x);
    lm.sigma = model.asset_vol(x);
    lm.lambda = model.factor_vol(x);
    lm.asset_cov = lm.sigma * lm.sigma.transpose();
    lm.factor_cov = lm.lambda * lm.lambda.transpose();
    lm.cross = lm.sigma * lm.lambda.transpose();
    lm.asset_cov_llt.compute(lm.asset_cov);
    lm.asset_cov_spd = lm.asset_cov_llt.info() == Eigen::Success &&
                       lm.asset_cov_llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0;
    return lm;
}

Matrix diffusion_matrix(const MarketModel& model, const Vector& x) {
    const Matrix l = model.factor_vol(x);
    Matrix m = l * l.transpose();
    // exact symmetry regardless of summation order
    return 0.5 * (m + m.transpose());
}

// ---------------------------------------------------------------------------

namespace {

void check_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols) {
        throw ConfigError(std::string(name) + " has shape " + shape_str(m.rows(), m.cols()) +
                          ", expected " + shape_str(rows, cols));
    }
}

void check_len(const Vector& v, Eigen::Index len, const char* name) {
    if (v.size() != len) {
        throw ConfigError(std::string(name) + " has length " + std::to_string(v.size()) +
                          ", expected " + std::to_string(len));
    }
}

}  // namespace

MarketModel make_model(const ConstantSpec& spec) {
    const auto m = spec.a.size();
    const auto n = spec.mu.size();
    check_shape(spec.sigma, m, m + n, "sigma");
    check_shape(spec.lambda, n, m + n, "lambda");
    if (!(spec.r > 0.0)) throw ConfigError("short rate must be positive");
    return MarketModel(
        static_cast<int>(m), static_cast<int>(n), [a = spec.a](const Vector&) { return a; },
        [mu = spec.mu](const Vector&) { return mu; }, [s = spec.sigma](const Vector&) { return s; },
        [l = spec.lambda](const Vector&) { return l; }, [r = spec.r](const Vector&) { return r; },
        "constant", true, true);
}

MarketModel make_model(const LinearGaussianSpec& spec) {
    const auto m = spec.a0.size();
    const auto n = spec.b0.size();
    check_shape(spec.A, m, n, "A");
    check_shape(spec.B, n, n, "B");
    check_shape(spec.Sigma, m, m + n, "Sigma");
    check_shape(spec.Lambda, n, m + n, "Lambda");
    if (!(spec.r0 > 0.0)) throw ConfigError("short rate r0 must be positive");
    const bool bounded = spec.A.isZero(0.0) && spec.B.isZero(0.0);
    return MarketModel(
        static_cast<int>(m), static_cast<int>(n),
        [a0 = spec.a0, A = spec.A](const Vector& x) -> Vector { return a0 + A * x; },
        [b0 = spec.b0, B = spec.B](const Vector& x) -> Vector { return b0 + B * x; },
        [s = spec.Sigma](const Vector&) { return s; }, [l = spec.Lambda](const Vector&) { return l; },
        [r = spec.r0](const Vector&) { return r; }, "linear_gaussian", bounded, true);
}

MarketModel make_model(const BoundedNonlinearSpec& spec) {
    const auto m = spec.a0.size();
    const auto n = spec.b0.size();
    check_shape(spec.A, m, n, "A");
    check_shape(spec.B, n, n, "B");
    check_len(spec.scale, n, "scale");
    check_shape(spec.Sigma, m, m + n, "Sigma");
    check_shape(spec.Lambda, n, m + n, "Lambda");
    if ((spec.scale.array() <= 0.0).any()) throw ConfigError("saturation scale must be positive");
    if (!(spec.r0 > 0.0)) throw ConfigError("short rate r0 must be positive");
    auto saturate = [scale = spec.scale](const Vector& x) -> Vector {
        return (scale.array() * (x.array() / scale.array()).tanh()).matrix();
    };
    return MarketModel(
        static_cast<int>(m), static_cast<int>(n),
        [a0 = spec.a0, A = spec.A, saturate](const Vector& x) -> Vector { return a0 + A * saturate(x); },
        [b0 = spec.b0, B = spec.B, saturate](const Vector& x) -> Vector { return b0 + B * saturate(x); },
        [s = spec.Sigma](const Vector&) { return s; }, [l = spec.Lambda](const Vector&) { return l; },
        [r = spec.r0](const Vector&) { return r; }, "bounded_nonlinear", true, true);
}

ConstantSpec merton_spec(double a, double r, double sigma2) {
    if (!(sigma2 > 0.0)) throw ConfigError("Merton variance must be positive");
    ConstantSpec spec;
    spec.a = Vector::Constant(1, a);
    spec.mu = Vector::Zero(1);
    spec.sigma = Matrix::Zero(1, 2);
    spec.sigma(0, 0) = std::sqrt(sigma2);
    spec.lambda = Matrix::Zero(1, 2);
    spec.lambda(0, 1) = 1.0;
    spec.r = r;
    return spec;
}

LinearGaussianSpec ou_factor_spec() {
    LinearGaussianSpec spec;
    spec.a0 = Vector::Constant(1, 0.07);
    spec.A = Matrix::Constant(1, 1, 0.03);
    spec.b0 = Vector::Zero(1);
    spec.B = Matrix::Constant(1, 1, -1.0);
    spec.Sigma.resize(1, 2);
    spec.Sigma << 0.2, 0.0;
    spec.Lambda.resize(1, 2);
    spec.Lambda << -0.3, 0.4;
    spec.r0 = 0.03;
    return spec;
}

// ---------------------------------------------------------------------------

Grid::Grid(Vector lower, Vector upper, std::vector<int> points_per_dim)
    : lower_(std::move(lower)), upper_(std::move(upper)), points_(std::move(points_per_dim)) {
    const auto d = static_cast<Eigen::Index>(points_.size());
    if (d < 1) throw ConfigError("grid needs at least one dimension");
    if (lower_.size() != d || upper_.size() != d) {
        throw ConfigError("grid bounds and point counts disagree in dimension");
    }
    spacing_.resize(d);
    strides_.resize(points_.size());
    size_ = 1;
    for (Eigen::Index i = 0; i < d; ++i) {
        const int p = points_[static_cast<std::size_t>(i)];
        if (!(lower_[i] < upper_[i]) || !std::isfinite(lower_[i]) || !std::isfinite(upper_[i])) {
            throw ConfigError("grid lower bound must be below upper bound in dimension " +
                              std::to_string(i));
        }
        if (p < 3) throw ConfigError("grid needs at least 3 points per dimension");
        spacing_[i] = (upper_[i] - lower_[i]) / (p - 1);
        strides_[static_cast<std::size_t>(i)] = size_;
        size_ *= static_cast<std::size_t>(p);
    }
}

int Grid::coordinate_index(std::size_t flat, int dim) const {
    const auto d = static_cast<std::size_t>(dim);
    return static_cast<int>((flat / strides_[d]) % static_cast<std::size_t>(points_[d]));
}

Vector Grid::node(std::size_t flat) const {
    Vector x(dims());
    for (int d = 0; d < dims(); ++d) {
        const int i = coordinate_index(flat, d);
        // hit the upper bound exactly on the last node
        x[d] = (i == points(d) - 1) ? upper_[d] : lower_[d] + i * spacing_[d];
    }
    return x;
}

std::size_t Grid::flat_index(std::span<const int> index) const {
    if (index.size() != points_.size()) throw ConfigError("grid index has wrong dimension");
    std::size_t flat = 0;
    for (std::size_t d = 0; d < index.size(); ++d) {
        if (index[d] < 0 || index[d] >= points_[d]) throw ConfigError("grid index out of range");
        flat += static_cast<std::size_t>(index[d]) * strides_[d];
    }
    return flat;
}

std::size_t Grid::nearest_node(const Vector& x) const {
    if (x.size() != dims()) throw ConfigError("point dimension does not match grid");
    std::size_t flat = 0;
    for (int d = 0; d < dims(); ++d) {
        const double t = std::round((x[d] - lower_[d]) / spacing_[d]);
        const int i = static_cast<int>(std::clamp(t, 0.0, static_cast<double>(points(d) - 1)));
        flat += static_cast<std::size_t>(i) * stride(d);
    }
    return flat;
}

bool Grid::contains(const Vector& x, double slack) const {
    if (x.size() != dims()) return false;
    for (int d = 0; d < dims(); ++d) {
        const double tol = slack * (upper_[d] - lower_[d]);
        if (x[d] < lower_[d] - tol || x[d] > upper_[d] + tol) return false;
    }
    return true;
}

bool Grid::on_boundary(std::size_t flat) const {
    for (int d = 0; d < dims(); ++d) {
        const int i = coordinate_index(flat, d);
        if (i == 0 || i == points(d) - 1) return true;
    }
    return false;
}

bool Grid::in_trust_region(std::size_t flat, double margin) const {
    const Vector x = node(flat);
    for (int d = 0; d < dims(); ++d) {
        const double width = upper_[d] - lower_[d];
        const double eps = 1e-9 * width;
        if (x[d] < lower_[d] + margin * width - eps || x[d] > upper_[d] - margin * width + eps) {
            return false;
        }
    }
    return !on_boundary(flat);
}

Grid Grid::refined(int factor) const {
    if (factor < 1) throw ConfigError("refinement factor must be positive");
    std::vector<int> pts(points_);
    for (auto& p : pts) p = (p - 1) * factor + 1;
    return Grid(lower_, upper_, std::move(pts));
}

bool Grid::operator==(const Grid& other) const {
    return points_ == other.points_ && lower_ == other.lower_ && upper_ == other.upper_;
}

}  // namespace riskhjb
