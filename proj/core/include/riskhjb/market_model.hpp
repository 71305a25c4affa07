#pragma once

// Factor-driven market:
//   dS0/S0 = r(X) dt
//   dSi/Si = a_i(X) dt + sum_k sigma_ik(X) dW_k          i = 1..m
//   dXi    = mu_i(X) dt + sum_k lambda_ik(X) dW_k         i = 1..n
// with W an (m+n)-dimensional Brownian motion.

#include "riskhjb/types.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace riskhjb {

/// Coefficient functions of the market. Immutable after construction and
/// safe to share; the callables must be deterministic and thread-safe.
class MarketModel {
public:
    using VectorFn = std::function<Vector(const Vector&)>;
    using MatrixFn = std::function<Matrix(const Vector&)>;
    using ScalarFn = std::function<double(const Vector&)>;

    MarketModel(int assets, int factors, VectorFn asset_drift, VectorFn factor_drift,
                MatrixFn asset_vol, MatrixFn factor_vol, ScalarFn short_rate,
                std::string family = "custom", bool globally_bounded = true, bool constant_loadings = false);

    int assets() const { return assets_; }
    int factors() const { return factors_; }
    int noise_dim() const { return assets_ + factors_; }
    const std::string& family() const { return family_; }

    /// False for families whose drifts grow without bound (linear-Gaussian);
    /// their guarantees only hold on a truncated grid.
    bool globally_bounded() const { return globally_bounded_; }
    /// True when sigma, Lambda and r do not depend on x; lets path
    /// simulation evaluate them once.
    bool constant_loadings() const { return constant_loadings_; }

    // Checked evaluations: throw ModelError on wrong shape or non-finite output.
    Vector asset_drift(const Vector& x) const;
    Vector factor_drift(const Vector& x) const;
    Matrix asset_vol(const Vector& x) const;
    Matrix factor_vol(const Vector& x) const;
    double short_rate(const Vector& x) const;

private:
    void check_point(const Vector& x) const;

    int assets_;
    int factors_;
    VectorFn a_;
    VectorFn mu_;
    MatrixFn sigma_;
    MatrixFn lambda_;
    ScalarFn r_;
    std::string family_;
    bool globally_bounded_;
    bool constant_loadings_;
};

/// Snapshot of all coefficients at one factor level, with the products the
/// control maps need.
struct LocalMarket {
    Vector excess;        ///< a(x) - r(x) 1
    Vector factor_drift;  ///< mu(x)
    Matrix sigma;         ///< m x (m+n)
    Matrix lambda;        ///< n x (m+n)
    double rate = 0.0;    ///< r(x)
    Matrix asset_cov;     ///< sigma sigma^T
    Matrix factor_cov;    ///< Lambda Lambda^T
    Matrix cross;         ///< sigma Lambda^T, m x n
    Eigen::LLT<Matrix> asset_cov_llt;
    bool asset_cov_spd = false;

    static LocalMarket at(const MarketModel& model, const Vector& x);
};

/// M(x) = Lambda(x) Lambda(x)^T.
Matrix diffusion_matrix(const MarketModel& model, const Vector& x);

// ---------------------------------------------------------------------------
// Model families

struct ConstantSpec {
    Vector a;       ///< asset drift, m
    Vector mu;      ///< factor drift, n
    Matrix sigma;   ///< m x (m+n)
    Matrix lambda;  ///< n x (m+n)
    double r = 0.0;
};

/// a(x) = a0 + A x, mu(x) = b0 + B x, constant loadings and short rate.
struct LinearGaussianSpec {
    Vector a0;
    Matrix A;
    Vector b0;
    Matrix B;
    Matrix Sigma;
    Matrix Lambda;
    double r0 = 0.0;
};

/// Saturating drifts: a(x) = a0 + A s(x), mu(x) = b0 + B s(x) with
/// s_i(x) = scale_i tanh(x_i / scale_i). Bounded and Lipschitz everywhere.
struct BoundedNonlinearSpec {
    Vector a0;
    Matrix A;
    Vector b0;
    Matrix B;
    Vector scale;
    Matrix Sigma;
    Matrix Lambda;
    double r0 = 0.0;
};

MarketModel make_model(const ConstantSpec& spec);
MarketModel make_model(const LinearGaussianSpec& spec);
MarketModel make_model(const BoundedNonlinearSpec& spec);

/// One asset, one driftless factor, sigma = [sqrt(sigma2), 0], Lambda = [0, 1].
ConstantSpec merton_spec(double a, double r, double sigma2);

/// One asset, one Ornstein-Uhlenbeck factor (B = -1) driving the asset's
/// expected return, with asset/factor noise correlation -0.6.
LinearGaussianSpec ou_factor_spec();

// ---------------------------------------------------------------------------
// Grid

/// Uniform tensor grid on [lower, upper]. Nodes are flattened with
/// dimension 0 varying fastest.
class Grid {
public:
    Grid(Vector lower, Vector upper, std::vector<int> points_per_dim);

    int dims() const { return static_cast<int>(points_.size()); }
    std::size_t size() const { return size_; }
    const Vector& lower() const { return lower_; }
    const Vector& upper() const { return upper_; }
    const Vector& spacing() const { return spacing_; }
    int points(int dim) const { return points_[static_cast<std::size_t>(dim)]; }
    const std::vector<int>& points() const { return points_; }
    std::size_t stride(int dim) const { return strides_[static_cast<std::size_t>(dim)]; }

    Vector node(std::size_t flat) const;
    int coordinate_index(std::size_t flat, int dim) const;
    std::size_t flat_index(std::span<const int> index) const;
    std::size_t nearest_node(const Vector& x) const;
    bool contains(const Vector& x, double slack = 1e-12) const;
    bool on_boundary(std::size_t flat) const;

    /// True when the node sits at least `margin` (fraction of the width) away
    /// from every face. Residual and acceptance checks only look here.
    bool in_trust_region(std::size_t flat, double margin = 0.1) const;

    /// Same box, spacing divided by `factor`.
    Grid refined(int factor = 2) const;

    bool operator==(const Grid& other) const;

private:
    Vector lower_;
    Vector upper_;
    std::vector<int> points_;
    Vector spacing_;
    std::vector<std::size_t> strides_;
    std::size_t size_ = 0;
};

}  // namespace riskhjb
