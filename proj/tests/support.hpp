#pragma once

#include "riskhjb/control_law.hpp"
#include "riskhjb/market_model.hpp"

#include <cmath>
#include <random>

namespace riskhjb::test {

// a = 0.10, r = 0.03, sigma^2 = 0.04
inline MarketModel merton() { return make_model(merton_spec(0.10, 0.03, 0.04)); }

inline MarketModel ou() { return make_model(ou_factor_spec()); }

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
    return m;
}

inline Vector random_vector(std::mt19937_64& rng, int size, double scale = 1.0) {
    return random_matrix(rng, size, 1, scale).col(0);
}

/// Constant-coefficient model with random loadings; sigma sigma' and
/// Lambda Lambda' are well conditioned because the diagonal blocks dominate.
inline ConstantSpec random_constant_spec(std::mt19937_64& rng, int m, int n) {
    ConstantSpec s;
    s.r = 0.02 + 0.03 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    s.a = Vector::Constant(m, s.r) + random_vector(rng, m, 0.05);
    s.mu = random_vector(rng, n, 0.1);
    s.sigma = random_matrix(rng, m, m + n, 0.05);
    s.sigma.leftCols(m) += 0.2 * Matrix::Identity(m, m);
    s.lambda = random_matrix(rng, n, m + n, 0.1);
    s.lambda.rightCols(n) += 0.4 * Matrix::Identity(n, n);
    return s;
}

/// sigma Lambda' = 0: assets load on the first m noises, factors on the rest.
inline ConstantSpec block_orthogonal_spec() {
    ConstantSpec s;
    s.a = Vector(2);
    s.a << 0.08, 0.11;
    s.mu = Vector::Zero(1);
    s.sigma = Matrix::Zero(2, 3);
    s.sigma.leftCols(2) << 0.2, 0.0, 0.06, 0.25;
    s.lambda = Matrix::Zero(1, 3);
    s.lambda(0, 2) = 0.5;
    s.r = 0.03;
    return s;
}

inline Grid grid1(double lo, double hi, int points) {
    return Grid(Vector::Constant(1, lo), Vector::Constant(1, hi), {points});
}

}  // namespace riskhjb::test
