#include "support.hpp"

#include "riskhjb/oracles.hpp"
#include "riskhjb/simulation.hpp"

#include <gtest/gtest.h>

using namespace riskhjb;
using namespace riskhjb::test;

TEST(MertonOracle, ReferenceInstance) {
    const MertonOracle o = merton_constant_oracle(0.10, 0.03, 0.04, 2.0, 3.0, 2.0);
    EXPECT_NEAR(o.h_star, 0.875, 1e-15);
    EXPECT_NEAR(o.rho, 0.060625, 1e-15);
    EXPECT_NEAR(o.J, std::log(2.0) + 3.0 * 0.060625, 1e-14);
}

TEST(MertonOracle, NoExcessReturn) {
    const MertonOracle o = merton_constant_oracle(0.05, 0.05, 0.04, 1.0, 1.0, 1.0);
    EXPECT_EQ(o.h_star, 0.0);
    EXPECT_EQ(o.rho, 0.05);
}

TEST(MertonOracle, SmallThetaApproachesKelly) {
    EXPECT_NEAR(merton_constant_oracle(0.10, 0.03, 0.04, 1e-9, 1.0, 1.0).h_star, 0.07 / 0.04, 1e-8);
}

TEST(MertonOracle, CriterionIsConcaveWithPeakAtHStar) {
    const MertonOracle o = merton_constant_oracle(0.10, 0.03, 0.04, 2.0, 1.0, 1.0);
    EXPECT_NEAR(merton_criterion(0.10, 0.03, 0.04, 2.0, o.h_star, 1.0, 1.0), o.J, 1e-15);
    for (double h = -2.0; h <= 3.0; h += 0.05) {
        if (std::abs(h - o.h_star) < 1e-9) continue;
        EXPECT_LT(merton_criterion(0.10, 0.03, 0.04, 2.0, h, 1.0, 1.0), o.J);
    }
}

TEST(MertonOracle, MonteCarloMaximiserNearKelly) {
    // theta = 0.01: numeric maximisation of the simulated J(h) under common random numbers
    const ControlParams params(0.01);
    const MarketModel m = merton();
    std::vector<Strategy> grid;
    for (int i = 0; i <= 20; ++i) {
        const double h = 1.2 + 0.05 * i;
        grid.push_back(constant_strategy(std::to_string(h), Vector::Constant(1, h)));
    }
    SimConfig c;
    c.n_paths = 20000;
    c.dt = 0.05;
    c.seed = 99;
    const ComparisonTable t = compare_strategies(m, grid, Vector::Zero(1), 1.0, 4.0, params, c);
    const double best = std::stod(t.rows.front().name);
    const double h_star = merton_constant_oracle(0.10, 0.03, 0.04, 0.01, 1.0, 1.0).h_star;
    EXPECT_NEAR(h_star, 1.75 * 2.0 / 2.01, 1e-12);
    EXPECT_NEAR(best, h_star, 0.2);
}

TEST(MertonOracle, RejectsBadInputs) {
    EXPECT_THROW(merton_constant_oracle(0.1, 0.03, 0.0, 2.0, 1.0, 1.0), OracleError);
    EXPECT_THROW(merton_constant_oracle(0.1, 0.03, 0.04, 2.0, 1.0, -1.0), OracleError);
}

TEST(Riccati, ConstantModelInDisguise) {
    LinearGaussianSpec s = ou_factor_spec();
    s.A.setZero();
    s.B.setZero();
    const ControlParams params(2.0);
    const RiccatiSolution r = riccati_oracle(s, params, 2.0, 200);
    const double kbar = hamiltonian_K_theta(make_model(s), Vector::Zero(1), Vector::Zero(1), params);
    for (std::size_t i = 0; i < r.times.size(); ++i) {
        EXPECT_EQ(r.K[i].norm(), 0.0);
        EXPECT_EQ(r.k[i].norm(), 0.0);
        EXPECT_NEAR(r.c[i], -kbar * (2.0 - r.times[i]), 1e-13);
    }
}

TEST(Riccati, ZeroHorizon) {
    const RiccatiSolution r = riccati_oracle(ou_factor_spec(), ControlParams(2.0), 0.0, 10);
    EXPECT_EQ(r.K.back().norm(), 0.0);
    EXPECT_EQ(r.c.front(), 0.0);
    EXPECT_EQ(r.value(0, Vector::Constant(1, 3.0)), 0.0);
}

// frozen from tests/reference/derive_values.py
TEST(Riccati, OuMatchesReference) {
    const RiccatiSolution r1 = riccati_oracle(ou_factor_spec(), ControlParams(2.0), 1.0, 1000);
    EXPECT_NEAR(r1.K.front()(0, 0), 0.002469183131274721, 1e-12);
    EXPECT_NEAR(r1.k.front()[0], 0.009636898796294814, 1e-12);
    EXPECT_NEAR(r1.c.front(), 0.04056685185784571, 1e-12);
    const RiccatiSolution r4 = riccati_oracle(ou_factor_spec(), ControlParams(2.0), 4.0, 4000);
    EXPECT_NEAR(r4.K.front()(0, 0), 0.0028743590754146528, 1e-12);
    EXPECT_NEAR(r4.k.front()[0], 0.015190575045792166, 1e-12);
    EXPECT_NEAR(r4.c.front(), 0.16383877716803255, 1e-12);
}

TEST(Riccati, RatesMatchPdeResidualTermByTerm) {
    std::mt19937_64 rng(43);
    LinearGaussianSpec s;
    s.a0 = random_vector(rng, 2, 0.05);
    s.A = random_matrix(rng, 2, 2, 0.05);
    s.b0 = random_vector(rng, 2, 0.1);
    s.B = -Matrix::Identity(2, 2) + random_matrix(rng, 2, 2, 0.1);
    s.Sigma = random_matrix(rng, 2, 4, 0.05);
    s.Sigma.leftCols(2) += 0.2 * Matrix::Identity(2, 2);
    s.Lambda = random_matrix(rng, 2, 4, 0.1);
    s.Lambda.rightCols(2) += 0.3 * Matrix::Identity(2, 2);
    s.r0 = 0.02;
    const MarketModel m = make_model(s);
    const ControlParams params(1.7);
    Matrix K = random_matrix(rng, 2, 2, 0.1);
    K = 0.5 * (K + K.transpose()).eval();
    const Vector k = random_vector(rng, 2, 0.1);
    const RiccatiRates d = riccati_rhs(s, params, K, k);
    // u_t = -R(x) where R collects every other term of the u-equation
    auto residual = [&](const Vector& x) {
        const Vector p = 2.0 * K * x + k;
        const Matrix M = diffusion_matrix(m, x);
        return m.factor_drift(x).dot(p) - 0.25 * params.theta * p.dot(M * p) + (M * K).trace() -
               hamiltonian_K_theta(m, x, p, params);
    };
    EXPECT_NEAR(-residual(Vector::Zero(2)), d.dc, 1e-13);
    const double e = 1e-3;
    for (int i = 0; i < 2; ++i) {
        const Vector ei = Vector::Unit(2, i) * e;
        EXPECT_NEAR(-(residual(ei) - residual(-ei)) / (2 * e), d.dk[i], 1e-9);
        for (int j = 0; j < 2; ++j) {
            const Vector ej = Vector::Unit(2, j) * e;
            const double h2 = (residual(ei + ej) - residual(ei - ej) - residual(-ei + ej) + residual(-ei - ej)) / (4 * e * e);
            EXPECT_NEAR(-0.5 * h2, d.dK(i, j), 1e-7);
        }
    }
    for (int trial = 0; trial < 10; ++trial) {
        const Vector x = random_vector(rng, 2);
        EXPECT_NEAR(-residual(x), x.dot(d.dK * x) + d.dk.dot(x) + d.dc, 1e-12);
    }
}

TEST(Riccati, TwoFactorStaysSymmetric) {
    LinearGaussianSpec s;
    s.a0 = Vector::Constant(1, 0.06);
    s.A.resize(1, 2);
    s.A << 0.03, -0.02;
    s.b0 = Vector::Zero(2);
    s.B.resize(2, 2);
    s.B << -1.0, 0.4, -0.1, -0.8;
    s.Sigma.resize(1, 3);
    s.Sigma << 0.2, 0.0, 0.0;
    s.Lambda.resize(2, 3);
    s.Lambda << -0.2, 0.3, 0.0, 0.1, 0.0, 0.35;
    s.r0 = 0.02;
    const RiccatiSolution r = riccati_oracle(s, ControlParams(1.5), 3.0, 600);
    for (const auto& K : r.K) EXPECT_LE((K - K.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    const Vector x = Vector::Constant(2, 0.5);
    const double e = 1e-5;
    const Vector g = r.gradient(0, x);
    for (int i = 0; i < 2; ++i) {
        const Vector ei = Vector::Unit(2, i) * e;
        EXPECT_NEAR(g[i], (r.value(0, x + ei) - r.value(0, x - ei)) / (2 * e), 1e-9);
    }
}

TEST(Riccati, NonFiniteIntegrationIsReported) {
    // theta > 0 keeps the quadratic coefficient of K's equation negative, so only
    // an unstable step size can overflow
    LinearGaussianSpec s = ou_factor_spec();
    s.B(0, 0) = -400.0;
    EXPECT_THROW(riccati_oracle(s, ControlParams(2.0), 10.0, 10), OracleError);
}

TEST(BruteForce, MertonArgminWithinOneCell) {
    const BruteForceMin b = brute_force_hamiltonian(merton(), Vector::Zero(1), Vector::Zero(1), ControlParams(2.0),
                                                    Vector::Constant(1, -5.0), Vector::Constant(1, 5.0), 101);
    EXPECT_LE(std::abs(b.argmin[0] - 0.875), 0.1);
    EXPECT_FALSE(b.expanded);
    EXPECT_GE(b.min_value, -0.060625 - 1e-15);
}

TEST(BruteForce, NoExcessReturn) {
    const BruteForceMin b = brute_force_hamiltonian(make_model(merton_spec(0.03, 0.03, 0.04)), Vector::Zero(1), Vector::Zero(1),
                                                    ControlParams(2.0), Vector::Constant(1, -5.0), Vector::Constant(1, 5.0), 101);
    EXPECT_EQ(b.argmin[0], 0.0);
    EXPECT_DOUBLE_EQ(b.min_value, -0.03);
}

TEST(BruteForce, NeverBelowClosedForm) {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 10; ++trial) {
        const MarketModel m = make_model(random_constant_spec(rng, 2, 1));
        const Vector p = random_vector(rng, 1);
        const ControlParams params(1.0 + trial);
        const BruteForceMin b = brute_force_hamiltonian(m, Vector::Zero(1), p, params, Vector::Constant(2, -5.0), Vector::Constant(2, 5.0), 81);
        EXPECT_GE(b.min_value, hamiltonian_K_theta(m, Vector::Zero(1), p, params) - 1e-12);
    }
}

TEST(BruteForce, ExpandsBoxOnce) {
    const BruteForceMin b = brute_force_hamiltonian(merton(), Vector::Zero(1), Vector::Zero(1), ControlParams(2.0),
                                                    Vector::Constant(1, -0.3), Vector::Constant(1, 0.5), 81);
    EXPECT_TRUE(b.expanded);
    EXPECT_LE(std::abs(b.argmin[0] - 0.875), (b.upper[0] - b.lower[0]) / 80.0);
    EXPECT_THROW(brute_force_hamiltonian(merton(), Vector::Zero(1), Vector::Zero(1), ControlParams(2.0),
                                         Vector::Constant(1, -0.1), Vector::Constant(1, 0.1), 81),
                 OracleError);
}

TEST(BruteForce, ArgminConvergesWithCellSize) {
    std::mt19937_64 rng(53);
    const MarketModel m = make_model(random_constant_spec(rng, 1, 1));
    const Vector p = Vector::Constant(1, 0.3);
    const ControlParams params(2.0);
    const double exact = minimizing_selector(m, Vector::Zero(1), p, params)[0];
    for (int count : {41, 81, 161}) {
        const BruteForceMin b = brute_force_hamiltonian(m, Vector::Zero(1), p, params, Vector::Constant(1, -5.0), Vector::Constant(1, 5.0), count);
        EXPECT_LE(std::abs(b.argmin[0] - exact), 0.5 * 10.0 / (count - 1) + 1e-12) << count;
    }
}

TEST(BruteForce, SaddleAgreesWithClosedForm) {
    const Vector x = Vector::Constant(1, -0.5);
    const Vector p = Vector::Constant(1, 0.2);
    const ControlParams params(2.0);
    const BruteForceSaddle b = brute_force_saddle(ou(), x, p, params, Vector::Constant(1, -3.0), Vector::Constant(1, 3.0),
                                                  Vector::Constant(2, -2.0), Vector::Constant(2, 2.0), 61);
    const double v = game_value(LocalMarket::at(ou(), x), p, params);
    // grid optima bracket nothing in general; both sit within a cell's variation of the saddle value
    EXPECT_NEAR(b.supinf, v, 1e-3);
    EXPECT_NEAR(b.infsup, v, 1e-3);
}
