#include "support.hpp"

#include "riskhjb/oracles.hpp"

#include <gtest/gtest.h>

using namespace riskhjb;
using namespace riskhjb::test;

namespace {

const Vector x0 = Vector::Zero(1);
const Vector p0 = Vector::Zero(1);

}  // namespace

TEST(Selector, NoExcessReturnNoHedgeGivesZero) {
    const MarketModel m = make_model(merton_spec(0.03, 0.03, 0.04));
    EXPECT_EQ(minimizing_selector(m, x0, p0, ControlParams(2.0)).norm(), 0.0);
}

TEST(Selector, MertonFraction) {
    const Vector h = minimizing_selector(merton(), x0, p0, ControlParams(2.0));
    ASSERT_EQ(h.size(), 1);
    EXPECT_NEAR(h[0], 0.875, 1e-12);
}

TEST(Selector, MatchesBruteForceOnRandomTwoAssetInstances) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const MarketModel m = make_model(random_constant_spec(rng, 2, 1));
        const Vector p = random_vector(rng, 1);
        const ControlParams params(0.5 + trial);
        const Vector h = minimizing_selector(m, x0, p, params);
        const BruteForceMin bf =
            brute_force_hamiltonian(m, x0, p, params, Vector::Constant(2, -5.0), Vector::Constant(2, 5.0), 201);
        const Vector cell = (bf.upper - bf.lower) / 200.0;
        for (int i = 0; i < 2; ++i) EXPECT_LE(std::abs(bf.argmin[i] - h[i]), cell[i] + 1e-12) << trial;
    }
}

TEST(Selector, InvariantUnderNoiseRotation) {
    std::mt19937_64 rng(13);
    const ConstantSpec s = random_constant_spec(rng, 2, 2);
    const Matrix R = Eigen::HouseholderQR<Matrix>(random_matrix(rng, 4, 4)).householderQ();
    ConstantSpec rot = s;
    rot.sigma = s.sigma * R;
    rot.lambda = s.lambda * R;
    const Vector p = random_vector(rng, 2);
    const ControlParams params(1.5);
    const Vector h1 = minimizing_selector(make_model(s), Vector::Zero(2), p, params);
    const Vector h2 = minimizing_selector(make_model(rot), Vector::Zero(2), p, params);
    EXPECT_LE((h1 - h2).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Selector, SingularCovarianceThrows) {
    ConstantSpec s = merton_spec(0.1, 0.03, 0.04);
    s.sigma.setZero();
    EXPECT_THROW(minimizing_selector(make_model(s), x0, p0, ControlParams(1.0)), EllipticityError);
}

TEST(Hamiltonian, NoExcessReturnGivesMinusRate) {
    const MarketModel m = make_model(merton_spec(0.03, 0.03, 0.04));
    EXPECT_NEAR(hamiltonian_K_theta(m, x0, p0, ControlParams(2.0)), -0.03, 1e-15);
}

TEST(Hamiltonian, MertonValue) {
    EXPECT_NEAR(hamiltonian_K_theta(merton(), x0, p0, ControlParams(2.0)), -0.060625, 1e-15);
}

TEST(Hamiltonian, BoundedByMinusRate) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const MarketModel m = make_model(random_constant_spec(rng, 2, 2));
        const Vector p = random_vector(rng, 2, 2.0);
        EXPECT_LE(hamiltonian_K_theta(m, Vector::Zero(2), p, ControlParams(0.3 + trial * 0.1)), -m.short_rate(Vector::Zero(2)));
    }
}

TEST(Hamiltonian, StrictMinimumAtSelector) {
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        const MarketModel m = make_model(random_constant_spec(rng, 2, 1));
        const LocalMarket lm = LocalMarket::at(m, x0);
        const Vector p = random_vector(rng, 1, 2.0);
        const ControlParams params(2.0);
        const Vector h = minimizing_selector(lm, p, params);
        const double k = hamiltonian_K_theta(lm, p, params);
        EXPECT_NEAR(hamiltonian_bracket(lm, h, p, params), k, 1e-14);
        const Vector other = h + random_vector(rng, 2, 0.1);
        EXPECT_GT(hamiltonian_bracket(lm, other, p, params), k);
    }
}

TEST(Hamiltonian, ZeroFractionBracketIndependentOfTheta) {
    const LocalMarket lm = LocalMarket::at(ou(), Vector::Constant(1, 0.7));
    const Vector p = Vector::Constant(1, 0.4);
    for (double th : {0.1, 1.0, 10.0}) {
        EXPECT_DOUBLE_EQ(hamiltonian_bracket(lm, Vector::Zero(1), p, ControlParams(th)), -0.03);
    }
}

TEST(RunningCost, Examples) {
    const LocalMarket lm = LocalMarket::at(merton(), x0);
    const ControlParams params(2.0);
    EXPECT_DOUBLE_EQ(running_cost(lm, {Vector::Zero(1), Vector::Zero(2)}, params), -0.03);
    Vector w(2);
    w << 1.0, 1.0;  // |w|^2 = theta
    EXPECT_DOUBLE_EQ(running_cost(lm, {Vector::Zero(1), w}, params), -1.03);
    EXPECT_NEAR(running_cost(lm, {Vector::Constant(1, 0.875), Vector::Zero(2)}, params), -0.060625, 1e-15);
}

TEST(Generator, UncontrolledDriftIsFactorDrift) {
    const MarketModel m = ou();
    const Vector x = Vector::Constant(1, 0.3);
    const GeneratorCoefficients g = generator_coefficients(m, x, {Vector::Zero(1), Vector::Zero(2)}, ControlParams(2.0));
    EXPECT_DOUBLE_EQ(g.drift[0], -0.3);
    EXPECT_TRUE(g.diffusion.isApprox(diffusion_matrix(m, x)));
}

TEST(Generator, UnitDistortionShiftsDrift) {
    ConstantSpec s;
    s.a = Vector::Constant(1, 0.05);
    s.mu = Vector::Constant(2, 0.1);
    s.sigma = Matrix::Zero(1, 3);
    s.sigma(0, 0) = 0.2;
    s.lambda = Matrix::Zero(2, 3);
    s.lambda.rightCols(2) = Matrix::Identity(2, 2);
    s.r = 0.02;
    const MarketModel m = make_model(s);
    Vector e(2);
    e << 0.3, -0.7;
    const Vector w = s.lambda.transpose() * e;
    const GeneratorCoefficients g = generator_coefficients(m, Vector::Zero(2), {Vector::Zero(1), w}, ControlParams(1.0));
    EXPECT_LE((g.drift - (s.mu + e)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Generator, MatchesLoopOracleAndIgnoresControlsInDiffusion) {
    std::mt19937_64 rng(23);
    const ConstantSpec s = random_constant_spec(rng, 2, 3);
    const MarketModel m = make_model(s);
    const ControlParams params(1.7);
    const Vector h = random_vector(rng, 2);
    const Vector w = random_vector(rng, 5);
    const GeneratorCoefficients g = generator_coefficients(m, Vector::Zero(3), {h, w}, params);
    for (int i = 0; i < 3; ++i) {
        double d = s.mu[i];
        for (int k = 0; k < 5; ++k) d += s.lambda(i, k) * w[k];
        for (int l = 0; l < 2; ++l)
            for (int k = 0; k < 5; ++k) d += 0.5 * params.theta * h[l] * s.lambda(i, k) * s.sigma(l, k);
        EXPECT_NEAR(g.drift[i], d, 1e-14);
    }
    const GeneratorCoefficients g0 = generator_coefficients(m, Vector::Zero(3), {Vector::Zero(2), Vector::Zero(5)}, params);
    EXPECT_EQ((g.diffusion - g0.diffusion).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Saddle, ZeroGradientGivesMyopicFraction) {
    const ConstantSpec s = block_orthogonal_spec();
    const ControlPoint c = saddle_controls(make_model(s), x0, p0, ControlParams(2.0));
    const Vector expect = 0.5 * (s.sigma * s.sigma.transpose()).ldlt().solve(s.a - Vector::Constant(2, s.r));
    EXPECT_LE((c.h - expect).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(c.omega.norm(), 0.0);
}

TEST(Saddle, MertonZeroGradient) {
    const ControlPoint c = saddle_controls(merton(), x0, p0, ControlParams(2.0));
    EXPECT_NEAR(c.h[0], 0.875, 1e-12);
    EXPECT_EQ(c.omega.norm(), 0.0);
}

TEST(Saddle, InequalitiesHoldOnControlGrid) {
    std::mt19937_64 rng(29);
    const ControlParams params(2.0);
    for (int trial = 0; trial < 5; ++trial) {
        const MarketModel m = make_model(random_constant_spec(rng, 1, 1));
        const LocalMarket lm = LocalMarket::at(m, x0);
        const Vector p = random_vector(rng, 1);
        const ControlPoint bar = saddle_controls(lm, p, params);
        const double v = game_integrand(lm, bar, p, params);
        EXPECT_NEAR(v, game_value(lm, p, params), 1e-14);
        // 41 x 41 grid over (h, one omega component), the other omega component held at its saddle value
        for (int i = 0; i < 41; ++i) {
            for (int j = 0; j < 41; ++j) {
                const double hv = -5.0 + 0.25 * i;
                ControlPoint ho = bar;
                ho.h[0] = hv;
                EXPECT_LE(v, game_integrand(lm, ho, p, params) + 1e-14);
                for (int comp = 0; comp < 2; ++comp) {
                    ControlPoint wo = bar;
                    wo.omega[comp] = -5.0 + 0.25 * j;
                    EXPECT_LE(game_integrand(lm, wo, p, params), v + 1e-14);
                }
            }
        }
    }
}

TEST(Saddle, GameValueIdentity) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const MarketModel m = make_model(random_constant_spec(rng, 2, 2));
        const LocalMarket lm = LocalMarket::at(m, Vector::Zero(2));
        const Vector p = random_vector(rng, 2);
        const ControlParams params(0.5 + 0.2 * trial);
        const double expect = lm.factor_drift.dot(p) + 0.25 * params.theta * p.dot(lm.factor_cov * p) +
                              hamiltonian_K_theta(lm, p, params);
        EXPECT_NEAR(game_value(lm, p, params), expect, 1e-13);
    }
}

TEST(ControlParams, RejectsNonPositiveTheta) {
    EXPECT_THROW(ControlParams(0.0), ConfigError);
    EXPECT_THROW(ControlParams(-1.0), ConfigError);
}
