#include "support.hpp"

#include "riskhjb/assumptions.hpp"

#include <gtest/gtest.h>

#include <Eigen/SVD>

using namespace riskhjb;
using namespace riskhjb::test;

namespace {

MarketModel with_lambda(const Matrix& lambda) {
    const int n = static_cast<int>(lambda.rows());
    const int m = static_cast<int>(lambda.cols()) - n;
    Matrix sigma = Matrix::Zero(m, m + n);
    sigma.leftCols(m) = 0.2 * Matrix::Identity(m, m);
    return MarketModel(
        m, n, [m](const Vector&) { return Vector::Constant(m, 0.05); }, [n](const Vector&) { return Vector::Zero(n); },
        [sigma](const Vector&) { return sigma; }, [lambda](const Vector&) { return lambda; },
        [](const Vector&) { return 0.03; });
}

}  // namespace

TEST(DiffusionMatrix, UnitLoadingGivesOne) {
    Matrix l(1, 2);
    l << 1.0, 0.0;
    const Matrix M = diffusion_matrix(with_lambda(l), Vector::Zero(1));
    ASSERT_EQ(M.rows(), 1);
    EXPECT_DOUBLE_EQ(M(0, 0), 1.0);
}

TEST(DiffusionMatrix, ScaledIdentityBlock) {
    Matrix l = Matrix::Zero(2, 3);
    l.rightCols(2) = 2.0 * Matrix::Identity(2, 2);
    const Matrix M = diffusion_matrix(with_lambda(l), Vector::Zero(2));
    EXPECT_TRUE(M.isApprox(4.0 * Matrix::Identity(2, 2), 1e-15));
}

TEST(DiffusionMatrix, MatchesDoubleLoop) {
    std::mt19937_64 rng(3);
    const Matrix l = random_matrix(rng, 2, 4);
    const Matrix M = diffusion_matrix(with_lambda(l), Vector::Zero(2));
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += l(i, k) * l(j, k);
            EXPECT_NEAR(M(i, j), s, 1e-15);
        }
    }
}

TEST(DiffusionMatrix, SymmetricPositiveSemidefinite) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix l = random_matrix(rng, 3, 5);
        const Matrix M = diffusion_matrix(with_lambda(l), Vector::Zero(3));
        EXPECT_EQ((M - M.transpose()).cwiseAbs().maxCoeff(), 0.0);
        const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(M).eigenvalues();
        EXPECT_GE(ev.minCoeff(), -1e-12 * M.trace());
    }
}

TEST(DiffusionMatrix, NonFiniteCoefficientThrows) {
    MarketModel bad(
        1, 1, [](const Vector&) { return Vector::Constant(1, 0.1); }, [](const Vector&) { return Vector::Zero(1); },
        [](const Vector&) { return Matrix::Constant(1, 2, 0.2); },
        [](const Vector& x) { return Matrix::Constant(1, 2, std::log(x[0])); }, [](const Vector&) { return 0.03; });
    EXPECT_THROW(diffusion_matrix(bad, Vector::Constant(1, -1.0)), ModelError);
    EXPECT_THROW(diffusion_matrix(bad, Vector::Zero(2)), ModelError);
}

TEST(MarketModel, WrongShapeThrows) {
    MarketModel bad(
        1, 1, [](const Vector&) { return Vector::Constant(2, 0.1); }, [](const Vector&) { return Vector::Zero(1); },
        [](const Vector&) { return Matrix::Constant(1, 2, 0.2); }, [](const Vector&) { return Matrix::Constant(1, 2, 0.2); },
        [](const Vector&) { return 0.03; });
    EXPECT_THROW(bad.asset_drift(Vector::Zero(1)), ModelError);
}

TEST(MarketModel, LinearFamilyIsAffine) {
    std::mt19937_64 rng(7);
    LinearGaussianSpec s;
    s.a0 = random_vector(rng, 2, 0.1);
    s.A = random_matrix(rng, 2, 2, 0.1);
    s.b0 = random_vector(rng, 2);
    s.B = -Matrix::Identity(2, 2);
    s.Sigma = Matrix::Zero(2, 4);
    s.Sigma.leftCols(2) = 0.2 * Matrix::Identity(2, 2);
    s.Lambda = Matrix::Zero(2, 4);
    s.Lambda.rightCols(2) = 0.3 * Matrix::Identity(2, 2);
    s.r0 = 0.02;
    const MarketModel model = make_model(s);
    EXPECT_FALSE(model.globally_bounded());
    for (int trial = 0; trial < 10; ++trial) {
        const Vector x = random_vector(rng, 2);
        const Vector y = random_vector(rng, 2);
        EXPECT_LE((model.asset_drift(x) - model.asset_drift(y) - s.A * (x - y)).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_LE((model.factor_drift(x) - (s.b0 + s.B * x)).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_EQ(model.short_rate(x), 0.02);
    }
}

TEST(MarketModel, RejectsNonPositiveRate) {
    ConstantSpec s = merton_spec(0.1, 0.03, 0.04);
    s.r = 0.0;
    EXPECT_THROW(make_model(s), ConfigError);
}

TEST(Grid, SpacingAndNodes) {
    const Grid g(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0), {5, 3});
    EXPECT_EQ(g.size(), 15u);
    EXPECT_DOUBLE_EQ(g.spacing()[0], 0.5);
    EXPECT_DOUBLE_EQ(g.spacing()[1], 1.0);
    EXPECT_DOUBLE_EQ(g.node(6)[0], -0.5);
    EXPECT_DOUBLE_EQ(g.node(6)[1], 0.0);
    EXPECT_DOUBLE_EQ(g.node(7)[0], 0.0);
    EXPECT_EQ(g.nearest_node(Vector::Zero(2)), 7u);
    EXPECT_TRUE(g.on_boundary(0));
    EXPECT_FALSE(g.on_boundary(7));
}

TEST(Grid, InvalidShapesThrow) {
    EXPECT_THROW(Grid(Vector::Constant(1, 1.0), Vector::Constant(1, -1.0), {5}), ConfigError);
    EXPECT_THROW(Grid(Vector::Constant(1, -1.0), Vector::Constant(1, 1.0), {2}), ConfigError);
    EXPECT_THROW(Grid(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0), {5}), ConfigError);
}

TEST(Assumptions, ConstantModelHasZeroLipschitz) {
    const AssumptionReport rep = validate_assumptions(merton(), grid1(-1, 1, 21), 200);
    for (const auto& c : rep.coefficients) EXPECT_EQ(c.lipschitz, 0.0) << c.name;
    EXPECT_TRUE(rep.regularity_pass);
    EXPECT_TRUE(rep.ellipticity_pass);
    EXPECT_NEAR(rep.ellipticity_delta0, 0.04, 1e-15);
    EXPECT_EQ(rep.pairs_sampled, 200u);
}

TEST(Assumptions, LinearDriftLipschitzMatchesOperatorNorm) {
    LinearGaussianSpec s;
    s.a0 = Vector::Constant(2, 0.05);
    s.A.resize(2, 2);
    s.A << 0.3, -0.1, 0.2, 0.05;
    s.b0 = Vector::Zero(2);
    s.B = -Matrix::Identity(2, 2);
    s.Sigma = Matrix::Zero(2, 4);
    s.Sigma.leftCols(2) = 0.2 * Matrix::Identity(2, 2);
    s.Lambda = Matrix::Zero(2, 4);
    s.Lambda.rightCols(2) = 0.3 * Matrix::Identity(2, 2);
    s.r0 = 0.02;
    const Grid g(Vector::Constant(2, -2.0), Vector::Constant(2, 2.0), {11, 11});
    const AssumptionReport rep = validate_assumptions(make_model(s), g, 5000);
    const double opnorm = Eigen::JacobiSVD<Matrix>(s.A).singularValues()[0];
    EXPECT_LE(rep.coefficient("a").lipschitz, opnorm * (1.0 + 1e-12));
    EXPECT_GE(rep.coefficient("a").lipschitz, 0.95 * opnorm);
    EXPECT_FALSE(rep.warnings.empty());
}

TEST(Assumptions, ZeroFactorLoadingFailsEllipticity) {
    ConstantSpec s = merton_spec(0.1, 0.03, 0.04);
    s.lambda.setZero();
    const AssumptionReport rep = validate_assumptions(make_model(s), grid1(-1, 1, 11), 10);
    EXPECT_FALSE(rep.ellipticity_pass);
    EXPECT_EQ(rep.ellipticity_delta0, 0.0);
}

TEST(Assumptions, EstimatesMonotoneInSampleCount) {
    BoundedNonlinearSpec s;
    s.a0 = Vector::Constant(1, 0.07);
    s.A = Matrix::Constant(1, 1, 0.03);
    s.b0 = Vector::Zero(1);
    s.B = Matrix::Constant(1, 1, -1.0);
    s.scale = Vector::Constant(1, 2.0);
    s.Sigma = ou_factor_spec().Sigma;
    s.Lambda = ou_factor_spec().Lambda;
    s.r0 = 0.03;
    const MarketModel model = make_model(s);
    const Grid g = grid1(-4, 4, 41);
    double prev_a = 0.0;
    double prev_mu = 0.0;
    for (int n : {1, 10, 100, 1000}) {
        const AssumptionReport rep = validate_assumptions(model, g, n);
        EXPECT_GE(rep.coefficient("a").lipschitz, prev_a);
        EXPECT_GE(rep.coefficient("mu").lipschitz, prev_mu);
        prev_a = rep.coefficient("a").lipschitz;
        prev_mu = rep.coefficient("mu").lipschitz;
    }
    EXPECT_LE(prev_mu, 1.0 + 1e-12);  // tanh saturation has slope <= 1
}

TEST(Lyapunov, MeanRevertingQuadraticIsConsistent) {
    // mu = -x, Lambda = I, tiny control box: L v ~ n - 2 R^2
    MarketModel model(
        1, 2, [](const Vector&) { return Vector::Constant(1, 0.05); }, [](const Vector& x) { return Vector(-x); },
        [](const Vector&) {
            Matrix s = Matrix::Zero(1, 3);
            s(0, 0) = 0.2;
            return s;
        },
        [](const Vector&) {
            Matrix l = Matrix::Zero(2, 3);
            l.rightCols(2) = Matrix::Identity(2, 2);
            return l;
        },
        [](const Vector&) { return 0.03; });
    const LyapunovReport rep = check_lyapunov(model, quadratic_lyapunov(2), ControlParams(0.1), {1, 2, 5, 10},
                                              ControlBox::symmetric(1, 3, 0.01, 0.01));
    ASSERT_EQ(rep.shells.size(), 4u);
    EXPECT_LT(rep.shells.back().max_generator, 0.0);
    EXPECT_NEAR(rep.shells.back().max_generator, 2.0 - 200.0, 1.0);
    EXPECT_TRUE(rep.consistent);
    EXPECT_TRUE(rep.nonnegative);
    EXPECT_EQ(rep.declared_growth_degree, 1);  // |grad v| = 2|x|
}

TEST(Lyapunov, ZeroCandidateIsNotConsistent) {
    LyapunovCandidate zero;
    zero.value = [](const Vector&) { return 0.0; };
    zero.gradient = [](const Vector& x) { return Vector::Zero(x.size()); };
    zero.hessian = [](const Vector& x) { return Matrix::Zero(x.size(), x.size()); };
    const LyapunovReport rep =
        check_lyapunov(ou(), zero, ControlParams(2.0), {1, 2, 4}, ControlBox::symmetric(1, 2, 1, 1));
    for (const auto& s : rep.shells) EXPECT_EQ(s.max_generator, 0.0);
    EXPECT_FALSE(rep.consistent);
}

TEST(Lyapunov, DriftlessDiffusionIsNotConsistent) {
    ConstantSpec s;
    s.a = Vector::Constant(1, 0.05);
    s.mu = Vector::Zero(2);
    s.sigma = Matrix::Zero(1, 3);
    s.sigma(0, 0) = 0.2;
    s.lambda = Matrix::Zero(2, 3);
    s.lambda.rightCols(2) = Matrix::Identity(2, 2);
    s.r = 0.03;
    // a near-zero control box leaves the uncontrolled generator, L v = 1/2 tr(M * 2I) = n
    const LyapunovReport rep = check_lyapunov(make_model(s), quadratic_lyapunov(2), ControlParams(1.0), {1, 3, 9},
                                              ControlBox::symmetric(1, 3, 1e-9, 1e-9));
    for (const auto& sh : rep.shells) EXPECT_NEAR(sh.max_generator, 2.0, 1e-6);
    EXPECT_FALSE(rep.consistent);
}

TEST(Lyapunov, RejectsBadInputs) {
    EXPECT_THROW(check_lyapunov(ou(), quadratic_lyapunov(1), ControlParams(1.0), {}, ControlBox::symmetric(1, 2, 1, 1)),
                 ConfigError);
    EXPECT_THROW(check_lyapunov(ou(), quadratic_lyapunov(1), ControlParams(1.0), {2, 1}, ControlBox::symmetric(1, 2, 1, 1)),
                 ConfigError);
}
