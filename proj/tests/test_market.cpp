#include "common.hpp"
#include "lcmi/market.hpp"

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

namespace lcmi {
namespace {

using testing::preset;
using testing::simpson;

// Nominal and real A1 solve linear ODEs with constant coefficients:
// A1(tau) = (e^{M tau} - I) M^{-1} c.
struct ClosedFormBonds {
    Mat2 M;
    Vec2 c_nom, c_real;

    explicit ClosedFormBonds(const MarketParams& p) {
        M = -(p.K().transpose() + p.Lambda1.transpose() * p.SigmaX().transpose());
        c_nom = -Vec2::Ones() + p.Lambda1.transpose() * p.sigma_Pi;
        c_real = -Vec2::UnitX();
    }
    Vec2 A1(double tau) const { return ((M * tau).exp() - Mat2::Identity()) * M.inverse() * c_nom; }
    Vec2 A1R(double tau) const { return ((M * tau).exp() - Mat2::Identity()) * M.inverse() * c_real; }
};

TEST(Preset, TableValuesVerbatim) {
    const MarketParams& p = preset();
    EXPECT_EQ(p.delta_r, 0.01254);
    EXPECT_EQ(p.delta_pi_e, 0.03831);
    EXPECT_EQ(p.delta_R, 0.05120);
    EXPECT_EQ(p.kappa1, 0.61921);
    EXPECT_EQ(p.kappa2, 0.18894);
    EXPECT_EQ(p.sigma_S(3), 0.15410);
    EXPECT_EQ(p.Lambda0(2), 0.0);
    EXPECT_EQ(p.Lambda1(3, 0), -14.05465);
}

TEST(Preset, UnknownNameIsRejected) {
    try {
        load_preset("uk-1900");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::UnknownPreset);
        EXPECT_TRUE(is_validation(e.code()));
    }
}

TEST(Preset, SatisfiesNoArbitrageIdentitiesToRounding) {
    const auto r = identity_residuals(preset());
    EXPECT_LT(std::abs(r.delta_R), 1e-5);
    EXPECT_LT(std::abs(r.mu0), 1e-5);
    EXPECT_LT(r.mu1.cwiseAbs().maxCoeff(), 1e-5);
    EXPECT_NO_THROW(validate(preset()));
}

TEST(Preset, JsonRoundTrip) {
    const MarketParams q = market_from_json(to_json(preset()));
    EXPECT_EQ(q.stacked_vol(), preset().stacked_vol());
    EXPECT_EQ(q.Lambda1, preset().Lambda1);
    EXPECT_EQ(q.mu1, preset().mu1);
}

TEST(Market, ValidationCatchesStructuralViolations) {
    MarketParams p = preset();
    p.sigma1(2) = 0.01;
    EXPECT_FALSE(validation_issues(p, 1e-2).empty());
    p = preset();
    p.kappa2 = -0.1;
    EXPECT_FALSE(validation_issues(p, 1e-2).empty());
}

TEST(Bonds, A1MatchesMatrixExponential) {
    const BondCoefficients bc = solve_bond_odes(preset(), 30.0);
    const ClosedFormBonds cf(preset());
    for (double tau : {0.25, 1.0, 3.0, 10.0, 30.0}) {
        EXPECT_LT((bc.A1(tau) - cf.A1(tau)).cwiseAbs().maxCoeff(), 1e-10) << tau;
        EXPECT_LT((bc.A1R(tau) - cf.A1R(tau)).cwiseAbs().maxCoeff(), 1e-10) << tau;
    }
}

TEST(Bonds, A0MatchesQuadratureOfClosedFormA1) {
    const MarketParams& p = preset();
    const BondCoefficients bc = solve_bond_odes(p, 10.0);
    const ClosedFormBonds cf(p);
    const Mat24 SX = p.SigmaX();
    const Mat2 Z2 = SX * SX.transpose();
    auto dA0 = [&](double s) {
        const Vec2 a = cf.A1(s);
        return 0.5 * a.dot(Z2 * a) - a.dot(SX * p.Lambda0) - p.delta_R;
    };
    auto dA0R = [&](double s) {
        const Vec2 a = cf.A1R(s);
        return 0.5 * a.dot(Z2 * a) - a.dot(SX * (p.Lambda0 - p.sigma_Pi)) - p.delta_r;
    };
    EXPECT_NEAR(bc.A0(10.0), simpson(dA0, 0.0, 10.0), 1e-10);
    EXPECT_NEAR(bc.A0R(10.0), simpson(dA0R, 0.0, 10.0), 1e-10);
    // Frozen from the quadrature oracle above.
    EXPECT_NEAR(bc.nominal_yield(10.0, Vec2::Zero()), 0.0591499320, 1e-9);
}

TEST(Bonds, ShortEndYieldApproachesShortRate) {
    const MarketParams& p = preset();
    const BondCoefficients bc = solve_bond_odes(p, 1.0);
    const Vec2 X(0.02, -0.01);
    EXPECT_NEAR(bc.nominal_yield(1e-3, X), nominal_short_rate(p, X), 1e-4);
    EXPECT_NEAR(bc.real_yield(1e-3, X), real_short_rate(p, X), 1e-4);
}

TEST(Bonds, OutsideGridThrows) {
    const BondCoefficients bc = solve_bond_odes(preset(), 5.0);
    EXPECT_THROW(bc.at(6.0), Error);
}

TEST(Universe, RowsAreAssembledFromBondLoadings) {
    const MarketParams& p = preset();
    const BondCoefficients bc = solve_bond_odes(p, 10.0);
    const AssetUniverse u = build_universe(p, bc);
    const ClosedFormBonds cf(p);
    const Mat24 SX = p.SigmaX();
    EXPECT_LT((u.Sigma.row(0) - cf.A1(3.0).transpose() * SX).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((u.Sigma.row(1) - cf.A1(10.0).transpose() * SX).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((u.Sigma.row(2) - cf.A1R(10.0).transpose() * SX - p.sigma_Pi.transpose()).cwiseAbs().maxCoeff(),
              1e-10);
    EXPECT_EQ(u.Sigma.row(3), p.sigma_S.transpose());
    EXPECT_LT((u.SigmaT_inv * u.Sigma.transpose() - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Universe, DuplicateMaturitiesAreSingular) {
    const MarketParams& p = preset();
    const BondCoefficients bc = solve_bond_odes(p, 10.0);
    try {
        build_universe(p, bc, 3.0, 3.0, 10.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::SingularSigma);
    }
}

TEST(Market, FactorCovarianceMatchesQuadrature) {
    const MarketParams& p = preset();
    const Mat24 SX = p.SigmaX();
    const Mat2 Z2 = SX * SX.transpose();
    const double t = 7.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            auto f = [&](double s) {
                const Mat2 E = (-p.K() * (t - s)).exp();
                return (E * Z2 * E.transpose())(i, j);
            };
            EXPECT_NEAR(factor_covariance(p, t)(i, j), simpson(f, 0.0, t), 1e-12);
        }
}

}  // namespace
}  // namespace lcmi
