#include "common.hpp"
#include "lcmi/strategies.hpp"

#include <gtest/gtest.h>

namespace lcmi {
namespace {

using testing::model;
using testing::preset;

const Vec2 kOrigin = Vec2::Zero();

Model custom_model(double k1w, double Y0 = 25.0, double gamma = 10.0, double theta = 0.0) {
    HouseholdSpec h;
    h.gamma = gamma;
    h.theta = theta;
    h.kappa1_w = k1w;
    h.kappa2_w = 1.0 - k1w;
    h.income.Y0 = Y0;
    return make_model(preset(), h);
}

TEST(Decomposition, SmdMatchesPublishedRow) {
    const Decomposition d = decompose_beta(model(10.0, 0.0), 0.0, kOrigin);
    const Vec4 expected(-0.293846, 0.226313, 0.105499, 0.181331);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(d.smd(i), expected(i), 1e-3);
}

TEST(Decomposition, IfhdMatchesPublishedRows) {
    const std::vector<std::pair<double, Vec4>> rows = {
        {0.0, Vec4(-2.089113, 0.735923, 0.900000, 0.0)}, {0.2, Vec4(-1.671290, 0.588739, 0.720000, 0.0)},
        {0.4, Vec4(-1.253468, 0.441554, 0.540000, 0.0)}, {0.6, Vec4(-0.835645, 0.294369, 0.360000, 0.0)},
        {0.8, Vec4(-0.417823, 0.147185, 0.180000, 0.0)}, {1.0, Vec4::Zero()}};
    for (const auto& [th, row] : rows) {
        const Decomposition d = decompose_beta(model(10.0, th), 5.0, kOrigin);
        for (int i = 0; i < 4; ++i) EXPECT_NEAR(d.ifhd(i), row(i), 1e-3) << "theta=" << th << " i=" << i;
    }
}

TEST(Decomposition, IfhdIsLinearInOneMinusTheta) {
    const Vec4 base = decompose_beta(model(10.0, 0.0), 5.0, kOrigin).ifhd;
    double prev = base.norm() + 1.0;
    for (double th : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
        const Vec4 v = decompose_beta(model(10.0, th), 5.0, kOrigin).ifhd;
        EXPECT_LT((v - (1.0 - th) * base).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT(v.norm(), prev);
        prev = v.norm();
    }
    EXPECT_EQ(decompose_beta(model(10.0, 1.0), 5.0, kOrigin).ifhd, Vec4::Zero());
}

TEST(Decomposition, ComponentsSumToBeta) {
    for (double th : {0.0, 0.8})
        for (const Vec2& X : {Vec2(0.0, 0.0), Vec2(0.05, -0.1), Vec2(-0.12, 0.15)})
            for (double t : {2.0, 35.0}) {
                const PolicyEvaluation e = evaluate_policy(model(10.0, th), t, 80.0, X);
                const Decomposition& d = e.decomposition;
                EXPECT_LT((d.smd + d.ifhd + d.ithd - e.beta).cwiseAbs().maxCoeff(), 1e-12);
            }
}

// Assembles each term separately: solves against Sigma' instead of using the
// cached inverse and differentiates f2 numerically.
TEST(Policy, BetaMatchesTermByTermAssembly) {
    const Model& m = model(10.0, 0.0);
    const double t = 5.0, g = 10.0, h = 1e-5;
    const Vec2 X(0.03, -0.02);
    const PolicyEvaluation e = policy_phase1(m, t, 60.0, X);
    const auto fs = m.household.fspec();
    Vec2 grad;
    for (int i = 0; i < 2; ++i) {
        const Vec2 dx = Vec2::Unit(i) * h;
        grad(i) = (eval_f2(m.gammas, fs, X + dx, t) - eval_f2(m.gammas, fs, X - dx, t)) / (2 * h);
    }
    const double f2 = eval_f2(m.gammas, fs, X, t);
    const Eigen::PartialPivLU<Mat4> lu(m.assets.Sigma.transpose());
    const Vec4 smd = lu.solve(m.market.Lambda0 + m.market.Lambda1 * X) / g;
    const Vec4 ifhd = ((g - 1.0) / g) * lu.solve(m.market.sigma_Pi);
    const Vec4 ithd = lu.solve(m.market.SigmaX().transpose() * grad / f2);
    const Vec4 beta = smd + ifhd + ithd;
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(e.beta(i), beta(i), 1e-6 * (1.0 + std::abs(beta(i))));
    EXPECT_NEAR(*e.c1, std::pow(0.5, 1.0 / g) * e.W_Y / f2, 1e-12 * *e.c1);
}

TEST(Policy, ConsumptionRatioIsFixedByWeights) {
    const Model m = custom_model(0.3);
    for (double t : {1.0, 20.0, 40.0}) {
        const PolicyEvaluation e = evaluate_policy(m, t, 50.0, Vec2(0.02, 0.01));
        EXPECT_NEAR(*e.c1 / e.c2, std::pow(0.3 / 0.7, 0.1), 1e-13);
    }
}

TEST(Policy, FaceValueIsPremiumOverHazard) {
    const Model& m = model();
    const PolicyEvaluation e = policy_phase1(m, 10.0, 40.0, kOrigin);
    EXPECT_NEAR(*e.face_value, *e.premium_I / m.household.mortality.hazard(10.0), 1e-12 * std::abs(*e.face_value));
}

TEST(Policy, NoBreadwinnerWeightMeansNoInsurance) {
    const Model m = custom_model(0.0);
    const PolicyEvaluation e = policy_phase2(m, 40.0, 100.0, Vec2(0.01, -0.01));
    EXPECT_NEAR(*e.premium_I, 0.0, 1e-12);
    EXPECT_EQ(*e.c1, 0.0);
    EXPECT_EQ(bequest_wealth_ratio(m, 40.0, kOrigin), 1.0);
    EXPECT_EQ(bequest_wealth_ratio(m, 60.0, kOrigin), 1.0);
}

TEST(Policy, RetirementPremiumSignFollowsBequestRatio) {
    const Model& m = model();
    for (double t : {31.0, 40.0, 50.0, 58.0}) {
        const PolicyEvaluation e = policy_phase2(m, t, 100.0, kOrigin);
        EXPECT_EQ(*e.premium_I < 0.0, e.bequest_wealth_ratio < 1.0) << t;
    }
}

TEST(Policy, PrimaryPremiumVanishesAtItsRoot) {
    const Model& m = model();
    const double t = 10.0;
    const PolicyEvaluation probe = policy_phase1(m, t, 0.0, kOrigin);
    // W_R = k W^Y with W^Y = W_R + Y~ gives W_R = k Y~ / (1 - k).
    const double k = probe.bequest_wealth_ratio;
    const double W_R = k * probe.human_capital / (1.0 - k);
    EXPECT_NEAR(*policy_phase1(m, t, W_R, kOrigin).premium_I, 0.0, 1e-10 * W_R);
}

TEST(Policy, NoHumanCapitalMeansAlphaEqualsBeta) {
    const Model m = custom_model(0.5, 0.0);
    const PolicyEvaluation e = policy_phase1(m, 5.0, 30.0, Vec2(0.01, 0.02));
    EXPECT_LT((e.alpha - e.beta).cwiseAbs().maxCoeff(), 1e-12);
    const PolicyEvaluation r = policy_phase2(model(), 45.0, 30.0, kOrigin);
    EXPECT_EQ(r.alpha, r.beta);
}

TEST(Policy, ScaleInvariance) {
    const Model base = custom_model(0.5, 25.0);
    const double k = 3.7;
    const Model scaled = custom_model(0.5, 25.0 * k);
    const Vec2 X(0.02, -0.04);
    for (double t : {3.0, 40.0}) {
        const PolicyEvaluation a = evaluate_policy(base, t, 50.0, X);
        const PolicyEvaluation b = evaluate_policy(scaled, t, 50.0 * k, X);
        EXPECT_NEAR(*b.c1, k * *a.c1, 1e-10 * *b.c1);
        EXPECT_NEAR(b.c2, k * a.c2, 1e-10 * b.c2);
        EXPECT_NEAR(*b.premium_I, k * *a.premium_I, 1e-10 * std::abs(*b.premium_I));
        EXPECT_LT((b.alpha - a.alpha).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT((b.beta - a.beta).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_EQ(b.bequest_wealth_ratio, a.bequest_wealth_ratio);
    }
}

TEST(Policy, ErrorsAtDomainEdges) {
    const Model& m = model();
    EXPECT_THROW(policy_phase3(m, 60.0 - 5e-7, 10.0, kOrigin), Error);
    try {
        policy_phase2(m, 40.0, -1.0, kOrigin);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NonpositiveWealth);
    }
    try {
        policy_phase1(m, 5.0, -1e6, kOrigin);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NonpositiveSurplus);
    }
}

TEST(Policy, WidowedConsumptionUsesF1) {
    const Model& m = model();
    const PolicyEvaluation e = policy_phase3(m, 20.0, 70.0, kOrigin);
    EXPECT_FALSE(e.c1.has_value());
    EXPECT_FALSE(e.premium_I.has_value());
    EXPECT_DOUBLE_EQ(e.c2, 70.0 / e.f1);
}

TEST(Welfare, OptimumHasZeroLoss) {
    const Model& m = model(10.0, 0.0);
    const Vec2 X0 = kOrigin;
    const double W0 = m.household.W0;
    const double W0Y = W0 + human_capital(m.household.income, m.household.mortality, m.bonds, 0.0, X0);
    const double v = value_function(m, 0.0, W0Y, 1.0, X0);
    EXPECT_NEAR(welfare_loss(m, v, X0, W0), 0.0, 1e-12);
    const double v_half = value_function(m, 0.0, 0.5 * W0Y, 1.0, X0);
    EXPECT_NEAR(welfare_loss(m, v_half, X0, W0), 0.5, 1e-12);
    EXPECT_THROW(welfare_loss(m, -v, X0, W0), Error);
    EXPECT_THROW(welfare_loss(model(10.0, 0.4), v, X0, W0), Error);
}

}  // namespace
}  // namespace lcmi
