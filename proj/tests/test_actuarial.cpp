#include "common.hpp"
#include "lcmi/actuarial.hpp"

#include <gtest/gtest.h>

namespace lcmi {
namespace {

using testing::preset;
using testing::simpson;

TEST(Mortality, SurvivalIsMultiplicative) {
    const MortalityLaw law;
    for (double t : {0.0, 10.0, 37.5})
        for (double s : {0.5, 5.0, 20.0})
            EXPECT_NEAR(law.survival(t + s), law.survival(t) * law.survival_from(t, s), 1e-14);
}

TEST(Mortality, HazardIsMinusLogSurvivalSlope) {
    const MortalityLaw law;
    const double h = 1e-5;
    for (double t : {0.0, 20.0, 50.0}) {
        const double slope = -(std::log(law.survival(t + h)) - std::log(law.survival(std::max(t - h, 0.0)))) /
                             (t + h - std::max(t - h, 0.0));
        EXPECT_NEAR(law.hazard(t), slope, 1e-8 * std::max(1.0, law.hazard(t)));
    }
}

TEST(Mortality, ModalAgeAndBounds) {
    const MortalityLaw law;
    EXPECT_DOUBLE_EQ(law.survival(0.0), 1.0);
    // At the modal age the hazard equals 1/b.
    EXPECT_NEAR(law.hazard(law.m - law.x), 1.0 / law.b, 1e-15);
    double prev = 1.0;
    for (double t = 1.0; t <= 60.0; t += 1.0) {
        const double s = law.survival(t);
        EXPECT_LT(s, prev);
        EXPECT_GT(s, 0.0);
        prev = s;
    }
    EXPECT_THROW(survival(law, -1.0), Error);
}

TEST(Income, GrowthFactorIsIntegralOfGrowthRate) {
    const IncomeModel inc;
    for (double t : {1.0, 12.0, 29.0}) {
        const double oracle = simpson([&](double s) { return inc.growth(s); }, 0.0, t);
        EXPECT_NEAR(inc.log_growth_factor(t), oracle, 1e-12);
    }
    EXPECT_DOUBLE_EQ(income_path(inc, 0.0), 25.0);
    EXPECT_EQ(income_path(inc, 30.0), 0.0);
    EXPECT_EQ(income_path(inc, 45.0), 0.0);
}

TEST(Income, OffsetIsAConfigurableKnob) {
    IncomeModel a, b;
    b.age_offset = 35.0;
    EXPECT_NE(a.income(10.0), b.income(10.0));
    EXPECT_NEAR(b.growth(0.0), b.a0 + b.a1 * 35.0 + b.a2 * 35.0 * 35.0, 1e-15);
}

struct HumanCapitalOracle {
    const IncomeModel& inc;
    const MortalityLaw& law;
    const BondCoefficients& bc;

    double value(double t, const Vec2& X) const {
        return simpson(
            [&](double s) {
                const double tau = s - t;
                // Continuous extension of income up to T_R.
                const double y = inc.Y0 * std::exp(inc.log_growth_factor(s));
                return law.survival_from(t, tau) * y * std::exp(bc.A0R(tau) + bc.A1R(tau).dot(X));
            },
            t, inc.T_R, 4000);
    }
};

TEST(HumanCapital, MatchesSimpsonOracle) {
    const IncomeModel inc;
    const MortalityLaw law;
    const BondCoefficients bc = solve_bond_odes(preset(), 30.0);
    const HumanCapitalOracle oracle{inc, law, bc};
    for (double t : {0.0, 10.0, 25.0}) {
        const Vec2 X(0.03, -0.02);
        const double v = human_capital(inc, law, bc, t, X);
        EXPECT_NEAR(v, oracle.value(t, X), 1e-9 * v) << t;
    }
    // Frozen at the preset, X = 0.
    EXPECT_NEAR(human_capital(inc, law, bc, 0.0, Vec2::Zero()), 598.3846047, 1e-6);
    EXPECT_EQ(human_capital(inc, law, bc, 30.0, Vec2::Zero()), 0.0);
}

TEST(HumanCapital, GradientMatchesFiniteDifferences) {
    const IncomeModel inc;
    const MortalityLaw law;
    const BondCoefficients bc = solve_bond_odes(preset(), 30.0);
    const Vec2 X(-0.05, 0.04);
    const double h = 1e-6;
    for (double t : {0.0, 17.0}) {
        const Vec2 g = human_capital_gradient(inc, law, bc, t, X);
        for (int i = 0; i < 2; ++i) {
            const Vec2 e = Vec2::Unit(i) * h;
            const double fd =
                (human_capital(inc, law, bc, t, X + e) - human_capital(inc, law, bc, t, X - e)) / (2.0 * h);
            EXPECT_NEAR(g(i), fd, 1e-4 * std::abs(fd));
        }
    }
}

}  // namespace
}  // namespace lcmi
