#pragma once

#include "lcmi/core.hpp"
#include "lcmi/market.hpp"
#include "lcmi/quadrature.hpp"

#include <cmath>

namespace lcmi {

// Gompertz law: hazard (1/b) exp((x+t-m)/b).
struct MortalityLaw {
    double b = 9.5;
    double m = 86.3;
    double x = 35.0;

    double hazard(double t) const { return std::exp((x + t - m) / b) / b; }

    // Probability that a life aged x+t survives a further s years.
    double survival_from(double t, double s) const {
        return std::exp(-std::exp((x + t - m) / b) * std::expm1(s / b));
    }

    // {}_t p_x
    double survival(double t) const { return survival_from(0.0, t); }
};

inline void validate(const MortalityLaw& law) {
    require(law.b > 0.0 && std::isfinite(law.m) && std::isfinite(law.x), Errc::InvalidArgument,
            "mortality: b must be positive");
}

inline double hazard(const MortalityLaw& law, double t) { return law.hazard(t); }
inline double survival(const MortalityLaw& law, double t) {
    require(t >= 0.0, Errc::InvalidArgument, "survival: t must be nonnegative");
    return law.survival(t);
}

// Deterministic real income, Y_t = Y0 exp(int_0^t g), g(t) = a0 + a1 (o+t) + a2 (o+t)^2
// with o = age_offset, zero from retirement on.
struct IncomeModel {
    double Y0 = 25.0;
    double a0 = 0.1682;
    double a1 = -0.00646;
    double a2 = 0.00006;
    double age_offset = 45.0;
    double T_R = 30.0;

    double growth(double t) const {
        const double u = age_offset + t;
        return a0 + a1 * u + a2 * u * u;
    }

    double log_growth_factor(double t) const {
        const double o = age_offset, u = o + t;
        return a0 * t + a1 * (u * u - o * o) / 2.0 + a2 * (u * u * u - o * o * o) / 3.0;
    }

    double income(double t) const {
        if (t >= T_R) return 0.0;
        return Y0 * std::exp(log_growth_factor(t));
    }
};

inline double income_path(const IncomeModel& inc, double t) {
    require(t >= 0.0, Errc::InvalidArgument, "income: t must be nonnegative");
    return inc.income(t);
}

struct HumanCapital {
    double value = 0.0;
    Vec2 gradient = Vec2::Zero();
};

// Y~(t,X) = int_t^{T_R} {}_{s-t}p_{x+t} P^R(X,t,s) Y_s ds, together with its
// exact X-gradient (the exponent is affine in X).
inline HumanCapital human_capital_full(const IncomeModel& inc, const MortalityLaw& law, const BondCoefficients& bc,
                                       double t, const Vec2& X, const QuadOptions& opt = {}) {
    HumanCapital out;
    if (t >= inc.T_R || inc.Y0 == 0.0) return out;
    require(inc.T_R - t <= bc.tau_max() + 1e-9, Errc::InvalidArgument,
            "bond coefficients do not cover the income horizon");
    auto integrand = [&](double s) -> Eigen::Vector3d {
        const double tau = s - t;
        const auto st = bc.at(tau);
        const Vec2 a1r = st.segment<2>(3);
        const double v = law.survival_from(t, tau) * std::exp(st(5) + a1r.dot(X)) * inc.income(s);
        return Eigen::Vector3d(v, v * a1r(0), v * a1r(1));
    };
    const Eigen::Vector3d r = integrate(integrand, t, inc.T_R, opt);
    out.value = r(0);
    out.gradient = r.segment<2>(1);
    return out;
}

inline double human_capital(const IncomeModel& inc, const MortalityLaw& law, const BondCoefficients& bc, double t,
                            const Vec2& X) {
    return human_capital_full(inc, law, bc, t, X).value;
}

inline Vec2 human_capital_gradient(const IncomeModel& inc, const MortalityLaw& law, const BondCoefficients& bc,
                                   double t, const Vec2& X) {
    return human_capital_full(inc, law, bc, t, X).gradient;
}

}  // namespace lcmi
