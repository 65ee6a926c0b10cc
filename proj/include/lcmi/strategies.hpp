#pragma once

#include "lcmi/actuarial.hpp"
#include "lcmi/market.hpp"
#include "lcmi/riccati.hpp"

#include <cmath>
#include <optional>

namespace lcmi {

struct HouseholdSpec {
    double gamma = 10.0;
    double theta = 0.0;
    double delta = 0.10;
    // Utility weights of the breadwinner and the rest of the family.
    double kappa1_w = 0.5;
    double kappa2_w = 0.5;
    double T_R = 30.0;
    double T = 60.0;
    double W0 = 35.0;
    MortalityLaw mortality{};
    IncomeModel income{};  // income.T_R is kept equal to T_R by make_model

    FSpec fspec() const { return FSpec{delta, T, kappa1_w, kappa2_w, mortality}; }
};

inline void validate(const HouseholdSpec& h) {
    require(h.gamma > 0.0, Errc::InvalidArgument, "gamma must be positive");
    if (h.gamma == 1.0) throw Error(Errc::GammaOne, "gamma = 1 is not covered");
    require(h.theta >= 0.0 && h.theta <= 1.0, Errc::InvalidArgument, "theta must lie in [0,1]");
    require(h.delta >= 0.0, Errc::InvalidArgument, "delta must be nonnegative");
    require(h.kappa1_w >= 0.0 && h.kappa2_w >= 0.0 && std::abs(h.kappa1_w + h.kappa2_w - 1.0) < 1e-12,
            Errc::InvalidArgument, "utility weights must be nonnegative and sum to 1");
    require(h.kappa2_w > 0.0, Errc::InvalidArgument, "kappa2 weight must be positive");
    require(h.T_R >= 0.0 && h.T_R < h.T, Errc::InvalidArgument, "need 0 <= T_R < T");
    validate(h.mortality);
}

struct ModelOptions {
    double bond_step = 1.0 / 252.0;
    double gamma_step = 1.0 / 252.0;
    double T1 = 3.0, T2 = 10.0, T3 = 10.0;
    bool check_existence = true;
};

// Everything needed to evaluate strategies for one (market, household).
struct Model {
    MarketParams market;
    HouseholdSpec household;
    BondCoefficients bonds;
    AssetUniverse assets;
    GammaSolution gammas;

    double gamma() const { return household.gamma; }
    double theta() const { return household.theta; }
};

inline Model make_model(const MarketParams& market, HouseholdSpec hh, const ModelOptions& opt = {}) {
    validate(hh);
    hh.income.T_R = hh.T_R;
    Model m;
    m.market = market;
    m.household = hh;
    const double tau_max = std::max({hh.T_R, opt.T1, opt.T2, opt.T3, 1e-3});
    m.bonds = solve_bond_odes(market, tau_max, opt.bond_step);
    m.assets = build_universe(market, m.bonds, opt.T1, opt.T2, opt.T3);
    m.gammas = solve_gamma_system(build_coefficients(market, hh.gamma, hh.theta), hh.T, opt.gamma_step);
    if (opt.check_existence) {
        m.gammas.existence = existence_check(market, hh.gamma, hh.theta, hh.T);
        if (!m.gammas.existence->ok())
            throw Error(Errc::ExistenceFail, "global existence conditions fail for gamma=" +
                                                 std::to_string(hh.gamma) + ", theta=" + std::to_string(hh.theta));
    }
    return m;
}

// Same market and household, different money-illusion degree.
inline Model with_theta(const Model& m, double theta, const ModelOptions& opt = {}) {
    HouseholdSpec h = m.household;
    h.theta = theta;
    return make_model(m.market, h, opt);
}

struct Decomposition {
    Vec4 smd = Vec4::Zero();
    Vec4 ifhd = Vec4::Zero();
    Vec4 ithd = Vec4::Zero();
};

enum class Phase { primary = 1, retired = 2, widowed = 3 };

inline const char* phase_name(Phase p) {
    switch (p) {
        case Phase::primary: return "primary";
        case Phase::retired: return "retired";
        case Phase::widowed: return "widowed";
    }
    return "?";
}

struct PolicyEvaluation {
    Phase phase = Phase::primary;
    double t = 0.0;
    Vec2 X = Vec2::Zero();
    double W_R = 0.0;
    double W_Y = 0.0;  // surplus W_R + human capital
    double human_capital = 0.0;
    double f1 = 0.0, f2 = 0.0;
    std::optional<double> c1;
    double c2 = 0.0;
    Vec4 alpha = Vec4::Zero();
    Vec4 beta = Vec4::Zero();
    std::optional<double> premium_I;
    std::optional<double> face_value;
    double bequest_wealth_ratio = 0.0;
    Decomposition decomposition;
};

namespace detail {

inline Decomposition decompose(const Model& m, const Vec2& X, double fval, const Vec2& fgrad) {
    const double g = m.gamma(), th = m.theta();
    const Mat4& Si = m.assets.SigmaT_inv;
    Decomposition d;
    d.smd = Si * price_of_risk(m.market, X) / g;
    d.ifhd = ((g - 1.0) / g) * (1.0 - th) * (Si * m.market.sigma_Pi);
    d.ithd = Si * (m.market.SigmaX().transpose() * (fgrad / fval));
    return d;
}

// Sigma'^{-1}[(Lambda - sigma_Pi + theta(1-gamma) sigma_Pi)/gamma + Sigma_X' grad/f] + Sigma'^{-1} sigma_Pi
inline Vec4 beta_from(const Model& m, const Vec2& X, double fval, const Vec2& fgrad) {
    const double g = m.gamma(), th = m.theta();
    const Vec4& sPi = m.market.sigma_Pi;
    const Vec4 inner = (price_of_risk(m.market, X) - sPi + th * (1.0 - g) * sPi) / g +
                       m.market.SigmaX().transpose() * (fgrad / fval);
    return m.assets.SigmaT_inv * inner + m.assets.SigmaT_inv * sPi;
}

}  // namespace detail

inline void check_horizon(const Model& m, double t) {
    require(t >= 0.0, Errc::InvalidArgument, "t must be nonnegative");
    if (t > m.household.T - 1e-6)
        throw Error(Errc::HorizonExhausted, "t=" + std::to_string(t) + " is within 1e-6 of the horizon");
}

inline PolicyEvaluation policy_phase1(const Model& m, double t, double W_R, const Vec2& X) {
    check_horizon(m, t);
    require(t < m.household.T_R, Errc::InvalidArgument, "phase 1 requires t < T_R");
    const auto& h = m.household;
    const HumanCapital hc = human_capital_full(h.income, h.mortality, m.bonds, t, X);
    PolicyEvaluation e;
    e.phase = Phase::primary;
    e.t = t;
    e.X = X;
    e.W_R = W_R;
    e.human_capital = hc.value;
    e.W_Y = W_R + hc.value;
    if (!(e.W_Y > 0.0)) throw Error(Errc::NonpositiveSurplus, "W_R + human capital must be positive");
    const FPair fp = eval_f_pair(m.gammas, h.fspec(), X, t);
    const double g = h.gamma;
    const double w1 = std::pow(h.kappa1_w, 1.0 / g), w2 = std::pow(h.kappa2_w, 1.0 / g);
    e.f1 = fp.f1.value;
    e.f2 = fp.f2.value;
    e.c1 = w1 * e.W_Y / e.f2;
    e.c2 = w2 * e.W_Y / e.f2;
    e.beta = detail::beta_from(m, X, e.f2, fp.f2.grad);
    e.decomposition = detail::decompose(m, X, e.f2, fp.f2.grad);
    const double lam = h.mortality.hazard(t);
    e.premium_I = lam * (w2 * e.W_Y * e.f1 / e.f2 - W_R);
    e.face_value = *e.premium_I / lam;
    e.bequest_wealth_ratio = w2 * e.f1 / e.f2;
    // Y~ xi = Sigma'^{-1} Sigma_X' grad Y~ + Y~ Sigma'^{-1} sigma_Pi
    const Vec4 yxi = m.assets.SigmaT_inv * (m.market.SigmaX().transpose() * hc.gradient) +
                     hc.value * (m.assets.SigmaT_inv * m.market.sigma_Pi);
    e.alpha = (e.W_Y * e.beta - yxi) / W_R;
    return e;
}

inline PolicyEvaluation policy_phase2(const Model& m, double t, double W_R, const Vec2& X) {
    check_horizon(m, t);
    require(t >= m.household.T_R, Errc::InvalidArgument, "phase 2 requires t >= T_R");
    if (!(W_R > 0.0)) throw Error(Errc::NonpositiveWealth, "W_R must be positive");
    const auto& h = m.household;
    PolicyEvaluation e;
    e.phase = Phase::retired;
    e.t = t;
    e.X = X;
    e.W_R = W_R;
    e.W_Y = W_R;
    const FPair fp = eval_f_pair(m.gammas, h.fspec(), X, t);
    const double g = h.gamma;
    const double w1 = std::pow(h.kappa1_w, 1.0 / g), w2 = std::pow(h.kappa2_w, 1.0 / g);
    e.f1 = fp.f1.value;
    e.f2 = fp.f2.value;
    e.c1 = w1 * W_R / e.f2;
    e.c2 = w2 * W_R / e.f2;
    e.beta = detail::beta_from(m, X, e.f2, fp.f2.grad);
    e.alpha = e.beta;
    e.decomposition = detail::decompose(m, X, e.f2, fp.f2.grad);
    const double lam = h.mortality.hazard(t);
    e.premium_I = lam * W_R * (w2 * e.f1 / e.f2 - 1.0);
    e.face_value = *e.premium_I / lam;
    e.bequest_wealth_ratio = w2 * e.f1 / e.f2;
    return e;
}

// After the breadwinner's death: only c2 and the portfolio remain.
inline PolicyEvaluation policy_phase3(const Model& m, double t, double W_R, const Vec2& X) {
    check_horizon(m, t);
    if (!(W_R > 0.0)) throw Error(Errc::NonpositiveWealth, "W_R must be positive");
    const auto& h = m.household;
    PolicyEvaluation e;
    e.phase = Phase::widowed;
    e.t = t;
    e.X = X;
    e.W_R = W_R;
    e.W_Y = W_R;
    const FPair fp = eval_f_pair(m.gammas, h.fspec(), X, t);
    e.f1 = fp.f1.value;
    e.f2 = fp.f2.value;
    e.c2 = W_R / e.f1;
    e.beta = detail::beta_from(m, X, e.f1, fp.f1.grad);
    e.alpha = e.beta;
    e.decomposition = detail::decompose(m, X, e.f1, fp.f1.grad);
    e.bequest_wealth_ratio = 1.0;
    return e;
}

inline PolicyEvaluation evaluate_policy(const Model& m, double t, double W_R, const Vec2& X, bool alive = true) {
    if (!alive) return policy_phase3(m, t, W_R, X);
    return t < m.household.T_R ? policy_phase1(m, t, W_R, X) : policy_phase2(m, t, W_R, X);
}

inline Decomposition decompose_beta(const Model& m, double t, const Vec2& X) {
    check_horizon(m, t);
    const FPair fp = eval_f_pair(m.gammas, m.household.fspec(), X, t);
    return detail::decompose(m, X, fp.f2.value, fp.f2.grad);
}

// kappa2^{1/gamma} f1 / f2; at t = T the ratio is 0/0 and is taken as its limit.
inline double bequest_wealth_ratio(const Model& m, double t, const Vec2& X) {
    const auto& h = m.household;
    if (h.kappa1_w == 0.0) return 1.0;
    const double tt = std::min(t, h.T - 1e-6);
    const FPair fp = eval_f_pair(m.gammas, h.fspec(), X, tt);
    return std::pow(h.kappa2_w, 1.0 / h.gamma) * fp.f1.value / fp.f2.value;
}

// G(t,W,pi,X) = W^{1-g} pi^{theta(1-g)} f2^g / (1-g)
inline double value_function(const Model& m, double t, double W_Y, double pi, const Vec2& X) {
    const double g = m.gamma();
    const double f2 = eval_f_pair(m.gammas, m.household.fspec(), X, t).f2.value;
    return std::pow(W_Y, 1.0 - g) * std::pow(pi, m.theta() * (1.0 - g)) * std::pow(f2, g) / (1.0 - g);
}

// Fraction L of initial surplus such that the optimum started from W0(1-L)
// is worth v_sub; f2_theta0 is f2(0, X0) of the theta = 0 problem.
inline double welfare_loss(double gamma, double f2_theta0, double v_sub, double W0_Y) {
    const double s = (1.0 - gamma) * v_sub;
    if (!(s > 0.0)) throw Error(Errc::InconsistentSign, "(1-gamma) v_sub must be positive");
    return 1.0 - std::pow(s, 1.0 / (1.0 - gamma)) / (std::pow(f2_theta0, gamma / (1.0 - gamma)) * W0_Y);
}

inline double welfare_loss(const Model& theta0, double v_sub, const Vec2& X0, double W0) {
    const auto& h = theta0.household;
    require(theta0.theta() == 0.0, Errc::InvalidArgument, "welfare loss needs the theta = 0 model");
    const double f2 = eval_f_pair(theta0.gammas, h.fspec(), X0, 0.0).f2.value;
    const double W0Y = W0 + human_capital(h.income, h.mortality, theta0.bonds, 0.0, X0);
    return welfare_loss(h.gamma, f2, v_sub, W0Y);
}

}  // namespace lcmi
