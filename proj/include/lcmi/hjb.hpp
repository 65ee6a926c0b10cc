#pragma once

#include "lcmi/strategies.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace lcmi {

struct HjbState {
    double t = 1.0;
    double w = 100.0;  // W_R; in the primary phase the surplus is W_R + Y~(t,X)
    double pi = 1.0;
    Vec2 X = Vec2::Zero();
};

struct ResidualSample {
    Phase phase = Phase::primary;
    HjbState state;
    double residual = 0.0;
    double scale = 0.0;
    double relative = 0.0;
};

// Candidate G = w^{1-g} pi^{theta(1-g)} F^g / (1-g) and its partial derivatives.
struct CandidateDerivs {
    double G = 0, Gt = 0, Gw = 0, Gww = 0, Gpi = 0, Gpipi = 0, Gwpi = 0;
    Vec2 GX = Vec2::Zero(), GwX = Vec2::Zero(), GpiX = Vec2::Zero();
    Mat2 GXX = Mat2::Zero();
};

namespace detail {

inline CandidateDerivs candidate_derivs(double g, double theta, double w, double pi, const FDerivs& F) {
    CandidateDerivs d;
    const double k = theta * (1.0 - g);
    const double base = std::pow(w, -g) * std::pow(pi, k) * std::pow(F.value, g);
    d.G = base * w / (1.0 - g);
    d.Gw = base;
    d.Gww = -g * base / w;
    d.Gt = g * d.G * F.dt / F.value;
    d.Gpi = k * d.G / pi;
    d.Gpipi = k * (k - 1.0) * d.G / (pi * pi);
    d.Gwpi = k * d.Gw / pi;
    const Vec2 lg = F.grad / F.value;
    d.GX = g * d.G * lg;
    d.GXX = g * d.G * (F.hess / F.value + (g - 1.0) * lg * lg.transpose());
    d.GwX = g * d.Gw * lg;
    d.GpiX = k * g * d.G * lg / pi;
    return d;
}

inline double crra(double c, double g, double pi, double theta) {
    return std::pow(c, 1.0 - g) * std::pow(pi, theta * (1.0 - g)) / (1.0 - g);
}

}  // namespace detail

struct HjbControls {
    double c1 = 0.0, c2 = 0.0, I = 0.0;
    Vec4 portfolio = Vec4::Zero();  // alpha (phases 2-3 and after death) or beta (primary)
};

struct HjbOptions {
    bool finite_difference = false;
    double fd_step = 1e-5;  // relative step for w, pi, t; absolute for X
};

namespace detail {

// Candidate derivatives of G at (t, w, pi, X) built on F = f1 (use_f1) or f2.
inline CandidateDerivs derivs_at(const Model& m, bool use_f1, double t, double w, double pi, const Vec2& X,
                                 const HjbOptions& opt) {
    const double g = m.gamma(), th = m.theta();
    if (!opt.finite_difference) {
        const FPair fp = eval_f_pair(m.gammas, m.household.fspec(), X, t);
        return candidate_derivs(g, th, w, pi, use_f1 ? fp.f1 : fp.f2);
    }
    auto G = [&](double tt, double ww, double pp, const Vec2& xx) {
        const FPair fp = eval_f_pair(m.gammas, m.household.fspec(), xx, tt);
        const double F = use_f1 ? fp.f1.value : fp.f2.value;
        return std::pow(ww, 1.0 - g) * std::pow(pp, th * (1.0 - g)) * std::pow(F, g) / (1.0 - g);
    };
    const double hw = opt.fd_step * w, hp = opt.fd_step * pi, ht = opt.fd_step * std::max(t, 1.0);
    const double hx = opt.fd_step;
    CandidateDerivs d;
    d.G = G(t, w, pi, X);
    d.Gt = (G(t + ht, w, pi, X) - G(t - ht, w, pi, X)) / (2 * ht);
    d.Gw = (G(t, w + hw, pi, X) - G(t, w - hw, pi, X)) / (2 * hw);
    d.Gww = (G(t, w + hw, pi, X) - 2 * d.G + G(t, w - hw, pi, X)) / (hw * hw);
    d.Gpi = (G(t, w, pi + hp, X) - G(t, w, pi - hp, X)) / (2 * hp);
    d.Gpipi = (G(t, w, pi + hp, X) - 2 * d.G + G(t, w, pi - hp, X)) / (hp * hp);
    d.Gwpi = (G(t, w + hw, pi + hp, X) - G(t, w + hw, pi - hp, X) - G(t, w - hw, pi + hp, X) +
              G(t, w - hw, pi - hp, X)) /
             (4 * hw * hp);
    for (int i = 0; i < 2; ++i) {
        const Vec2 ei = Vec2::Unit(i) * hx;
        d.GX(i) = (G(t, w, pi, X + ei) - G(t, w, pi, X - ei)) / (2 * hx);
        d.GwX(i) = (G(t, w + hw, pi, X + ei) - G(t, w + hw, pi, X - ei) - G(t, w - hw, pi, X + ei) +
                    G(t, w - hw, pi, X - ei)) /
                   (4 * hw * hx);
        d.GpiX(i) = (G(t, w, pi + hp, X + ei) - G(t, w, pi + hp, X - ei) - G(t, w, pi - hp, X + ei) +
                     G(t, w, pi - hp, X - ei)) /
                    (4 * hp * hx);
        for (int j = 0; j < 2; ++j) {
            const Vec2 ej = Vec2::Unit(j) * hx;
            d.GXX(i, j) = (G(t, w, pi, X + ei + ej) - G(t, w, pi, X + ei - ej) - G(t, w, pi, X - ei + ej) +
                           G(t, w, pi, X - ei - ej)) /
                          (4 * hx * hx);
        }
    }
    return d;
}

}  // namespace detail

// Closed-form controls at a state, taken from the strategy module.
inline HjbControls optimal_controls(const Model& m, Phase phase, const HjbState& s) {
    HjbControls c;
    if (phase == Phase::widowed) {
        const auto e = policy_phase3(m, s.t, s.w, s.X);
        c.c2 = e.c2;
        c.portfolio = e.alpha;
        return c;
    }
    const auto e = phase == Phase::primary ? policy_phase1(m, s.t, s.w, s.X) : policy_phase2(m, s.t, s.w, s.X);
    c.c1 = *e.c1;
    c.c2 = e.c2;
    c.I = *e.premium_I;
    c.portfolio = phase == Phase::primary ? e.beta : e.alpha;
    return c;
}

// Residual of the HJB equation of `phase` with the given controls, assembled
// term by term; the relative residual divides by the largest summand.
inline ResidualSample hjb_residual_with(const Model& m, Phase phase, const HjbState& s, const HjbControls& u,
                                        const HjbOptions& opt = {}) {
    const auto& h = m.household;
    const auto& mk = m.market;
    require(s.t >= 0.0 && s.t < h.T - 1e-3, Errc::DomainEdge, "state must satisfy t < T - 1e-3");
    require(s.w > 0.0 && s.pi > 0.0, Errc::DomainEdge, "wealth and price level must be positive");
    if (phase == Phase::primary)
        require(s.t < h.T_R, Errc::DomainEdge, "primary phase requires t < T_R");
    if (phase == Phase::retired)
        require(s.t >= h.T_R, Errc::DomainEdge, "retired phase requires t >= T_R");
    const double g = h.gamma, th = h.theta;
    double yt = 0.0;
    if (phase == Phase::primary) yt = human_capital(h.income, h.mortality, m.bonds, s.t, s.X);
    const double w = s.w + yt;  // the state variable of the value function
    const bool use_f1 = phase == Phase::widowed;
    const CandidateDerivs d = detail::derivs_at(m, use_f1, s.t, w, s.pi, s.X, opt);

    const Vec4 Lam = price_of_risk(mk, s.X);
    const Vec4& sPi = mk.sigma_Pi;
    const Mat24 SX = mk.SigmaX();
    const Vec4 eta = m.assets.Sigma.transpose() * u.portfolio - sPi;
    const double r = real_short_rate(mk, s.X), pie = expected_inflation(mk, s.X);
    const double lam = h.mortality.hazard(s.t);

    std::vector<double> terms;
    if (phase == Phase::widowed) {
        terms.push_back(detail::crra(u.c2, g, s.pi, th));
        terms.push_back(-h.delta * d.G);
        terms.push_back(-d.Gw * u.c2);
    } else {
        if (h.kappa1_w > 0.0) terms.push_back(h.kappa1_w * detail::crra(u.c1, g, s.pi, th));
        terms.push_back(h.kappa2_w * detail::crra(u.c2, g, s.pi, th));
        // Bequest: the widowed value at wealth W_R + I/lambda.
        const double wb = s.w + u.I / lam;
        require(wb > 0.0, Errc::DomainEdge, "bequest wealth must be positive");
        const FPair fp = eval_f_pair(m.gammas, h.fspec(), s.X, s.t);
        const CandidateDerivs b = detail::candidate_derivs(g, th, wb, s.pi, fp.f1);
        terms.push_back(h.kappa2_w * lam * b.G);
        terms.push_back(-(lam + h.delta) * d.G);
        terms.push_back(-d.Gw * (u.I + u.c1 + u.c2));
        if (phase == Phase::primary) terms.push_back(d.Gw * lam * yt);
    }
    terms.push_back(d.Gt);
    terms.push_back(-d.GX.dot(mk.K() * s.X));
    terms.push_back(d.Gpi * s.pi * pie);
    terms.push_back(d.Gw * w * r);
    terms.push_back(d.Gw * w * eta.dot(Lam - sPi));
    terms.push_back(0.5 * d.Gww * w * w * eta.squaredNorm());
    terms.push_back(0.5 * d.Gpipi * s.pi * s.pi * sPi.squaredNorm());
    terms.push_back(0.5 * (SX.transpose() * d.GXX * SX).trace());
    terms.push_back(w * eta.dot(SX.transpose() * d.GwX));
    terms.push_back(d.Gwpi * w * s.pi * eta.dot(sPi));
    terms.push_back(s.pi * d.GpiX.dot(SX * sPi));

    ResidualSample out;
    out.phase = phase;
    out.state = s;
    for (double v : terms) {
        out.residual += v;
        out.scale = std::max(out.scale, std::abs(v));
    }
    out.relative = out.residual / out.scale;
    return out;
}

inline ResidualSample hjb_residual(const Model& m, Phase phase, const HjbState& s, const HjbOptions& opt = {}) {
    return hjb_residual_with(m, phase, s, optimal_controls(m, phase, s), opt);
}

// First-order conditions at the closed-form controls. Each entry is a
// relative mismatch.
struct FocReport {
    double c1 = 0.0;
    double c2 = 0.0;
    double portfolio = 0.0;
    double insurance = 0.0;
    double max() const { return std::max({c1, c2, portfolio, insurance}); }
};

inline FocReport foc_check(const Model& m, Phase phase, const HjbState& s) {
    const auto& h = m.household;
    const double g = h.gamma, th = h.theta, k = th * (1.0 - g);
    const HjbControls u = optimal_controls(m, phase, s);
    double yt = 0.0;
    if (phase == Phase::primary) yt = human_capital(h.income, h.mortality, m.bonds, s.t, s.X);
    const double w = s.w + yt;
    const CandidateDerivs d = detail::derivs_at(m, phase == Phase::widowed, s.t, w, s.pi, s.X, {});
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); };
    auto mu = [&](double c) { return std::pow(c, -g) * std::pow(s.pi, k); };
    FocReport r;
    if (phase == Phase::widowed) {
        r.c2 = rel(mu(u.c2), d.Gw);
    } else {
        if (h.kappa1_w > 0.0) r.c1 = rel(h.kappa1_w * mu(u.c1), d.Gw);
        r.c2 = rel(h.kappa2_w * mu(u.c2), d.Gw);
        const FPair fp = eval_f_pair(m.gammas, h.fspec(), s.X, s.t);
        const CandidateDerivs b =
            detail::candidate_derivs(g, th, s.w + u.I / h.mortality.hazard(s.t), s.pi, fp.f1);
        r.insurance = rel(h.kappa2_w * b.Gw, d.Gw);
    }
    const Mat24 SX = m.market.SigmaX();
    const Vec4& sPi = m.market.sigma_Pi;
    const Vec4 eta = m.assets.Sigma.transpose() * u.portfolio - sPi;
    const Vec4 lin = d.Gw * w * (price_of_risk(m.market, s.X) - sPi) + w * (SX.transpose() * d.GwX) +
                     d.Gwpi * w * s.pi * sPi;
    const Vec4 quad = d.Gww * w * w * eta;
    r.portfolio = (lin + quad).cwiseAbs().maxCoeff() / std::max(lin.cwiseAbs().maxCoeff(), quad.cwiseAbs().maxCoeff());
    return r;
}

struct SamplingBox {
    double x1 = 0.1454, x2 = 0.1696;
    double w_lo = 10.0, w_hi = 500.0;
    double pi_lo = 0.5, pi_hi = 3.0;
    double edge = 0.5;
};

inline std::vector<HjbState> sample_states(const Model& m, Phase phase, int n, std::uint64_t seed,
                                           const SamplingBox& box = {}) {
    const auto& h = m.household;
    double t_lo = box.edge, t_hi = h.T - box.edge;
    if (phase == Phase::primary) t_hi = std::min(t_hi, h.T_R - 1e-9);
    if (phase == Phase::retired) t_lo = std::max(t_lo, h.T_R);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<HjbState> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        HjbState s;
        s.t = t_lo + (t_hi - t_lo) * U(rng);
        s.w = box.w_lo + (box.w_hi - box.w_lo) * U(rng);
        s.pi = box.pi_lo + (box.pi_hi - box.pi_lo) * U(rng);
        s.X << box.x1 * (2 * U(rng) - 1), box.x2 * (2 * U(rng) - 1);
        out.push_back(s);
    }
    return out;
}

struct HjbPhaseSummary {
    Phase phase = Phase::primary;
    int samples = 0;
    double max_relative = 0.0;        // max |residual| / scale at the optimal controls
    double max_suboptimal = -INFINITY;  // max relative residual with c2 scaled by 1.1
    double max_fd_gap = 0.0;          // |relative(closed form) - relative(finite differences)|
    double max_foc = 0.0;
    std::vector<ResidualSample> residuals;
};

inline HjbPhaseSummary verify_hjb_phase(const Model& m, Phase phase, int samples, std::uint64_t seed,
                                        bool finite_difference = true, const SamplingBox& box = {}) {
    HjbPhaseSummary out;
    out.phase = phase;
    out.samples = samples;
    for (const HjbState& s : sample_states(m, phase, samples, seed, box)) {
        const HjbControls u = optimal_controls(m, phase, s);
        const ResidualSample r = hjb_residual_with(m, phase, s, u);
        out.max_relative = std::max(out.max_relative, std::abs(r.relative));
        HjbControls sub = u;
        sub.c2 *= 1.1;
        out.max_suboptimal = std::max(out.max_suboptimal, hjb_residual_with(m, phase, s, sub).relative);
        if (finite_difference) {
            const ResidualSample fd = hjb_residual_with(m, phase, s, u, HjbOptions{true});
            out.max_fd_gap = std::max(out.max_fd_gap, std::abs(fd.relative - r.relative));
        }
        out.max_foc = std::max(out.max_foc, foc_check(m, phase, s).max());
        out.residuals.push_back(r);
    }
    return out;
}

}  // namespace lcmi
