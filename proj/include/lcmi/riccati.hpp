#pragma once

#include "lcmi/actuarial.hpp"
#include "lcmi/core.hpp"
#include "lcmi/market.hpp"
#include "lcmi/ode.hpp"
#include "lcmi/quadrature.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace lcmi {

// Coefficients of the Gamma system for given (gamma, theta). B2, B12, D2, D1
// are stored even though they are fixed functions of the others, so callers
// can audit the identities.
struct GammaCoefficients {
    double gamma = 2.0;
    double theta = 0.0;
    Mat24 SigmaX = Mat24::Zero();
    Mat2 Z0, Z1, Z2, B2, B12, D2;
    Vec2 B11, B0, D1;
    double D0 = 0.0;
};

inline GammaCoefficients build_coefficients(const MarketParams& p, double gamma, double theta) {
    require(gamma > 0.0, Errc::InvalidArgument, "gamma must be positive");
    if (gamma == 1.0) throw Error(Errc::GammaOne, "gamma = 1 (log utility) is not covered");
    require(theta >= 0.0 && theta <= 1.0, Errc::InvalidArgument, "theta must lie in [0,1]");
    GammaCoefficients c;
    c.gamma = gamma;
    c.theta = theta;
    c.SigmaX = p.SigmaX();
    const double a = (1.0 - gamma) / gamma;
    const double a2g = (1.0 - gamma) / (gamma * gamma);
    const Vec4 lp = p.Lambda0 - p.sigma_Pi;
    const Mat24& SX = c.SigmaX;
    c.Z2 = SX * SX.transpose();
    c.Z1 = a * SX * p.Lambda1 - p.K();
    c.Z0 = a2g * p.Lambda1.transpose() * p.Lambda1;
    c.B2 = c.Z2;
    c.B11 = SX * (a * lp + theta * a * p.sigma_Pi);
    c.B12 = c.Z1.transpose();
    c.B0 = a * Vec2::UnitX() + a * theta * Vec2::UnitY() + a2g * p.Lambda1.transpose() * lp +
           theta * a * a * p.Lambda1.transpose() * p.sigma_Pi;
    c.D2 = 0.5 * c.Z2;
    c.D1 = c.B11;
    c.D0 = a * (p.delta_r + theta * p.delta_pi_e) + 0.5 * a2g * lp.squaredNorm() +
           0.5 * theta * a * (theta * a - 1.0) * p.sigma_Pi.squaredNorm() + theta * a * a * lp.dot(p.sigma_Pi);
    return c;
}

// State layout: Gamma2 (row-major 11,12,21,22), Gamma1 (1,2), Gamma0.
using GammaState = Eigen::Matrix<double, 7, 1>;

inline GammaState gamma_rhs(const GammaCoefficients& c, const GammaState& y) {
    Mat2 G2;
    G2 << y(0), y(1), y(2), y(3);
    const Vec2 G1 = y.segment<2>(4);
    const Mat2 dG2 = G2 * c.Z2 * G2 + c.Z1.transpose() * G2 + G2 * c.Z1 + c.Z0;
    const Vec2 dG1 = G2 * c.B2 * G1 + G2 * c.B11 + c.B12 * G1 + c.B0;
    const double dG0 = G1.dot(c.D2 * G1) + G1.dot(c.D1) +
                       0.5 * (c.SigmaX.transpose() * G2 * c.SigmaX).trace() + c.D0;
    GammaState d;
    d << dG2(0, 0), dG2(0, 1), dG2(1, 0), dG2(1, 1), dG1(0), dG1(1), dG0;
    return d;
}

struct ExistenceCheck {
    std::string name;
    bool passed = false;
    double value = 0.0;
};

struct ExistenceReport {
    enum class Regime { gamma_gt_1, gamma_in_01 };
    Regime regime = Regime::gamma_gt_1;
    bool indeterminate = false;
    std::vector<ExistenceCheck> checks;

    bool ok() const {
        if (indeterminate) return false;
        return std::all_of(checks.begin(), checks.end(), [](const ExistenceCheck& c) { return c.passed; });
    }
    const ExistenceCheck* find(const std::string& n) const {
        for (const auto& c : checks)
            if (c.name == n) return &c;
        return nullptr;
    }
};

class GammaSolution {
public:
    GammaSolution() = default;
    GammaSolution(GammaCoefficients c, Trajectory<7> traj) : coeffs_(std::move(c)), traj_(std::move(traj)) {}

    const GammaCoefficients& coefficients() const { return coeffs_; }
    const Trajectory<7>& trajectory() const { return traj_; }
    double tau_max() const { return traj_.t_max(); }
    double step() const { return traj_.step(); }
    double gamma() const { return coeffs_.gamma; }
    double theta() const { return coeffs_.theta; }

    GammaState state(double tau) const { return traj_(check(tau)); }
    GammaState rate(double tau) const { return traj_.derivative(check(tau)); }

    double Gamma0(double tau) const { return state(tau)(6); }
    Vec2 Gamma1(double tau) const { return state(tau).segment<2>(4); }
    Mat2 Gamma2(double tau) const { return to_mat(state(tau)); }

    static Mat2 to_mat(const GammaState& s) {
        Mat2 m;
        m << s(0), s(1), s(2), s(3);
        return m;
    }

    std::optional<ExistenceReport> existence;

private:
    double check(double tau) const {
        require(tau >= 0.0 && tau <= tau_max() + 1e-9, Errc::InvalidArgument,
                "tau " + std::to_string(tau) + " outside the solved Gamma grid");
        return tau;
    }
    GammaCoefficients coeffs_;
    Trajectory<7> traj_;
};

inline GammaSolution solve_gamma_system(const GammaCoefficients& c, double T, double step = 1.0 / 252.0) {
    require(c.Z0.allFinite() && c.Z1.allFinite() && c.B0.allFinite() && std::isfinite(c.D0), Errc::InvalidArgument,
            "non-finite Gamma coefficients");
    auto rhs = [&](double, const GammaState& y) { return gamma_rhs(c, y); };
    auto symmetrize = [](GammaState& y) {
        const double off = 0.5 * (y(1) + y(2));
        y(1) = off;
        y(2) = off;
    };
    return GammaSolution(c, rk4_solve<7>(rhs, GammaState::Zero(), T, step, symmetrize, 1e12));
}

// exp(Gamma0 + Gamma1'X + X'Gamma2 X / 2)
inline double eval_f(const GammaSolution& sol, const Vec2& X, double tau) {
    const GammaState s = sol.state(tau);
    const Mat2 G2 = GammaSolution::to_mat(s);
    return std::exp(s(6) + s.segment<2>(4).dot(X) + 0.5 * X.dot(G2 * X));
}

// ---------------------------------------------------------------------------
// Linear (Hamiltonian) route.

struct HamiltonianSystem {
    Mat4 H;
    std::vector<std::complex<double>> eigvals;  // sorted by real part, then imaginary
};

inline HamiltonianSystem hamiltonian(const GammaCoefficients& c) {
    HamiltonianSystem hs;
    hs.H.topLeftCorner<2, 2>() = -c.Z1;
    hs.H.topRightCorner<2, 2>() = -c.Z2;
    hs.H.bottomLeftCorner<2, 2>() = c.Z0;
    hs.H.bottomRightCorner<2, 2>() = c.Z1.transpose();
    Eigen::EigenSolver<Mat4> es(hs.H, false);
    for (int i = 0; i < 4; ++i) hs.eigvals.push_back(es.eigenvalues()(i));
    std::sort(hs.eigvals.begin(), hs.eigvals.end(), [](auto a, auto b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return hs;
}

struct RadonPoint {
    double tau = 0.0;
    Mat2 Q = Mat2::Identity();
    Mat2 P = Mat2::Zero();
    Mat2 Gamma2 = Mat2::Zero();
    double detQ = 1.0;
};

// (Q;P)(tau) = expm(H tau) (I;0) and Gamma2 = P Q^{-1} on n+1 equally spaced points.
// The flow is advanced one interval at a time from (I; Gamma2), since
// expm(H tau) (I;0) = expm(H h) (I; Gamma2(tau-h)) Q(tau-h); this keeps the
// ratio well conditioned when Q and P grow like e^{|lambda| tau}.
inline std::vector<RadonPoint> radon_solve(const GammaCoefficients& c, double T, int n = 600,
                                           bool throw_on_singular = true) {
    require(T > 0.0 && n > 0, Errc::InvalidArgument, "radon_solve: T and n must be positive");
    const Mat4 H = hamiltonian(c).H;
    const double h = T / n;
    const Mat4 E = (H * h).exp();
    std::vector<RadonPoint> out;
    out.reserve(static_cast<std::size_t>(n) + 1);
    out.push_back(RadonPoint{});
    bool broken = false;
    for (int k = 1; k <= n; ++k) {
        const RadonPoint& prev = out.back();
        RadonPoint pt;
        pt.tau = T * k / n;
        if (broken) {
            pt.Q.setConstant(std::numeric_limits<double>::quiet_NaN());
            pt.P = pt.Q;
            pt.Gamma2 = pt.Q;
            pt.detQ = 0.0;
            out.push_back(pt);
            continue;
        }
        const Mat2 Qs = E.topLeftCorner<2, 2>() + E.topRightCorner<2, 2>() * prev.Gamma2;
        const Mat2 Ps = E.bottomLeftCorner<2, 2>() + E.bottomRightCorner<2, 2>() * prev.Gamma2;
        pt.Q = Qs * prev.Q;
        pt.P = Ps * prev.Q;
        pt.detQ = Qs.determinant() * prev.detQ;
        if (std::abs(pt.detQ) < 1e-12 || std::abs(Qs.determinant()) < 1e-12) {
            if (throw_on_singular)
                throw Error(Errc::QSingular, "det Q vanishes near tau=" + std::to_string(pt.tau));
            pt.Gamma2.setConstant(std::numeric_limits<double>::quiet_NaN());
            broken = true;
        } else {
            pt.Gamma2 = Ps * Qs.inverse();
        }
        out.push_back(pt);
    }
    return out;
}

// Coefficients (b,c,d,j) of det(lambda I - A) = lambda^4 + b lambda^3 + c lambda^2 + d lambda + j
// by the Faddeev-LeVerrier recursion.
inline Eigen::Vector4d characteristic_polynomial(const Mat4& A) {
    Mat4 M = Mat4::Zero();
    double coef[5];
    coef[0] = 1.0;
    for (int k = 1; k <= 4; ++k) {
        M = A * M + coef[k - 1] * Mat4::Identity();
        coef[k] = -(A * M).trace() / k;
    }
    return Eigen::Vector4d(coef[1], coef[2], coef[3], coef[4]);
}

struct QuarticInvariants {
    double b, c, d, j, q, r, s, disc;
};

inline QuarticInvariants quartic_invariants(const Eigen::Vector4d& bcdj) {
    QuarticInvariants v{};
    v.b = bcdj(0);
    v.c = bcdj(1);
    v.d = bcdj(2);
    v.j = bcdj(3);
    const double b = v.b, c = v.c, d = v.d, j = v.j;
    v.q = (8 * c - 3 * b * b) / 8;
    v.r = (b * b * b - 4 * b * c + 8 * d) / 8;
    v.s = (-3 * b * b * b * b + 256 * j - 64 * b * d + 16 * b * b * c) / 256;
    const double q = v.q, r = v.r, s = v.s;
    v.disc = -4 * q * q * q * r * r - 27 * r * r * r * r + 256 * s * s * s + 16 * q * q * q * q * s +
             144 * q * r * r * s - 128 * q * q * s * s;
    return v;
}

inline ExistenceReport existence_check(const MarketParams& p, double gamma, double theta, double T,
                                       int scan_points = 600) {
    const GammaCoefficients c = build_coefficients(p, gamma, theta);
    ExistenceReport rep;
    auto add = [&](std::string n, bool ok, double v) { rep.checks.push_back({std::move(n), ok, v}); };
    if (gamma > 1.0) {
        rep.regime = ExistenceReport::Regime::gamma_gt_1;
        const double e1 = Eigen::SelfAdjointEigenSolver<Mat2>(c.Z2).eigenvalues().minCoeff();
        const Mat2 LL = p.Lambda1.transpose() * p.Lambda1;
        const double e2 = Eigen::SelfAdjointEigenSolver<Mat2>(LL).eigenvalues().minCoeff();
        add("min_eig_SigmaX_SigmaXT", e1 > 0.0, e1);
        add("min_eig_Lambda1T_Lambda1", e2 > 0.0, e2);
        return rep;
    }
    rep.regime = ExistenceReport::Regime::gamma_in_01;
    const HamiltonianSystem hs = hamiltonian(c);
    double radius = 0.0, gap = std::numeric_limits<double>::infinity();
    for (const auto& z : hs.eigvals) radius = std::max(radius, std::abs(z));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = i + 1; k < 4; ++k) gap = std::min(gap, std::abs(hs.eigvals[i] - hs.eigvals[k]));
    if (gap <= 1e-8 * std::max(radius, 1e-300)) rep.indeterminate = true;
    add("eigenvalue_gap", !rep.indeterminate, gap);
    const QuarticInvariants qi = quartic_invariants(characteristic_polynomial(hs.H));
    add("b", true, qi.b);
    add("c", true, qi.c);
    add("d", true, qi.d);
    add("j", true, qi.j);
    add("r", true, qi.r);
    add("disc_positive", qi.disc > 0.0, qi.disc);
    add("q_negative", qi.q < 0.0, qi.q);
    add("s_below_q2_over_4", qi.s < qi.q * qi.q / 4.0, qi.s - qi.q * qi.q / 4.0);
    const auto pts = radon_solve(c, T, scan_points, false);
    double min_det = std::numeric_limits<double>::infinity();
    double max_eig = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < pts.size(); ++k) {
        min_det = std::min(min_det, std::abs(pts[k].detQ));
        if (pts[k].Gamma2.allFinite()) {
            const Mat2 sym = 0.5 * (pts[k].Gamma2 + pts[k].Gamma2.transpose());
            max_eig = std::max(max_eig, Eigen::SelfAdjointEigenSolver<Mat2>(sym).eigenvalues().maxCoeff());
        } else {
            max_eig = std::numeric_limits<double>::infinity();
        }
    }
    add("min_abs_detQ", min_det >= 1e-12, min_det);
    add("Gamma2_negative_definite", max_eig < 0.0, max_eig);
    return rep;
}

// Solve and attach the existence report.
inline GammaSolution solve_gammas(const MarketParams& p, double gamma, double theta, double T,
                                  double step = 1.0 / 252.0) {
    GammaSolution sol = solve_gamma_system(build_coefficients(p, gamma, theta), T, step);
    sol.existence = existence_check(p, gamma, theta, T);
    return sol;
}

// ---------------------------------------------------------------------------
// f1 and f2 with X-derivatives and the calendar-time derivative.

struct FDerivs {
    double value = 0.0;
    Vec2 grad = Vec2::Zero();
    Mat2 hess = Mat2::Zero();
    double dt = 0.0;
};

struct FPair {
    FDerivs f1;
    FDerivs f2;
};

struct FSpec {
    double delta = 0.1;
    double T = 60.0;
    double kappa1_w = 0.5;
    double kappa2_w = 0.5;
    MortalityLaw mortality{};
};

// f1 = int_0^{T-t} e^{-delta tau/gamma} f(X,tau) dtau and
// f2 = k1^{1/g} int_0^{T-t} {}_tau p_{x+t} e^{-delta tau/gamma} f dtau + k2^{1/g} f1.
inline FPair eval_f_pair(const GammaSolution& sol, const FSpec& hs, const Vec2& X, double t,
                         const QuadOptions& opt = {1e-11, 1e-300, 4000}) {
    require(t <= hs.T + 1e-12, Errc::InvalidArgument, "t beyond the horizon");
    require(hs.T - t <= sol.tau_max() + 1e-9, Errc::InvalidArgument, "Gamma solution does not cover T - t");
    const double g = sol.gamma();
    const double rho = hs.delta / g;
    const double h = std::max(hs.T - t, 0.0);
    using V13 = Eigen::Matrix<double, 13, 1>;
    const MortalityLaw& law = hs.mortality;
    const double A = std::exp((law.x + t - law.m) / law.b);
    auto integrand = [&](double tau) -> V13 {
        const GammaState s = sol.state(tau);
        const Mat2 G2 = GammaSolution::to_mat(s);
        const Vec2 gr = s.segment<2>(4) + G2 * X;
        const double ef = std::exp(-rho * tau + s(6) + s.segment<2>(4).dot(X) + 0.5 * X.dot(G2 * X));
        const Mat2 hm = gr * gr.transpose() + G2;
        const double em1 = std::expm1(tau / law.b);
        const double pe = std::exp(-A * em1) * ef;
        V13 v;
        v << ef, ef * gr(0), ef * gr(1), ef * hm(0, 0), ef * hm(0, 1), ef * hm(1, 1), pe, pe * gr(0), pe * gr(1),
            pe * hm(0, 0), pe * hm(0, 1), pe * hm(1, 1), pe * em1;
        return v;
    };
    const V13 I = integrate(integrand, 0.0, h, opt);
    FPair out;
    auto unpack = [](FDerivs& d, const V13& v, int o) {
        d.value = v(o);
        d.grad << v(o + 1), v(o + 2);
        d.hess << v(o + 3), v(o + 4), v(o + 4), v(o + 5);
    };
    unpack(out.f1, I, 0);
    FDerivs S;
    unpack(S, I, 6);
    const double fe = std::exp(-rho * h) * eval_f(sol, X, h);
    out.f1.dt = -fe;
    S.dt = -law.survival_from(t, h) * fe - law.hazard(t) * I(12);
    const double w1 = std::pow(hs.kappa1_w, 1.0 / g), w2 = std::pow(hs.kappa2_w, 1.0 / g);
    out.f2.value = w1 * S.value + w2 * out.f1.value;
    out.f2.grad = w1 * S.grad + w2 * out.f1.grad;
    out.f2.hess = w1 * S.hess + w2 * out.f1.hess;
    out.f2.dt = w1 * S.dt + w2 * out.f1.dt;
    return out;
}

inline double eval_f1(const GammaSolution& sol, double delta, const Vec2& X, double t, double T) {
    FSpec s;
    s.delta = delta;
    s.T = T;
    s.kappa1_w = 0.0;
    s.kappa2_w = 1.0;
    return eval_f_pair(sol, s, X, t).f1.value;
}

inline double eval_f2(const GammaSolution& sol, const FSpec& hs, const Vec2& X, double t) {
    return eval_f_pair(sol, hs, X, t).f2.value;
}

inline Vec2 eval_f2_gradient(const GammaSolution& sol, const FSpec& hs, const Vec2& X, double t) {
    return eval_f_pair(sol, hs, X, t).f2.grad;
}

}  // namespace lcmi
