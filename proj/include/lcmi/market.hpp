#pragma once

#include "lcmi/core.hpp"
#include "lcmi/ode.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace lcmi {

// Two-factor affine market: real rate r = delta_r + X1, expected inflation
// pi_e = delta_pi_e + X2, dX = -K X dt + Sigma_X dZ, Lambda = Lambda0 + Lambda1 X.
struct MarketParams {
    double delta_r = 0.0;
    double delta_pi_e = 0.0;
    double delta_R = 0.0;
    double kappa1 = 1.0;
    double kappa2 = 1.0;
    Vec4 sigma1 = Vec4::Zero();
    Vec4 sigma2 = Vec4::Zero();
    Vec4 sigma_Pi = Vec4::Zero();
    Vec4 sigma_S = Vec4::Zero();
    double mu0 = 0.0;
    Vec2 mu1 = Vec2::Zero();
    Vec4 Lambda0 = Vec4::Zero();
    Mat42 Lambda1 = Mat42::Zero();

    Mat2 K() const { return Vec2(kappa1, kappa2).asDiagonal(); }

    Mat24 SigmaX() const {
        Mat24 s;
        s.row(0) = sigma1.transpose();
        s.row(1) = sigma2.transpose();
        return s;
    }

    // Rows (sigma1, sigma2, sigma_Pi, sigma_S).
    Mat4 stacked_vol() const {
        Mat4 m;
        m.row(0) = sigma1.transpose();
        m.row(1) = sigma2.transpose();
        m.row(2) = sigma_Pi.transpose();
        m.row(3) = sigma_S.transpose();
        return m;
    }
};

struct IdentityResiduals {
    double delta_R = 0.0;   // delta_R - (delta_r + delta_pi_e - sigma_Pi' Lambda0)
    double mu0 = 0.0;       // sigma_S' Lambda0 - mu0
    Vec2 mu1 = Vec2::Zero();  // sigma_S' Lambda1 - mu1'
};

inline IdentityResiduals identity_residuals(const MarketParams& p) {
    IdentityResiduals r;
    r.delta_R = p.delta_R - (p.delta_r + p.delta_pi_e - p.sigma_Pi.dot(p.Lambda0));
    r.mu0 = p.sigma_S.dot(p.Lambda0) - p.mu0;
    r.mu1 = (p.sigma_S.transpose() * p.Lambda1).transpose() - p.mu1;
    return r;
}

// Structural checks. The identities are checked to `identity_tol`; the
// preset satisfies them to about 1e-6 because its entries are rounded.
inline std::vector<std::string> validation_issues(const MarketParams& p, double identity_tol = 1e-5) {
    std::vector<std::string> out;
    if (!(p.kappa1 > 0.0) || !(p.kappa2 > 0.0)) out.emplace_back("kappa1 and kappa2 must be positive");
    const Mat4 v = p.stacked_vol();
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            if (v(i, j) != 0.0) out.emplace_back("volatility matrix is not lower triangular");
    if (p.Lambda0(2) != 0.0 || p.Lambda1.row(2).squaredNorm() != 0.0)
        out.emplace_back("third price-of-risk component must be zero");
    if (p.Lambda1(0, 1) != 0.0 || p.Lambda1(1, 0) != 0.0)
        out.emplace_back("Lambda1 must have zero (1,2) and (2,1) entries");
    const auto r = identity_residuals(p);
    if (std::abs(r.delta_R) > identity_tol) out.emplace_back("delta_R identity violated");
    if (std::abs(r.mu0) > identity_tol) out.emplace_back("sigma_S'Lambda0 = mu0 violated");
    if (r.mu1.cwiseAbs().maxCoeff() > identity_tol) out.emplace_back("sigma_S'Lambda1 = mu1' violated");
    return out;
}

inline void validate(const MarketParams& p, double identity_tol = 1e-5) {
    const auto issues = validation_issues(p, identity_tol);
    if (!issues.empty()) throw Error(Errc::InvalidArgument, issues.front());
}

inline double real_short_rate(const MarketParams& p, const Vec2& X) { return p.delta_r + X(0); }
inline double expected_inflation(const MarketParams& p, const Vec2& X) { return p.delta_pi_e + X(1); }

inline double nominal_short_rate(const MarketParams& p, const Vec2& X) {
    const Vec2 load = Vec2::Ones() - (p.sigma_Pi.transpose() * p.Lambda1).transpose();
    return p.delta_R + load.dot(X);
}

inline Vec4 price_of_risk(const MarketParams& p, const Vec2& X) { return p.Lambda0 + p.Lambda1 * X; }

// Zero-coupon coefficients: P = exp(A0 + A1'X) nominal, P^R = exp(A0R + A1R'X).
// State layout: (A1_1, A1_2, A0, A1R_1, A1R_2, A0R).
class BondCoefficients {
public:
    using State = Eigen::Matrix<double, 6, 1>;

    BondCoefficients() = default;
    explicit BondCoefficients(Trajectory<6> traj) : traj_(std::move(traj)) {}

    double tau_max() const { return traj_.t_max(); }
    double step() const { return traj_.step(); }
    const Trajectory<6>& trajectory() const { return traj_; }

    double A0(double tau) const { return at(tau)(2); }
    Vec2 A1(double tau) const { return at(tau).segment<2>(0); }
    double A0R(double tau) const { return at(tau)(5); }
    Vec2 A1R(double tau) const { return at(tau).segment<2>(3); }

    State at(double tau) const {
        require(tau >= 0.0 && tau <= tau_max() + 1e-9, Errc::InvalidArgument,
                "maturity " + std::to_string(tau) + " outside solved grid");
        return traj_(tau);
    }

    double nominal_yield(double tau, const Vec2& X) const {
        const State s = at(tau);
        return -(s(2) + s.segment<2>(0).dot(X)) / tau;
    }
    double real_yield(double tau, const Vec2& X) const {
        const State s = at(tau);
        return -(s(5) + s.segment<2>(3).dot(X)) / tau;
    }

private:
    Trajectory<6> traj_;
};

inline BondCoefficients::State bond_rhs(const MarketParams& p, const BondCoefficients::State& y) {
    const Mat24 SX = p.SigmaX();
    const Mat2 Z2 = SX * SX.transpose();
    const Mat2 M = -(p.K().transpose() + p.Lambda1.transpose() * SX.transpose());
    const Vec2 c1 = -Vec2::Ones() + p.Lambda1.transpose() * p.sigma_Pi;
    const Vec2 a1 = y.segment<2>(0), a1r = y.segment<2>(3);
    BondCoefficients::State d;
    d.segment<2>(0) = M * a1 + c1;
    d(2) = 0.5 * a1.dot(Z2 * a1) - a1.dot(SX * p.Lambda0) - p.delta_R;
    d.segment<2>(3) = M * a1r - Vec2::UnitX();
    d(5) = 0.5 * a1r.dot(Z2 * a1r) - a1r.dot(SX * (p.Lambda0 - p.sigma_Pi)) - p.delta_r;
    return d;
}

inline BondCoefficients solve_bond_odes(const MarketParams& p, double tau_max, double step = 1.0 / 252.0) {
    require(tau_max > 0.0 && step > 0.0, Errc::InvalidArgument, "tau_max and step must be positive");
    auto rhs = [&](double, const BondCoefficients::State& y) { return bond_rhs(p, y); };
    return BondCoefficients(rk4_solve<6>(rhs, BondCoefficients::State::Zero(), tau_max, step, [](auto&) {},
                                         std::numeric_limits<double>::infinity()));
}

struct AssetUniverse {
    double T1 = 3.0, T2 = 10.0, T3 = 10.0;
    Mat4 Sigma = Mat4::Identity();
    Mat4 SigmaT_inv = Mat4::Identity();  // (Sigma')^{-1}
    double condition = 1.0;
};

inline double condition_number(const Mat4& m) {
    Eigen::JacobiSVD<Mat4> svd(m);
    const auto& s = svd.singularValues();
    if (s(3) == 0.0) return std::numeric_limits<double>::infinity();
    return s(0) / s(3);
}

inline AssetUniverse build_universe(const MarketParams& p, const BondCoefficients& bc, double T1 = 3.0,
                                    double T2 = 10.0, double T3 = 10.0) {
    const double tmax = bc.tau_max() + 1e-9;
    require(T1 > 0 && T2 > 0 && T3 > 0 && T1 <= tmax && T2 <= tmax && T3 <= tmax, Errc::InvalidArgument,
            "bond maturities must lie within the solved grid");
    const Mat24 SX = p.SigmaX();
    AssetUniverse u;
    u.T1 = T1;
    u.T2 = T2;
    u.T3 = T3;
    u.Sigma.row(0) = bc.A1(T1).transpose() * SX;
    u.Sigma.row(1) = bc.A1(T2).transpose() * SX;
    u.Sigma.row(2) = bc.A1R(T3).transpose() * SX + p.sigma_Pi.transpose();
    u.Sigma.row(3) = p.sigma_S.transpose();
    u.condition = condition_number(u.Sigma);
    if (!(u.condition <= 1e12)) {
        throw Error(Errc::SingularSigma, "asset volatility matrix condition number " + std::to_string(u.condition));
    }
    u.SigmaT_inv = u.Sigma.transpose().inverse();
    return u;
}

// Stationary-from-zero covariance of X_t: int_0^t e^{-K(t-s)} Z2 e^{-K'(t-s)} ds.
inline Mat2 factor_covariance(const MarketParams& p, double t) {
    const Mat24 SX = p.SigmaX();
    const Mat2 Z2 = SX * SX.transpose();
    const Vec2 k(p.kappa1, p.kappa2);
    Mat2 out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const double s = k(i) + k(j);
            out(i, j) = Z2(i, j) * (-std::expm1(-s * t)) / s;
        }
    return out;
}

}  // namespace lcmi
