#pragma once

#include "lcmi/io.hpp"
#include "lcmi/market.hpp"
#include "lcmi/rng.hpp"

#include <gsl/gsl_blas.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace lcmi {

inline constexpr std::array<double, 8> kPanelMaturities = {0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0};
inline constexpr std::array<const char*, 8> kPanelYieldColumns = {"y3m", "y6m", "y1", "y2",
                                                                  "y3",  "y5",  "y7", "y10"};

using Vec8 = Eigen::Matrix<double, 8, 1>;
using Vec10 = Eigen::Matrix<double, 10, 1>;
using Mat10 = Eigen::Matrix<double, 10, 10>;
using Mat104 = Eigen::Matrix<double, 10, 4>;

// K = (X1, X2, log Pi, log S):
//   K' = Upsilon1 + Psi1 K + eps,  L = Upsilon2 + Psi2 K + eta.
struct StateSpaceModel {
    Vec4 Upsilon1 = Vec4::Zero();
    Mat4 Psi1 = Mat4::Identity();
    Mat4 Sigma_eps = Mat4::Zero();
    Vec10 Upsilon2 = Vec10::Zero();
    Mat104 Psi2 = Mat104::Zero();
    Vec10 Sigma_eta_diag = Vec10::Zero();
    double dt = 1.0 / 12.0;
    Mat2 stationary_X = Mat2::Identity();
};

struct ContinuousDynamics {
    Vec4 theta0 = Vec4::Zero();
    Mat4 theta1 = Mat4::Zero();
    Mat4 SigmaK = Mat4::Zero();
};

inline ContinuousDynamics continuous_dynamics(const MarketParams& p) {
    ContinuousDynamics d;
    d.theta0 << 0.0, 0.0, p.delta_pi_e - 0.5 * p.sigma_Pi.squaredNorm(),
        p.delta_R + p.mu0 - 0.5 * p.sigma_S.squaredNorm();
    d.theta1.block<2, 2>(0, 0) = -p.K();
    d.theta1(2, 1) = 1.0;
    const Vec2 eq = Vec2::Ones() - (p.sigma_Pi.transpose() * p.Lambda1).transpose() + p.mu1;
    d.theta1(3, 0) = eq(0);
    d.theta1(3, 1) = eq(1);
    d.SigmaK = p.stacked_vol();
    return d;
}

// Van Loan: exponentials of block matrices give the two integrals exactly.
inline StateSpaceModel build_state_space(const MarketParams& p, const BondCoefficients& bc, const Vec8& meas_sd,
                                         double dt = 1.0 / 12.0) {
    require(dt > 0.0, Errc::InvalidArgument, "dt must be positive");
    const ContinuousDynamics d = continuous_dynamics(p);
    StateSpaceModel m;
    m.dt = dt;
    Eigen::Matrix<double, 5, 5> A = Eigen::Matrix<double, 5, 5>::Zero();
    A.block<4, 4>(0, 0) = d.theta1 * dt;
    A.block<4, 1>(0, 4) = d.theta0 * dt;
    const Eigen::Matrix<double, 5, 5> EA = A.exp();
    m.Psi1 = EA.block<4, 4>(0, 0);
    m.Upsilon1 = EA.block<4, 1>(0, 4);

    Eigen::Matrix<double, 8, 8> B = Eigen::Matrix<double, 8, 8>::Zero();
    B.block<4, 4>(0, 0) = -d.theta1 * dt;
    B.block<4, 4>(0, 4) = d.SigmaK * d.SigmaK.transpose() * dt;
    B.block<4, 4>(4, 4) = d.theta1.transpose() * dt;
    const Eigen::Matrix<double, 8, 8> EB = B.exp();
    const Mat4 F22t = EB.block<4, 4>(4, 4).transpose();
    const Mat4 S = F22t * EB.block<4, 4>(0, 4);
    m.Sigma_eps = 0.5 * (S + S.transpose());

    for (int i = 0; i < 8; ++i) {
        const double tau = kPanelMaturities[i];
        const auto s = bc.at(tau);
        m.Upsilon2(i) = -s(2) / tau;
        m.Psi2(i, 0) = -s(0) / tau;
        m.Psi2(i, 1) = -s(1) / tau;
        m.Sigma_eta_diag(i) = meas_sd(i) * meas_sd(i);
    }
    m.Psi2(8, 2) = 1.0;
    m.Psi2(9, 3) = 1.0;
    m.stationary_X = factor_covariance(p, 1e6);
    return m;
}

inline StateSpaceModel build_state_space(const MarketParams& p, const Vec8& meas_sd, double dt = 1.0 / 12.0,
                                         double bond_step = 1.0 / 120.0) {
    return build_state_space(p, solve_bond_odes(p, kPanelMaturities.back(), bond_step), meas_sd, dt);
}

// ---------------------------------------------------------------------------

struct ObservationPanel {
    std::vector<std::string> dates;
    std::vector<Vec10> obs;  // yields (decimal/yr) x 8, log CPI, log equity; NaN marks a missing value

    std::size_t size() const { return obs.size(); }
};

inline ObservationPanel read_panel(std::istream& in) {
    const CsvTable t = read_csv(in);
    ObservationPanel p;
    std::array<int, 11> col{};
    col[0] = t.column("date");
    for (int i = 0; i < 8; ++i) col[i + 1] = t.column(kPanelYieldColumns[i]);
    col[9] = t.column("log_cpi");
    col[10] = t.column("log_equity");
    for (int c : col) require(c >= 0, Errc::InvalidArgument, "panel CSV is missing a required column");
    for (const auto& row : t.rows) {
        p.dates.push_back(row[col[0]]);
        Vec10 v;
        for (int i = 0; i < 10; ++i) {
            v(i) = parse_double(row[col[i + 1]]);
            require(!std::isinf(v(i)), Errc::InvalidArgument, "panel values must be finite");
        }
        p.obs.push_back(v);
    }
    require(!p.obs.empty(), Errc::InvalidArgument, "panel has no rows");
    return p;
}

inline ObservationPanel read_panel_file(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), Errc::InvalidArgument, "cannot open '" + path + "'");
    return read_panel(in);
}

inline void write_panel(std::ostream& out, const ObservationPanel& p) {
    CsvWriter w(out, {"date", "y3m", "y6m", "y1", "y2", "y3", "y5", "y7", "y10", "log_cpi", "log_equity"});
    for (std::size_t t = 0; t < p.size(); ++t) {
        w.cell(p.dates[t]);
        for (int i = 0; i < 10; ++i) w.cell(p.obs[t](i));
        w.end_row();
    }
}

inline std::string month_label(int start_year, int start_month, int offset) {
    const int m = start_month - 1 + offset;
    const int y = start_year + m / 12;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", y, m % 12 + 1);
    return buf;
}

struct SyntheticPanel {
    ObservationPanel panel;
    std::vector<Vec4> states;  // true K_t per row
};

// Exact simulation of the discrete transition from X0 ~ stationary, log Pi = log S = 0.
inline SyntheticPanel synthetic_panel(const MarketParams& p, const Vec8& meas_sd, int months, std::uint64_t seed,
                                      double dt = 1.0 / 12.0) {
    require(months >= 1, Errc::InvalidArgument, "months must be positive");
    const StateSpaceModel m = build_state_space(p, meas_sd, dt);
    const PathStream rs(seed, 0);
    auto normal = [&](int step, int k) {
        const auto z = rs.normals(static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(k / 2));
        return z[k % 2];
    };
    const Eigen::LLT<Mat4> chol(m.Sigma_eps + 1e-30 * Mat4::Identity());
    const Mat4 Lc = chol.matrixL();
    const Eigen::LLT<Mat2> cs(m.stationary_X);
    const Mat2 Ls = cs.matrixL();
    Vec4 K = Vec4::Zero();
    K.head<2>() = Ls * Vec2(normal(0, 0), normal(0, 1));
    SyntheticPanel out;
    for (int t = 1; t <= months; ++t) {
        Vec4 e;
        for (int k = 0; k < 4; ++k) e(k) = normal(t, k);
        K = m.Upsilon1 + m.Psi1 * K + Lc * e;
        Vec10 L = m.Upsilon2 + m.Psi2 * K;
        for (int i = 0; i < 8; ++i) L(i) += meas_sd(i) * normal(t, 4 + i);
        out.panel.dates.push_back(month_label(1961, 7, t - 1));
        out.panel.obs.push_back(L);
        out.states.push_back(K);
    }
    return out;
}

// ---------------------------------------------------------------------------

struct KalmanOptions {
    double ridge = 1e-12;          // added to the exact-observation rows of F
    double level_prior_var = 1e-8;  // prior variance for log Pi and log S
};

struct FilterStep {
    Vec4 filtered = Vec4::Zero();
    Mat4 P_filtered = Mat4::Zero();
};

struct KalmanResult {
    double loglik = 0.0;
    std::vector<FilterStep> steps;
};

namespace detail {

template <bool kStore>
KalmanResult kalman_run(const StateSpaceModel& m, const ObservationPanel& panel, const KalmanOptions& opt) {
    KalmanResult res;
    if constexpr (kStore) res.steps.reserve(panel.size());
    const double log2pi = std::log(2.0 * M_PI);
    Vec10 R = m.Sigma_eta_diag;
    R(8) += opt.ridge;
    R(9) += opt.ridge;
    Vec4 Kp = Vec4::Zero();
    Mat4 P = Mat4::Zero();
    P.block<2, 2>(0, 0) = m.stationary_X;
    const Vec10& L0 = panel.obs.front();
    Kp(2) = std::isnan(L0(8)) ? 0.0 : L0(8);
    Kp(3) = std::isnan(L0(9)) ? 0.0 : L0(9);
    P(2, 2) = P(3, 3) = opt.level_prior_var;
    double ll = 0.0;
    for (std::size_t t = 0; t < panel.size(); ++t) {
        const Vec10& L = panel.obs[t];
        Vec4 Kf;
        Mat4 Pf;
        if (!L.array().isNaN().any()) {
            const Vec10 v = L - m.Upsilon2 - m.Psi2 * Kp;
            const Eigen::Matrix<double, 4, 10> PHt = P * m.Psi2.transpose();
            Mat10 F = m.Psi2 * PHt;
            F.diagonal() += R;
            const Eigen::LLT<Mat10> llt(F);
            if (llt.info() != Eigen::Success)
                throw Error(Errc::SingularInnovation, "innovation covariance not positive definite at row " +
                                                          std::to_string(t));
            const Vec10 Fiv = llt.solve(v);
            double logdet = 0.0;
            const auto& Lm = llt.matrixLLT();
            for (int i = 0; i < 10; ++i) logdet += 2.0 * std::log(Lm(i, i));
            ll -= 0.5 * (10.0 * log2pi + logdet + v.dot(Fiv));
            const Eigen::Matrix<double, 10, 4> G = llt.solve(PHt.transpose());  // F^{-1} H P
            const Eigen::Matrix<double, 4, 10> Kg = G.transpose();
            Kf = Kp + Kg * v;
            const Mat4 IKH = Mat4::Identity() - Kg * m.Psi2;
            Pf = IKH * P * IKH.transpose() + Kg * R.asDiagonal() * Kg.transpose();
        } else {
            std::vector<int> idx;
            for (int i = 0; i < 10; ++i)
                if (!std::isnan(L(i))) idx.push_back(i);
            const int n = static_cast<int>(idx.size());
            if (n == 0) {
                Kf = Kp;
                Pf = P;
            } else {
                Eigen::MatrixXd H(n, 4);
                Eigen::VectorXd v(n), Rs(n);
                for (int a = 0; a < n; ++a) {
                    H.row(a) = m.Psi2.row(idx[a]);
                    v(a) = L(idx[a]) - m.Upsilon2(idx[a]) - m.Psi2.row(idx[a]).dot(Kp);
                    Rs(a) = R(idx[a]);
                }
                Eigen::MatrixXd F = H * P * H.transpose();
                F.diagonal() += Rs;
                const Eigen::LLT<Eigen::MatrixXd> llt(F);
                if (llt.info() != Eigen::Success)
                    throw Error(Errc::SingularInnovation, "innovation covariance not positive definite at row " +
                                                              std::to_string(t));
                double logdet = 0.0;
                for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
                ll -= 0.5 * (n * log2pi + logdet + v.dot(llt.solve(v)));
                const Eigen::MatrixXd Kg = llt.solve(H * P).transpose();
                Kf = Kp + Kg * v;
                const Mat4 IKH = Mat4::Identity() - Kg * H;
                Pf = IKH * P * IKH.transpose() + Kg * Rs.asDiagonal() * Kg.transpose();
            }
        }
        Pf = (0.5 * (Pf + Pf.transpose())).eval();
        if constexpr (kStore) res.steps.push_back({Kf, Pf});
        Kp = m.Upsilon1 + m.Psi1 * Kf;
        P = m.Psi1 * Pf * m.Psi1.transpose() + m.Sigma_eps;
        P = (0.5 * (P + P.transpose())).eval();
    }
    res.loglik = ll;
    return res;
}

}  // namespace detail

inline double kalman_loglik(const StateSpaceModel& m, const ObservationPanel& panel, const KalmanOptions& opt = {}) {
    require(panel.size() > 0, Errc::InvalidArgument, "panel has no rows");
    return detail::kalman_run<false>(m, panel, opt).loglik;
}

inline KalmanResult kalman_filter(const StateSpaceModel& m, const ObservationPanel& panel,
                                  const KalmanOptions& opt = {}) {
    require(panel.size() > 0, Errc::InvalidArgument, "panel has no rows");
    return detail::kalman_run<true>(m, panel, opt);
}

struct FilteredRow {
    std::string date;
    double x1 = 0.0, x2 = 0.0, r = 0.0, pi_e = 0.0, R = 0.0;
};

inline std::vector<FilteredRow> filter_states(const MarketParams& p, const StateSpaceModel& m,
                                              const ObservationPanel& panel, const KalmanOptions& opt = {}) {
    const KalmanResult kr = kalman_filter(m, panel, opt);
    std::vector<FilteredRow> out;
    for (std::size_t t = 0; t < panel.size(); ++t) {
        const Vec2 X = kr.steps[t].filtered.head<2>();
        out.push_back({panel.dates[t], X(0), X(1), real_short_rate(p, X), expected_inflation(p, X),
                       nominal_short_rate(p, X)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Free parameters: 21 market entries and 8 yield measurement standard deviations.
// delta_R, mu0 and mu1 follow from the no-arbitrage identities.

inline constexpr int kNumCalibParams = 29;
using CalibVector = Eigen::Matrix<double, kNumCalibParams, 1>;

inline const std::array<const char*, kNumCalibParams>& calib_param_names() {
    static const std::array<const char*, kNumCalibParams> names = {
        "delta_r",    "delta_pi_e", "kappa1",     "kappa2",     "sigma1_1",   "sigma2_1",
        "sigma2_2",   "sigma_Pi_1", "sigma_Pi_2", "sigma_Pi_3", "sigma_S_1",  "sigma_S_2",
        "sigma_S_3",  "sigma_S_4",  "Lambda0_1",  "Lambda0_2",  "Lambda0_4",  "Lambda1_11",
        "Lambda1_22", "Lambda1_41", "Lambda1_42", "meas_sd_1",  "meas_sd_2",  "meas_sd_3",
        "meas_sd_4",  "meas_sd_5",  "meas_sd_6",  "meas_sd_7",  "meas_sd_8"};
    return names;
}

inline CalibVector pack_params(const MarketParams& p, const Vec8& meas_sd) {
    CalibVector v;
    v << p.delta_r, p.delta_pi_e, p.kappa1, p.kappa2, p.sigma1(0), p.sigma2(0), p.sigma2(1), p.sigma_Pi(0),
        p.sigma_Pi(1), p.sigma_Pi(2), p.sigma_S(0), p.sigma_S(1), p.sigma_S(2), p.sigma_S(3), p.Lambda0(0),
        p.Lambda0(1), p.Lambda0(3), p.Lambda1(0, 0), p.Lambda1(1, 1), p.Lambda1(3, 0), p.Lambda1(3, 1),
        meas_sd(0), meas_sd(1), meas_sd(2), meas_sd(3), meas_sd(4), meas_sd(5), meas_sd(6), meas_sd(7);
    return v;
}

// Applies the identities for delta_R, mu0 and mu1.
inline void apply_identities(MarketParams& p) {
    p.delta_R = p.delta_r + p.delta_pi_e - p.sigma_Pi.dot(p.Lambda0);
    p.mu0 = p.sigma_S.dot(p.Lambda0);
    p.mu1 = (p.sigma_S.transpose() * p.Lambda1).transpose();
}

inline MarketParams unpack_market(const CalibVector& v) {
    MarketParams p;
    p.delta_r = v(0);
    p.delta_pi_e = v(1);
    p.kappa1 = v(2);
    p.kappa2 = v(3);
    p.sigma1 << v(4), 0.0, 0.0, 0.0;
    p.sigma2 << v(5), v(6), 0.0, 0.0;
    p.sigma_Pi << v(7), v(8), v(9), 0.0;
    p.sigma_S << v(10), v(11), v(12), v(13);
    p.Lambda0 << v(14), v(15), 0.0, v(16);
    p.Lambda1.setZero();
    p.Lambda1(0, 0) = v(17);
    p.Lambda1(1, 1) = v(18);
    p.Lambda1(3, 0) = v(19);
    p.Lambda1(3, 1) = v(20);
    apply_identities(p);
    return p;
}

inline Vec8 unpack_meas_sd(const CalibVector& v) { return v.tail<8>(); }

struct ParamBounds {
    CalibVector lo, hi;
};

inline ParamBounds default_bounds() {
    ParamBounds b;
    b.lo << -0.2, -0.2, 1e-3, 1e-3, 1e-5, -0.5, 1e-5, -0.5, -0.5, 1e-5, -1.0, -1.0, -1.0, 1e-4, -5.0, -5.0, -5.0,
        -100.0, -100.0, -100.0, -100.0, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6;
    b.hi << 0.3, 0.3, 10.0, 10.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 1.0, 1.0, 1.0, 2.0, 5.0, 5.0, 5.0, 100.0, 100.0,
        100.0, 100.0, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05;
    return b;
}

inline double calib_loglik(const CalibVector& v, const ObservationPanel& panel, const KalmanOptions& kopt = {},
                           double bond_step = 1.0 / 120.0) {
    const MarketParams p = unpack_market(v);
    const StateSpaceModel m = build_state_space(p, unpack_meas_sd(v), 1.0 / 12.0, bond_step);
    return kalman_loglik(m, panel, kopt);
}

struct MleOptions {
    int restarts = 10;        // total starts, the first at init
    int max_iter = 400;
    int rewhiten_every = 40;  // BFGS iterations between Hessian refreshes
    double grad_tol = 1e-4;   // on the per-row objective, optimizer coordinates
    double perturb = 0.2;     // restart spread, relative
    std::uint64_t seed = 7;
    bool hessian = true;
    double fd_step = 1e-5;
    double bond_step = 1.0 / 120.0;
    KalmanOptions kalman{};
};

struct MleStart {
    double loglik = -INFINITY;
    int iterations = 0;
    bool converged = false;
};

struct MleResult {
    MarketParams market;
    Vec8 meas_sd = Vec8::Zero();
    CalibVector params = CalibVector::Zero();
    CalibVector stderrs = CalibVector::Constant(std::numeric_limits<double>::quiet_NaN());
    Eigen::MatrixXd covariance = Eigen::MatrixXd::Zero(kNumCalibParams, kNumCalibParams);
    double loglik = -INFINITY;
    double grad_norm = INFINITY;
    int iterations = 0;
    bool converged = false;
    int best_start = 0;
    std::vector<MleStart> starts;
};

namespace detail {

// x_i = lo + (hi - lo) sigmoid(r0_i + u_i / c_i), scaled so dx/du = s_i at u = 0.
struct Reparam {
    CalibVector lo, hi, r0, c;

    Reparam(const CalibVector& init, const ParamBounds& b) : lo(b.lo), hi(b.hi) {
        for (int i = 0; i < kNumCalibParams; ++i) {
            require(b.hi(i) > b.lo(i) && init(i) > b.lo(i) && init(i) < b.hi(i), Errc::InvalidArgument,
                    std::string("initial value outside bounds for ") + calib_param_names()[i]);
            const double q = (init(i) - lo(i)) / (hi(i) - lo(i));
            r0(i) = std::log(q / (1.0 - q));
            const double s = std::max(std::abs(init(i)), 1e-3);
            c(i) = (hi(i) - lo(i)) * q * (1.0 - q) / s;
        }
    }

    CalibVector to_x(const Eigen::VectorXd& u) const {
        CalibVector x;
        for (int i = 0; i < kNumCalibParams; ++i) {
            const double r = r0(i) + u(i) / c(i);
            x(i) = lo(i) + (hi(i) - lo(i)) / (1.0 + std::exp(-r));
        }
        return x;
    }

    Eigen::VectorXd to_u(const CalibVector& x) const {
        Eigen::VectorXd u(kNumCalibParams);
        for (int i = 0; i < kNumCalibParams; ++i) {
            const double q = std::clamp((x(i) - lo(i)) / (hi(i) - lo(i)), 1e-15, 1.0 - 1e-15);
            u(i) = (std::log(q / (1.0 - q)) - r0(i)) * c(i);
        }
        return u;
    }
};

// Optimizer coordinates z map to u = M z, with M whitening the Hessian at the start.
struct MleContext {
    const ObservationPanel* panel;
    const Reparam* rp;
    const MleOptions* opt;
    double rows;
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(kNumCalibParams, kNumCalibParams);

    double objective_u(const Eigen::VectorXd& u) const {
        try {
            const double ll = calib_loglik(rp->to_x(u), *panel, opt->kalman, opt->bond_step);
            return std::isfinite(ll) ? -ll / rows : 1e10;
        } catch (const Error&) {
            return 1e10;
        }
    }

    double objective(const Eigen::VectorXd& z) const { return objective_u(M * z); }

    Eigen::VectorXd gradient(const Eigen::VectorXd& z) const {
        Eigen::VectorXd g(z.size()), w = z;
        const double h = opt->fd_step;
        for (int i = 0; i < z.size(); ++i) {
            w(i) = z(i) + h;
            const double fp = objective(w);
            w(i) = z(i) - h;
            const double fm = objective(w);
            w(i) = z(i);
            g(i) = (fp - fm) / (2.0 * h);
        }
        return g;
    }
};

inline Eigen::Map<const Eigen::VectorXd> view(const gsl_vector* v) {
    return Eigen::Map<const Eigen::VectorXd>(v->data, static_cast<Eigen::Index>(v->size));
}

inline double gsl_f(const gsl_vector* x, void* p) { return static_cast<MleContext*>(p)->objective(view(x)); }

inline void gsl_df(const gsl_vector* x, void* p, gsl_vector* g) {
    const Eigen::VectorXd gv = static_cast<MleContext*>(p)->gradient(view(x));
    for (int i = 0; i < gv.size(); ++i) gsl_vector_set(g, i, gv(i));
}

inline void gsl_fdf(const gsl_vector* x, void* p, double* f, gsl_vector* g) {
    *f = gsl_f(x, p);
    gsl_df(x, p, g);
}

struct GslDeleter {
    void operator()(gsl_vector* v) const { gsl_vector_free(v); }
    void operator()(gsl_multimin_fdfminimizer* m) const { gsl_multimin_fdfminimizer_free(m); }
};

struct StartOutcome {
    Eigen::VectorXd u;
    double f = INFINITY;
    double grad_norm = INFINITY;
    int iterations = 0;
    bool converged = false;
};

// One BFGS leg in the current coordinates, starting from u0. The outcome's u is
// in the unwhitened coordinates.
inline StartOutcome bfgs(MleContext& ctx, const Eigen::VectorXd& u0, int max_iter) {
    gsl_set_error_handler_off();
    const int n = static_cast<int>(u0.size());
    const Eigen::VectorXd z0 = ctx.M.partialPivLu().solve(u0);
    gsl_multimin_function_fdf fn{&gsl_f, &gsl_df, &gsl_fdf, static_cast<std::size_t>(n), &ctx};
    std::unique_ptr<gsl_vector, GslDeleter> x(gsl_vector_alloc(n));
    for (int i = 0; i < n; ++i) gsl_vector_set(x.get(), i, z0(i));
    std::unique_ptr<gsl_multimin_fdfminimizer, GslDeleter> s(
        gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, n));
    gsl_multimin_fdfminimizer_set(s.get(), &fn, x.get(), 0.05, 0.1);
    StartOutcome out;
    int status = GSL_CONTINUE;
    int it = 0;
    while (status == GSL_CONTINUE && it < max_iter) {
        ++it;
        if (gsl_multimin_fdfminimizer_iterate(s.get()) != GSL_SUCCESS) break;
        status = gsl_multimin_test_gradient(s.get()->gradient, ctx.opt->grad_tol);
    }
    out.u = ctx.M * view(s.get()->x);
    out.f = s.get()->f;
    out.grad_norm = gsl_blas_dnrm2(s.get()->gradient);
    out.iterations = it;
    out.converged = (status == GSL_SUCCESS) || out.grad_norm < ctx.opt->grad_tol;
    return out;
}

}  // namespace detail

// Central-difference Hessian with per-coordinate steps h.
template <class F>
Eigen::MatrixXd fd_hessian(F&& f, const Eigen::VectorXd& x, const Eigen::VectorXd& h) {
    const Eigen::Index n = x.size();
    const double f0 = f(x);
    Eigen::VectorXd fp(n), fm(n);
    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd y = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i) = x(i) + h(i);
        fp(i) = f(y);
        y(i) = x(i) - h(i);
        fm(i) = f(y);
        y(i) = x(i);
        H(i, i) = (fp(i) - 2.0 * f0 + fm(i)) / (h(i) * h(i));
    }
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            y(i) = x(i) + h(i);
            y(j) = x(j) + h(j);
            const double fpp = f(y);
            y(i) = x(i) - h(i);
            y(j) = x(j) - h(j);
            const double fmm = f(y);
            y(i) = x(i);
            y(j) = x(j);
            H(i, j) = H(j, i) = (fpp + fmm - fp(i) - fm(i) - fp(j) - fm(j) + 2.0 * f0) / (2.0 * h(i) * h(j));
        }
    return H;
}

// Hessian of -logL in natural parameters.
inline Eigen::MatrixXd neg_loglik_hessian(const CalibVector& x, const ObservationPanel& panel,
                                          const MleOptions& opt = {}) {
    Eigen::VectorXd h(kNumCalibParams);
    for (int i = 0; i < kNumCalibParams; ++i) h(i) = 1e-4 * std::max(std::abs(x(i)), 1e-3);
    auto f = [&](const Eigen::VectorXd& y) {
        return -calib_loglik(CalibVector(y), panel, opt.kalman, opt.bond_step);
    };
    return fd_hessian(f, Eigen::VectorXd(x), h);
}

// Symmetric inverse square root with eigenvalues floored relative to the largest.
inline Eigen::MatrixXd whitening(const Eigen::MatrixXd& H) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (H + H.transpose()));
    Eigen::VectorXd ev = es.eigenvalues().cwiseAbs();
    const double floor = std::max(ev.maxCoeff() * 1e-10, 1e-300);
    ev = ev.cwiseMax(floor).cwiseSqrt().cwiseInverse();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

namespace detail {
// BFGS legs from u0, re-whitening at the current point after every leg that
// ends unconverged. A single whitening at the start leaves BFGS creeping along
// weakly identified directions for hundreds of iterations.
inline StartOutcome minimize_start(MleContext& ctx, const Eigen::MatrixXd& M0, const Eigen::VectorXd& u0) {
    auto fu = [&](const Eigen::VectorXd& u) { return ctx.objective_u(u); };
    ctx.M = M0;
    StartOutcome o;
    o.u = u0;
    int used = 0;
    while (true) {
        const int leg = std::min(ctx.opt->rewhiten_every, ctx.opt->max_iter - used);
        const int before = used;
        o = bfgs(ctx, o.u, leg);
        used = before + o.iterations;
        o.iterations = used;
        if (o.converged || used >= ctx.opt->max_iter || o.f >= 1e10) return o;
        ctx.M = whitening(fd_hessian(fu, o.u, Eigen::VectorXd::Constant(kNumCalibParams, 1e-3)));
    }
}
}  // namespace detail

inline MleResult fit_mle(const ObservationPanel& panel, const CalibVector& init, const ParamBounds& bounds,
                         const MleOptions& opt = {}) {
    require(opt.restarts >= 1, Errc::InvalidArgument, "restarts must be at least 1");
    const detail::Reparam rp(init, bounds);
    detail::MleContext ctx{&panel, &rp, &opt, static_cast<double>(panel.size())};
    auto fu = [&](const Eigen::VectorXd& u) { return ctx.objective_u(u); };
    const Eigen::MatrixXd M0 = whitening(fd_hessian(fu, Eigen::VectorXd::Zero(kNumCalibParams),
                                                    Eigen::VectorXd::Constant(kNumCalibParams, 1e-3)));
    const PathStream rs(opt.seed, 0x5eed);
    MleResult res;
    detail::StartOutcome best;
    for (int k = 0; k < opt.restarts; ++k) {
        Eigen::VectorXd u0 = Eigen::VectorXd::Zero(kNumCalibParams);
        if (k > 0)
            for (int i = 0; i < kNumCalibParams; i += 2) {
                const auto z = rs.normals(static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(i / 2));
                u0(i) = opt.perturb * z[0];
                if (i + 1 < kNumCalibParams) u0(i + 1) = opt.perturb * z[1];
            }
        const detail::StartOutcome o = detail::minimize_start(ctx, M0, u0);
        res.starts.push_back({-o.f * ctx.rows, o.iterations, o.converged});
        if (o.f < best.f) {
            best = o;
            res.best_start = k;
        }
    }
    res.params = rp.to_x(best.u);
    res.market = unpack_market(res.params);
    res.meas_sd = unpack_meas_sd(res.params);
    res.loglik = -best.f * ctx.rows;
    res.grad_norm = best.grad_norm;
    res.iterations = best.iterations;
    res.converged = best.converged;
    res.covariance.setConstant(std::numeric_limits<double>::quiet_NaN());
    if (opt.hessian) {
        const auto H = neg_loglik_hessian(res.params, panel, opt);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
        if (es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0.0) {
            res.covariance = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                             es.eigenvectors().transpose();
            res.stderrs = res.covariance.diagonal().cwiseSqrt();
        }
    }
    return res;
}

// Delta-method standard error of delta_R = delta_r + delta_pi_e - sigma_Pi' Lambda0.
inline double delta_R_stderr(const MleResult& r) {
    CalibVector J = CalibVector::Zero();
    const auto& v = r.params;
    J(0) = 1.0;
    J(1) = 1.0;
    J(7) = -v(14);
    J(8) = -v(15);
    J(14) = -v(7);
    J(15) = -v(8);
    const double var = J.dot(r.covariance * J);
    return var >= 0.0 ? std::sqrt(var) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace lcmi
