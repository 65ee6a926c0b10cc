#pragma once

#include "lcmi/chebyshev.hpp"
#include "lcmi/rng.hpp"
#include "lcmi/strategies.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

namespace lcmi {

// ---------------------------------------------------------------------------
// Per-time-node interpolants of log f1, log f2 and log Y~ in X.
//
// On the simulation grid t_n = n dt every integral over [t_n, T] splits into
// the same dt-panels, so f1 at all nodes is a suffix sum of panel integrals and
// the survival-weighted pieces are short correlation sums. Each panel uses
// 6-point Gauss-Legendre.

struct SurrogateOptions {
    int order = 14;      // Chebyshev points per axis
    double box_sd = 8.0;  // half-width of the box in stationary standard deviations
};

class StateSurrogate {
public:
    struct Eval {
        double L1 = 0.0, L2 = 0.0, LY = -INFINITY;
        Vec2 g1 = Vec2::Zero(), g2 = Vec2::Zero(), gY = Vec2::Zero();
    };

    StateSurrogate() = default;

    StateSurrogate(const Model& m, double dt, const SurrogateOptions& opt = {}) : dt_(dt) {
        const auto& h = m.household;
        N_ = steps_for(h.T, dt);
        NR_ = steps_for(h.T_R, dt);
        const Mat2 Sinf = stationary_cov(m.market);
        a1_ = opt.box_sd * std::sqrt(Sinf(0, 0));
        a2_ = opt.box_sd * std::sqrt(Sinf(1, 1));
        build(m, opt.order);
    }

    static int steps_for(double T, double dt) {
        const double n = T / dt;
        const long r = std::lround(n);
        require(std::abs(n - static_cast<double>(r)) < 1e-9 * std::max(1.0, n) && r >= 1, Errc::InvalidArgument,
                "dt must divide the horizon and retirement date");
        return static_cast<int>(r);
    }

    static Mat2 stationary_cov(const MarketParams& p) { return factor_covariance(p, 1e6); }

    int steps() const { return N_; }
    int retirement_step() const { return NR_; }
    double dt() const { return dt_; }
    bool in_box(const Vec2& X) const { return std::abs(X(0)) <= a1_ && std::abs(X(1)) <= a2_; }

    void eval(int n, const Vec2& X, Eval& e, bool need_f1_grad, bool need_y) const {
        l2_[n].eval(X, e.L2, e.g2);
        if (need_f1_grad)
            l1_[n].eval(X, e.L1, e.g1);
        else
            e.L1 = l1_[n].value_only(X);
        if (need_y && n < NR_) ly_[n].eval(X, e.LY, e.gY);
    }

    void eval_dead(int n, const Vec2& X, Eval& e) const { l1_[n].eval(X, e.L1, e.g1); }

private:
    void build(const Model& m, int order) {
        const auto& h = m.household;
        const auto& sol = m.gammas;
        const double g = h.gamma, rho = h.delta / g;
        const double w1 = std::pow(h.kappa1_w, 1.0 / g), w2 = std::pow(h.kappa2_w, 1.0 / g);
        static constexpr std::array<double, 6> xs = {-0.9324695142031521, -0.6612093864662645, -0.2386191860831969,
                                                     0.2386191860831969,  0.6612093864662645,  0.9324695142031521};
        static constexpr std::array<double, 6> ws = {0.1713244923791704, 0.3607615730481386, 0.4679139345726910,
                                                     0.4679139345726910, 0.3607615730481386, 0.1713244923791704};
        constexpr int Q = 6;
        const int N = N_, NR = NR_;
        // Quantities at tau = (k + u_q) dt shared by every X node.
        std::vector<double> G0(N * Q), A0R(NR * Q), wq(N * Q);
        std::vector<Vec2> G1(N * Q), A1R(NR * Q);
        std::vector<Mat2> G2(N * Q);
        std::vector<double> surv(N * Q), inc(NR * Q), S0(N);
        for (int k = 0; k < N; ++k) {
            S0[k] = h.mortality.survival(k * dt_);
            for (int q = 0; q < Q; ++q) {
                const double u = 0.5 * (xs[q] + 1.0);
                const double tau = (k + u) * dt_;
                const GammaState s = sol.state(tau);
                G0[k * Q + q] = s(6) - rho * tau;
                G1[k * Q + q] = s.segment<2>(4);
                G2[k * Q + q] = GammaSolution::to_mat(s);
                wq[k * Q + q] = 0.5 * ws[q] * dt_;
                surv[k * Q + q] = h.mortality.survival(tau);  // also {}_{s}p_x at s = tau
                if (k < NR) {
                    const auto b = m.bonds.at(tau);
                    A0R[k * Q + q] = b(5);
                    A1R[k * Q + q] = b.segment<2>(3);
                    inc[k * Q + q] = h.income.income(tau);
                }
            }
        }
        l1_.assign(N, Chebyshev2D(order, a1_, a2_));
        l2_.assign(N, Chebyshev2D(order, a1_, a2_));
        ly_.assign(NR, Chebyshev2D(order, a1_, a2_));
        std::vector<Eigen::MatrixXd> v1(N, Eigen::MatrixXd(order, order)), v2 = v1, vy(NR, v1.front());
        std::vector<double> ef(N * Q), panel(N), bond(NR * Q);
        const Chebyshev2D& proto = l1_.front();
        for (int i = 0; i < order; ++i)
            for (int j = 0; j < order; ++j) {
                const Vec2 X = proto.grid_point(i, j);
                for (int z = 0; z < N * Q; ++z)
                    ef[z] = wq[z] * std::exp(G0[z] + G1[z].dot(X) + 0.5 * X.dot(G2[z] * X));
                for (int k = 0; k < N; ++k) {
                    double s = 0.0;
                    for (int q = 0; q < Q; ++q) s += ef[k * Q + q];
                    panel[k] = s;
                }
                for (int z = 0; z < NR * Q; ++z) bond[z] = wq[z] * std::exp(A0R[z] + A1R[z].dot(X));
                double f1 = 0.0;
                for (int n = N - 1; n >= 0; --n) {
                    f1 += panel[N - 1 - n];
                    // survival-weighted part: sum_k sum_q S0(t_n + tau_kq)/S0(t_n) ef_kq
                    double S = 0.0;
                    const int K = N - n;
                    for (int k = 0; k < K; ++k)
                        for (int q = 0; q < Q; ++q) S += surv[(n + k) * Q + q] * ef[k * Q + q];
                    S /= S0[n];
                    v1[n](i, j) = std::log(f1);
                    v2[n](i, j) = std::log(w1 * S + w2 * f1);
                    if (n < NR) {
                        double Y = 0.0;
                        for (int k = 0; k < NR - n; ++k)
                            for (int q = 0; q < Q; ++q)
                                Y += surv[(n + k) * Q + q] * inc[(n + k) * Q + q] * bond[k * Q + q];
                        vy[n](i, j) = Y > 0.0 ? std::log(Y / S0[n]) : -700.0;
                    }
                }
            }
        for (int n = 0; n < N; ++n) {
            l1_[n].fit(v1[n]);
            l2_[n].fit(v2[n]);
            if (n < NR) ly_[n].fit(vy[n]);
        }
    }

    double dt_ = 1.0 / 12.0;
    int N_ = 0, NR_ = 0;
    double a1_ = 0.1, a2_ = 0.1;
    std::vector<Chebyshev2D> l1_, l2_, ly_;
};

// ---------------------------------------------------------------------------

struct SimConfig {
    long n_paths = 100000;
    double dt = 1.0 / 12.0;
    std::uint64_t seed = 42;
    bool antithetic = false;
    int record_every = 0;  // steps between recorded nodes; 0 means yearly
    int threads = 1;
    bool exact_ou = true;
    int euler_substeps = 100;  // used when exact_ou is false
    double evaluation_theta = 0.0;
    SurrogateOptions surrogate{};
    long block = 1024;
};

// Recorded observables.
enum Obs : int {
    kC1, kC2, kPremium, kFace, kSurplus, kWealth, kBequest,
    kBeta1, kBeta2, kBeta3, kBeta4,
    kSmd1, kSmd2, kSmd3, kSmd4,
    kIfhd1, kIfhd2, kIfhd3, kIfhd4,
    kIthd1, kIthd2, kIthd3, kIthd4,
    kX1, kX2, kAlive,
    kNumObs
};

inline const char* obs_name(int k) {
    static const char* names[] = {"c1", "c2", "premium", "face_value", "surplus", "real_wealth", "bequest_ratio",
                                  "beta_1", "beta_2", "beta_3", "beta_4", "smd_1", "smd_2", "smd_3", "smd_4",
                                  "ifhd_1", "ifhd_2", "ifhd_3", "ifhd_4", "ithd_1", "ithd_2", "ithd_3", "ithd_4",
                                  "x1", "x2", "alive"};
    return names[k];
}

struct Moments {
    double sum = 0.0, sumsq = 0.0;
    double count = 0.0;
    void add(double v) {
        sum += v;
        sumsq += v * v;
        count += 1.0;
    }
    void merge(const Moments& o) {
        sum += o.sum;
        sumsq += o.sumsq;
        count += o.count;
    }
    double mean() const { return count > 0 ? sum / count : 0.0; }
    double stderr_() const {
        if (count < 2) return 0.0;
        const double m = mean();
        const double var = std::max(0.0, (sumsq - count * m * m) / (count - 1.0));
        return std::sqrt(var / count);
    }
};

struct SimAccumulator {
    std::vector<Moments> all;    // [node * kNumObs + obs], every path
    std::vector<Moments> alive;  // alive paths only
    Moments value;
    long excluded = 0;
    long out_of_box = 0;

    explicit SimAccumulator(int nodes = 0)
        : all(static_cast<std::size_t>(nodes) * kNumObs), alive(static_cast<std::size_t>(nodes) * kNumObs) {}

    void merge(const SimAccumulator& o) {
        for (std::size_t i = 0; i < all.size(); ++i) {
            all[i].merge(o.all[i]);
            alive[i].merge(o.alive[i]);
        }
        value.merge(o.value);
        excluded += o.excluded;
        out_of_box += o.out_of_box;
    }
};

struct CurveStat {
    double mean = 0.0, stderr_ = 0.0;
};

struct SimResult {
    double control_theta = 0.0;
    std::vector<double> times;  // recorded t
    std::vector<double> ages;
    // [obs][node]
    std::vector<std::vector<CurveStat>> unconditional;
    std::vector<std::vector<CurveStat>> alive_conditioned;
    double value = 0.0;
    double value_stderr = 0.0;
    long n_paths = 0;
    long excluded = 0;
    long out_of_box = 0;
};

namespace detail {

// Joint exact transition of (X, Delta Z) over one step.
struct OuStep {
    Vec2 decay;
    Mat24 C;      // Cov(eps_X, dZ) / dt
    Mat2 R;       // Cholesky of the residual covariance
};

inline OuStep ou_step(const MarketParams& p, double dt) {
    OuStep s;
    const Vec2 k(p.kappa1, p.kappa2);
    s.decay = (-k * dt).array().exp();
    const Mat24 SX = p.SigmaX();
    const Vec2 g = ((-(-k * dt).array().exp() + 1.0) / k.array()).matrix();
    s.C = g.asDiagonal() * SX / dt;
    const Mat2 V = factor_covariance(p, dt) - s.C * s.C.transpose() * dt;
    Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (V + V.transpose()));
    const Vec2 ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    s.R = es.eigenvectors() * ev.asDiagonal();
    return s;
}

// Pairwise reduction in fixed order, independent of how blocks were scheduled.
inline SimAccumulator tree_reduce(std::vector<SimAccumulator>& parts) {
    std::size_t n = parts.size();
    while (n > 1) {
        const std::size_t half = (n + 1) / 2;
        for (std::size_t i = 0; i + half < n; ++i) parts[i].merge(parts[i + half]);
        n = half;
    }
    return parts.front();
}

}  // namespace detail

class Simulator {
public:
    Simulator(const Model& m, const SimConfig& cfg) : m_(m), cfg_(cfg), sur_(m, cfg.dt, cfg.surrogate) {
        require(cfg.n_paths >= 1, Errc::InvalidArgument, "n_paths must be at least 1");
        require(cfg.dt > 0.0, Errc::InvalidArgument, "dt must be positive");
        if (m.gammas.existence && !m.gammas.existence->ok())
            throw Error(Errc::ExistenceFail, "existence conditions fail for the control model");
        N_ = sur_.steps();
        rec_ = cfg.record_every > 0 ? cfg.record_every : std::max(1, static_cast<int>(std::lround(1.0 / cfg.dt)));
        nodes_ = N_ / rec_ + 1;
        ou_ = detail::ou_step(m.market, cfg.dt);
    }

    const StateSurrogate& surrogate() const { return sur_; }

    SimResult run() const {
        const long pairs_or_paths = cfg_.n_paths;
        const long nblocks = (pairs_or_paths + cfg_.block - 1) / cfg_.block;
        std::vector<SimAccumulator> parts(static_cast<std::size_t>(nblocks), SimAccumulator(nodes_));
        auto work = [&](long b0, long b1) {
            for (long b = b0; b < b1; ++b) {
                const long lo = b * cfg_.block, hi = std::min(pairs_or_paths, lo + cfg_.block);
                for (long p = lo; p < hi; ++p) run_path(p, parts[static_cast<std::size_t>(b)]);
            }
        };
        const int nt = std::max(1, cfg_.threads);
        if (nt == 1 || nblocks == 1) {
            work(0, nblocks);
        } else {
            std::vector<std::thread> pool;
            for (int i = 0; i < nt; ++i) {
                const long b0 = nblocks * i / nt, b1 = nblocks * (i + 1) / nt;
                pool.emplace_back(work, b0, b1);
            }
            for (auto& th : pool) th.join();
        }
        SimAccumulator acc = detail::tree_reduce(parts);
        return finish(acc);
    }

private:
    SimResult finish(const SimAccumulator& acc) const {
        SimResult r;
        r.control_theta = m_.theta();
        r.n_paths = cfg_.n_paths;
        r.unconditional.assign(kNumObs, std::vector<CurveStat>(static_cast<std::size_t>(nodes_)));
        r.alive_conditioned = r.unconditional;
        for (int i = 0; i < nodes_; ++i) {
            const double t = i * rec_ * cfg_.dt;
            r.times.push_back(t);
            r.ages.push_back(m_.household.mortality.x + t);
            for (int k = 0; k < kNumObs; ++k) {
                const auto& a = acc.all[static_cast<std::size_t>(i) * kNumObs + k];
                const auto& b = acc.alive[static_cast<std::size_t>(i) * kNumObs + k];
                r.unconditional[k][i] = {a.mean(), a.stderr_()};
                r.alive_conditioned[k][i] = {b.mean(), b.stderr_()};
            }
        }
        r.value = acc.value.mean();
        r.value_stderr = acc.value.stderr_();
        r.excluded = acc.excluded;
        r.out_of_box = acc.out_of_box;
        return r;
    }

    struct Draw {
        std::array<double, 4> dZ;
        std::array<double, 2> xi;
    };

    // Normals for step n; antithetic partners share the stream and flip sign.
    static void draw(const PathStream& s, std::uint32_t n, double sign, double sqdt, Draw& d) {
        const auto a = s.normals(n, 0), b = s.normals(n, 1), c = s.normals(n, 2);
        d.dZ = {sign * a[0] * sqdt, sign * a[1] * sqdt, sign * b[0] * sqdt, sign * b[1] * sqdt};
        d.xi = {sign * c[0], sign * c[1]};
    }

    void advance_x(Vec2& X, const Draw& d, const PathStream& s, std::uint32_t n, double sign) const {
        const Eigen::Map<const Vec4> dZ(d.dZ.data());
        if (cfg_.exact_ou) {
            X = ou_.decay.cwiseProduct(X) + ou_.C * dZ + ou_.R * Vec2(d.xi[0], d.xi[1]);
            return;
        }
        // Euler reference: substeps whose Brownian increments sum to dZ (Brownian bridge).
        const int M = std::max(1, cfg_.euler_substeps);
        const double h = cfg_.dt / M;
        const Mat2 K = m_.market.K();
        const Mat24 SX = m_.market.SigmaX();
        Vec4 acc = Vec4::Zero();
        for (int j = 0; j < M; ++j) {
            Vec4 inc;
            if (j == M - 1) {
                inc = dZ - acc;
            } else {
                // Conditional law of the next sub-increment given the remainder.
                const double rem = cfg_.dt - j * h;
                const auto u = s.normals(n, 3 + j), v = s.normals(n, 3 + M + j);
                const Vec4 z(sign * u[0], sign * u[1], sign * v[0], sign * v[1]);
                inc = (dZ - acc) * (h / rem) + z * std::sqrt(h * (rem - h) / rem);
            }
            acc += inc;
            X = X - K * X * h + SX * inc;
        }
    }

    void run_path(long p, SimAccumulator& acc) const {
        const auto& h = m_.household;
        const auto& mk = m_.market;
        const double g = h.gamma, th = h.theta, the = cfg_.evaluation_theta;
        const double w1 = std::pow(h.kappa1_w, 1.0 / g), w2 = std::pow(h.kappa2_w, 1.0 / g);
        const double dt = cfg_.dt, sqdt = std::sqrt(dt);
        long key = p;
        double sign = 1.0;
        if (cfg_.antithetic) {
            key = p / 2;
            sign = (p % 2 == 0) ? 1.0 : -1.0;
        }
        const PathStream stream(cfg_.seed, static_cast<std::uint64_t>(key));
        // Death time by inverse CDF of the Gompertz law.
        const double U = stream.uniforms(0xFFFFFFFFu, 0)[0];
        const auto& law = h.mortality;
        const double Tx = law.b * std::log(1.0 - std::log(U) * std::exp(-(law.x - law.m) / law.b));
        const int nd = Tx >= h.T ? N_ + 1 : static_cast<int>(std::ceil(Tx / dt - 1e-12));

        const Vec4& sPi = mk.sigma_Pi;
        const Mat24 SX = mk.SigmaX();
        const Mat4& SiT = m_.assets.SigmaT_inv;
        const double pi_var = sPi.squaredNorm();
        const Vec4 base_shift = sPi * (1.0 - th * (1.0 - g));
        const Vec4 ifhd = ((g - 1.0) / g) * (1.0 - th) * (SiT * sPi);

        Vec2 X = Vec2::Zero();
        double logPi = 0.0;
        const double WY0 = h.W0 + human_capital(h.income, law, m_.bonds, 0.0, X);
        double logW = std::log(WY0);  // surplus while alive, real wealth afterwards
        bool alive = true;
        double util = 0.0;
        bool bad = false;
        StateSurrogate::Eval e;
        Draw d;
        for (int n = 0; n < N_; ++n) {
            const double t = n * dt;
            if (alive && n >= nd) {
                // Death at this node: the family receives the face value.
                sur_.eval(n, X, e, false, false);
                logW = std::log(w2) + logW + e.L1 - e.L2;
                alive = false;
            }
            if (!sur_.in_box(X)) ++acc.out_of_box;
            const Vec4 Lam = mk.Lambda0 + mk.Lambda1 * X;
            const double r = mk.delta_r + X(0);
            const double disc = std::exp(-h.delta * t);
            const bool rec = (n % rec_) == 0;
            const double W = std::exp(logW);
            Vec4 eta;
            double drift;
            double c2;
            if (alive) {
                sur_.eval(n, X, e, rec, rec);
                const double f1 = std::exp(e.L1), f2 = std::exp(e.L2);
                const double lam = law.hazard(t);
                eta = (Lam - base_shift) / g + SX.transpose() * e.g2;
                drift = r + lam * (1.0 - w2 * f1 / f2) - (w1 + w2) / f2 + eta.dot(Lam - sPi);
                const double c1 = w1 * W / f2;
                c2 = w2 * W / f2;
                if (h.kappa1_w > 0.0) {
                    // Fractional weight for the step in which death occurs.
                    const double frac = (n + 1 == nd) ? std::clamp((Tx - t) / dt, 0.0, 1.0) : 1.0;
                    util += frac * h.kappa1_w * disc * crra_log(std::log(c1), g, logPi, the) * dt;
                }
                util += h.kappa2_w * disc * crra_log(std::log(c2), g, logPi, the) * dt;
                if (rec) {
                    const double yt = n < sur_.retirement_step() ? std::exp(e.LY) : 0.0;
                    const double WR = W - yt;
                    const double I = lam * (w2 * W * f1 / f2 - WR);
                    const Vec4 beta = SiT * (eta + sPi);
                    const Vec4 smd = SiT * Lam / g;
                    const Vec4 ithd = SiT * (SX.transpose() * e.g2);
                    double v[kNumObs] = {c1, c2, I, I / lam, W, WR, w2 * f1 / f2,
                                         beta(0), beta(1), beta(2), beta(3), smd(0), smd(1), smd(2), smd(3),
                                         ifhd(0), ifhd(1), ifhd(2), ifhd(3), ithd(0), ithd(1), ithd(2), ithd(3),
                                         X(0), X(1), 1.0};
                    record(acc, n / rec_, v, true);
                }
            } else {
                sur_.eval_dead(n, X, e);
                const double f1 = std::exp(e.L1);
                eta = (Lam - base_shift) / g + SX.transpose() * e.g1;
                drift = r + eta.dot(Lam - sPi) - 1.0 / f1;
                c2 = W / f1;
                util += h.kappa2_w * disc * crra_log(std::log(c2), g, logPi, the) * dt;
                if (rec) {
                    const Vec4 beta = SiT * (eta + sPi);
                    const Vec4 smd = SiT * Lam / g;
                    const Vec4 ithd = SiT * (SX.transpose() * e.g1);
                    double v[kNumObs] = {0.0, c2, 0.0, 0.0, W, W, 1.0,
                                         beta(0), beta(1), beta(2), beta(3), smd(0), smd(1), smd(2), smd(3),
                                         ifhd(0), ifhd(1), ifhd(2), ifhd(3), ithd(0), ithd(1), ithd(2), ithd(3),
                                         X(0), X(1), 0.0};
                    record(acc, n / rec_, v, false);
                }
            }
            draw(stream, static_cast<std::uint32_t>(n), sign, sqdt, d);
            const Eigen::Map<const Vec4> dZ(d.dZ.data());
            logW += (drift - 0.5 * eta.squaredNorm()) * dt + eta.dot(dZ);
            logPi += (mk.delta_pi_e + X(1) - 0.5 * pi_var) * dt + sPi.dot(dZ);
            advance_x(X, d, stream, static_cast<std::uint32_t>(n), sign);
            if (!std::isfinite(logW)) bad = true;
        }
        if (N_ % rec_ == 0) {
            // Terminal node: wealth is exhausted; record state only.
            const bool a = alive && nd > N_;
            double v[kNumObs] = {};
            v[kX1] = X(0);
            v[kX2] = X(1);
            v[kAlive] = a ? 1.0 : 0.0;
            for (int k = kBeta1; k <= kIthd4; ++k) v[k] = std::numeric_limits<double>::quiet_NaN();
            record_terminal(acc, N_ / rec_, v, a);
        }
        if (bad || !std::isfinite(util)) {
            ++acc.excluded;
            return;
        }
        acc.value.add(util);
    }

    static double crra_log(double logc, double g, double logPi, double the) {
        return std::exp((1.0 - g) * (logc + the * logPi)) / (1.0 - g);
    }

    static void record(SimAccumulator& acc, int node, const double* v, bool alive) {
        const std::size_t o = static_cast<std::size_t>(node) * kNumObs;
        for (int k = 0; k < kNumObs; ++k) {
            acc.all[o + k].add(v[k]);
            if (alive) acc.alive[o + k].add(v[k]);
        }
    }

    static void record_terminal(SimAccumulator& acc, int node, const double* v, bool alive) {
        const std::size_t o = static_cast<std::size_t>(node) * kNumObs;
        for (int k : {static_cast<int>(kX1), static_cast<int>(kX2), static_cast<int>(kAlive)}) {
            acc.all[o + k].add(v[k]);
            if (alive) acc.alive[o + k].add(v[k]);
        }
    }

    const Model& m_;
    SimConfig cfg_;
    StateSurrogate sur_;
    int N_ = 0, rec_ = 1, nodes_ = 1;
    detail::OuStep ou_;
};

inline SimResult simulate(const Model& control_model, const SimConfig& cfg) {
    return Simulator(control_model, cfg).run();
}

struct ValueEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    long excluded = 0;
};

// Expected discounted utility with evaluation_theta utilities under the
// controls of `control_model`.
inline ValueEstimate estimate_value(const Model& control_model, SimConfig cfg, double evaluation_theta = 0.0) {
    cfg.evaluation_theta = evaluation_theta;
    cfg.record_every = StateSurrogate::steps_for(control_model.household.T, cfg.dt);
    const SimResult r = simulate(control_model, cfg);
    return {r.value, r.value_stderr, r.excluded};
}

// Closed-form G(0, W0 + Y~(0,X0), 1, X0).
inline double closed_form_value(const Model& m, const Vec2& X0 = Vec2::Zero()) {
    const auto& h = m.household;
    const double WY = h.W0 + human_capital(h.income, h.mortality, m.bonds, 0.0, X0);
    return value_function(m, 0.0, WY, 1.0, X0);
}

struct WelfarePoint {
    double gamma = 0.0, theta = 0.0, loss = 0.0, stderr_ = 0.0;
    double v_sub = 0.0, v_sub_stderr = 0.0;
};

// L(theta) from a simulated V^sub; the standard error is propagated by the delta method.
inline WelfarePoint welfare_point(const Model& theta0, const Model& control, const SimConfig& cfg) {
    WelfarePoint w;
    w.gamma = theta0.gamma();
    w.theta = control.theta();
    const auto& h = theta0.household;
    const double f2 = eval_f_pair(theta0.gammas, h.fspec(), Vec2::Zero(), 0.0).f2.value;
    const double W0Y = h.W0 + human_capital(h.income, h.mortality, theta0.bonds, 0.0, Vec2::Zero());
    const double g = w.gamma;
    if (control.theta() == 0.0 && cfg.evaluation_theta == 0.0) {
        // Matched controls: V^sub is the optimum itself.
        w.v_sub = closed_form_value(theta0);
        w.loss = 0.0;
        return w;
    }
    const ValueEstimate v = estimate_value(control, cfg, 0.0);
    w.v_sub = v.value;
    w.v_sub_stderr = v.stderr_;
    w.loss = welfare_loss(g, f2, v.value, W0Y);
    // dL/dV = -(1-L) / ((1-g) V)
    w.stderr_ = std::abs((1.0 - w.loss) / ((1.0 - g) * v.value)) * v.stderr_;
    return w;
}

}  // namespace lcmi
