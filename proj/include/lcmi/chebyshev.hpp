#pragma once

#include "lcmi/core.hpp"

#include <cmath>
#include <vector>

namespace lcmi {

// Tensor Chebyshev interpolant on [-a1,a1] x [-a2,a2] through the
// Chebyshev-Gauss points, used as a fast stand-in for smooth functions of X.
class Chebyshev2D {
    static constexpr int kMax = 32;

public:
    Chebyshev2D() = default;
    Chebyshev2D(int n, double a1, double a2) : n_(n), a1_(a1), a2_(a2), c_(Eigen::MatrixXd::Zero(n, n)) {
        require(n >= 1 && n <= kMax, Errc::InvalidArgument, "Chebyshev order must lie in [1, 32]");
    }

    int order() const { return n_; }
    double half_width1() const { return a1_; }
    double half_width2() const { return a2_; }

    // Node j (0-based) in [-1,1].
    static double node(int n, int j) { return std::cos(M_PI * (j + 0.5) / n); }

    Vec2 grid_point(int i, int j) const { return Vec2(a1_ * node(n_, i), a2_ * node(n_, j)); }

    // values(i,j) = f(grid_point(i,j)).
    void fit(const Eigen::MatrixXd& values) {
        Eigen::MatrixXd T(n_, n_);  // T(k,j) = T_k(x_j)
        for (int k = 0; k < n_; ++k)
            for (int j = 0; j < n_; ++j) T(k, j) = std::cos(k * M_PI * (j + 0.5) / n_);
        c_ = (2.0 / n_) * (2.0 / n_) * (T * values * T.transpose());
        c_.row(0) *= 0.5;
        c_.col(0) *= 0.5;
    }

    const Eigen::MatrixXd& coefficients() const { return c_; }

    double value(const Vec2& X) const {
        return value_only(X);
    }

    void eval(const Vec2& X, double& v, Vec2& grad) const {
        double tu[kMax], du[kMax], tv[kMax], dv[kMax];
        basis(X(0) / a1_, tu, du);
        basis(X(1) / a2_, tv, dv);
        double s = 0.0, su = 0.0, sv = 0.0;
        const double* c = c_.data();
        for (int j = 0; j < n_; ++j, c += n_) {
            double col = 0.0, cold = 0.0;
            for (int i = 0; i < n_; ++i) {
                col += tu[i] * c[i];
                cold += du[i] * c[i];
            }
            s += col * tv[j];
            su += cold * tv[j];
            sv += col * dv[j];
        }
        v = s;
        grad << su / a1_, sv / a2_;
    }

    double value_only(const Vec2& X) const {
        double tu[kMax], tv[kMax];
        values(X(0) / a1_, tu);
        values(X(1) / a2_, tv);
        double s = 0.0;
        const double* c = c_.data();
        for (int j = 0; j < n_; ++j, c += n_) {
            double col = 0.0;
            for (int i = 0; i < n_; ++i) col += tu[i] * c[i];
            s += col * tv[j];
        }
        return s;
    }

private:
    void basis(double x, double* t, double* d) const {
        t[0] = 1.0;
        d[0] = 0.0;
        if (n_ > 1) {
            t[1] = x;
            d[1] = 1.0;
        }
        for (int k = 2; k < n_; ++k) {
            t[k] = 2.0 * x * t[k - 1] - t[k - 2];
            d[k] = 2.0 * t[k - 1] + 2.0 * x * d[k - 1] - d[k - 2];
        }
    }

    void values(double x, double* t) const {
        t[0] = 1.0;
        if (n_ > 1) t[1] = x;
        for (int k = 2; k < n_; ++k) t[k] = 2.0 * x * t[k - 1] - t[k - 2];
    }

    int n_ = 0;
    double a1_ = 1.0, a2_ = 1.0;
    Eigen::MatrixXd c_;
};

}  // namespace lcmi
