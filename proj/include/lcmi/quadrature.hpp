#pragma once

#include "lcmi/core.hpp"

#include <array>
#include <cmath>
#include <queue>
#include <type_traits>
#include <vector>

namespace lcmi {

namespace detail {

// Kronrod abscissae on [0,1] half of [-1,1]; odd indices are the Gauss nodes.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline double magnitude(double v) { return std::abs(v); }
template <class Derived>
double magnitude(const Eigen::MatrixBase<Derived>& v) {
    return v.cwiseAbs().maxCoeff();
}

template <class T>
T zero_like(const T& v) {
    if constexpr (std::is_arithmetic_v<T>) {
        return T(0);
    } else {
        return T::Zero(v.rows(), v.cols());
    }
}

template <class T, class F>
void gk15(F& f, double a, double b, T& result, double& err) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const T fc = f(c);
    T rk = fc * kWgk[7];
    T rg = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = h * kXgk[j];
        const T f1 = f(c - dx);
        const T f2 = f(c + dx);
        const T s = f1 + f2;
        rk += s * kWgk[j];
        if (j % 2 == 1) rg += s * kWg[j / 2];
    }
    result = rk * h;
    err = magnitude(T((rk - rg) * h));
}

}  // namespace detail

struct QuadOptions {
    double rel_tol = 1e-8;
    double abs_tol = 1e-300;
    int max_intervals = 2000;
};

// Globally adaptive Gauss-Kronrod 7/15 over [a,b]. Works for scalar and for
// Eigen vector integrands, with the error measured in the max-norm.
template <class F>
auto integrate(F&& f, double a, double b, const QuadOptions& opt = {}) {
    using T = std::decay_t<decltype(f(a))>;
    struct Piece {
        double a, b;
        T val;
        double err;
        bool operator<(const Piece& o) const { return err < o.err; }
    };
    if (b <= a) {
        return detail::zero_like(f(a));
    }
    std::priority_queue<Piece> heap;
    Piece p{a, b, {}, 0.0};
    detail::gk15<T>(f, a, b, p.val, p.err);
    T total = p.val;
    double err = p.err;
    heap.push(p);
    int n = 1;
    while (err > std::max(opt.abs_tol, opt.rel_tol * detail::magnitude(total))) {
        if (n >= opt.max_intervals) {
            throw Error(Errc::QuadratureFail, "adaptive quadrature did not converge (err=" +
                                                  std::to_string(err) + ")");
        }
        Piece top = heap.top();
        heap.pop();
        const double m = 0.5 * (top.a + top.b);
        Piece l{top.a, m, {}, 0.0}, r{m, top.b, {}, 0.0};
        detail::gk15<T>(f, l.a, l.b, l.val, l.err);
        detail::gk15<T>(f, r.a, r.b, r.val, r.err);
        total += l.val + r.val - top.val;
        err += l.err + r.err - top.err;
        heap.push(l);
        heap.push(r);
        ++n;
        if (!std::isfinite(err)) {
            throw Error(Errc::QuadratureFail, "non-finite integrand");
        }
    }
    // Re-sum to shed the drift accumulated by incremental updates.
    T sum = detail::zero_like(total);
    while (!heap.empty()) {
        sum += heap.top().val;
        heap.pop();
    }
    return sum;
}

}  // namespace lcmi
