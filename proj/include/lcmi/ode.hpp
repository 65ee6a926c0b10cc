#pragma once

#include "lcmi/core.hpp"

#include <cmath>
#include <vector>

namespace lcmi {

// Uniform-grid trajectory of an N-vector with stored derivatives, so that
// off-grid queries use piecewise cubic Hermite interpolation.
template <int N>
class Trajectory {
public:
    using State = Eigen::Matrix<double, N, 1>;

    Trajectory() = default;
    Trajectory(double h, std::vector<State> y, std::vector<State> dy)
        : h_(h), y_(std::move(y)), dy_(std::move(dy)) {}

    double step() const { return h_; }
    double t_max() const { return h_ * static_cast<double>(y_.size() - 1); }
    std::size_t size() const { return y_.size(); }
    const State& node(std::size_t i) const { return y_[i]; }
    const State& node_derivative(std::size_t i) const { return dy_[i]; }

    State operator()(double t) const {
        State v, d;
        eval(t, v, d);
        return v;
    }

    State derivative(double t) const {
        State v, d;
        eval(t, v, d);
        return d;
    }

    void eval(double t, State& v, State& d) const {
        const std::size_t n = y_.size();
        if (t <= 0.0) {
            v = y_.front();
            d = dy_.front();
            return;
        }
        double s = t / h_;
        auto i = static_cast<std::size_t>(s);
        if (i >= n - 1) {
            i = n - 2;
        }
        double u = s - static_cast<double>(i);
        if (u > 1.0) u = 1.0;
        // Exactly on a node: skip the blend so grid values come back verbatim.
        if (u == 0.0) {
            v = y_[i];
            d = dy_[i];
            return;
        }
        if (u == 1.0) {
            v = y_[i + 1];
            d = dy_[i + 1];
            return;
        }
        const double u2 = u * u, u3 = u2 * u;
        const double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u;
        const double h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
        v = h00 * y_[i] + h10 * h_ * dy_[i] + h01 * y_[i + 1] + h11 * h_ * dy_[i + 1];
        const double g00 = (6 * u2 - 6 * u) / h_, g10 = 3 * u2 - 4 * u + 1;
        const double g01 = (-6 * u2 + 6 * u) / h_, g11 = 3 * u2 - 2 * u;
        d = g00 * y_[i] + g10 * dy_[i] + g01 * y_[i + 1] + g11 * dy_[i + 1];
    }

private:
    double h_ = 1.0;
    std::vector<State> y_;
    std::vector<State> dy_;
};

// Classical RK4 from t=0 to t_max. The step is shrunk so that it divides
// t_max exactly. `post` may project the state after each step (symmetry etc).
template <int N, class Rhs, class Post>
Trajectory<N> rk4_solve(Rhs&& rhs, const Eigen::Matrix<double, N, 1>& y0, double t_max, double step,
                        Post&& post, double blowup = 1e12) {
    using State = Eigen::Matrix<double, N, 1>;
    require(t_max > 0.0 && step > 0.0, Errc::InvalidArgument, "rk4: t_max and step must be positive");
    const auto n = static_cast<std::size_t>(std::ceil(t_max / step - 1e-9));
    const double h = t_max / static_cast<double>(n);
    std::vector<State> ys, ds;
    ys.reserve(n + 1);
    ds.reserve(n + 1);
    State y = y0;
    ys.push_back(y);
    ds.push_back(rhs(0.0, y));
    for (std::size_t i = 0; i < n; ++i) {
        const double t = h * static_cast<double>(i);
        const State k1 = ds.back();
        const State k2 = rhs(t + 0.5 * h, State(y + 0.5 * h * k1));
        const State k3 = rhs(t + 0.5 * h, State(y + 0.5 * h * k2));
        const State k4 = rhs(t + h, State(y + h * k3));
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        post(y);
        if (!y.allFinite()) {
            throw Error(Errc::NonFiniteOde, "non-finite state at t=" + std::to_string(t + h));
        }
        if (y.cwiseAbs().maxCoeff() > blowup) {
            throw Error(Errc::BlowUp, "state norm exceeded " + std::to_string(blowup) + " at t=" +
                                          std::to_string(t + h));
        }
        ys.push_back(y);
        ds.push_back(rhs(t + h, y));
    }
    return Trajectory<N>(h, std::move(ys), std::move(ds));
}

template <int N, class Rhs>
Trajectory<N> rk4_solve(Rhs&& rhs, const Eigen::Matrix<double, N, 1>& y0, double t_max, double step) {
    return rk4_solve<N>(std::forward<Rhs>(rhs), y0, t_max, step, [](auto&) {});
}

}  // namespace lcmi
