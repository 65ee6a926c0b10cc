#pragma once

#include "lcmi/presets.hpp"
#include "lcmi/strategies.hpp"

#include <map>
#include <utility>

namespace lcmi::testing {

inline const MarketParams& preset() {
    static const MarketParams p = preset_us_1961_2023();
    return p;
}

// Models are costly enough to share between tests.
inline const Model& model(double gamma = 10.0, double theta = 0.0) {
    static std::map<std::pair<double, double>, Model> cache;
    auto it = cache.find({gamma, theta});
    if (it == cache.end()) {
        HouseholdSpec h;
        h.gamma = gamma;
        h.theta = theta;
        it = cache.emplace(std::make_pair(gamma, theta), make_model(preset(), h)).first;
    }
    return it->second;
}

// Composite Simpson rule on n (even) intervals.
template <class F>
double simpson(F&& f, double a, double b, int n = 2000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

}  // namespace lcmi::testing
