#pragma once

// JSON views of result types, shared by the command-line tool and tests.

#include "lcmi/calibration.hpp"
#include "lcmi/hjb.hpp"
#include "lcmi/presets.hpp"
#include "lcmi/strategies.hpp"

#include <json.hpp>

namespace lcmi {

template <int N>
nlohmann::json json_vec(const Eigen::Matrix<double, N, 1>& v) {
    auto a = nlohmann::json::array();
    for (int i = 0; i < N; ++i) a.push_back(v(i));
    return a;
}

inline nlohmann::json to_json(const Decomposition& d) {
    return {{"smd", json_vec(d.smd)}, {"ifhd", json_vec(d.ifhd)}, {"ithd", json_vec(d.ithd)}};
}

inline nlohmann::json to_json(const PolicyEvaluation& e) {
    nlohmann::json j;
    j["phase"] = phase_name(e.phase);
    j["t"] = e.t;
    j["X"] = json_vec(e.X);
    j["W_R"] = e.W_R;
    j["W_Y"] = e.W_Y;
    j["human_capital"] = e.human_capital;
    j["f1"] = e.f1;
    j["f2"] = e.f2;
    j["c1"] = e.c1 ? nlohmann::json(*e.c1) : nlohmann::json(nullptr);
    j["c2"] = e.c2;
    j["alpha"] = json_vec(e.alpha);
    j["beta"] = json_vec(e.beta);
    j["premium_I"] = e.premium_I ? nlohmann::json(*e.premium_I) : nlohmann::json(nullptr);
    j["face_value"] = e.face_value ? nlohmann::json(*e.face_value) : nlohmann::json(nullptr);
    j["bequest_wealth_ratio"] = e.bequest_wealth_ratio;
    j["decomposition"] = to_json(e.decomposition);
    return j;
}

inline nlohmann::json to_json(const ExistenceReport& r) {
    nlohmann::json j;
    j["regime"] = r.regime == ExistenceReport::Regime::gamma_gt_1 ? "gamma>1" : "0<gamma<1";
    j["indeterminate"] = r.indeterminate;
    j["ok"] = r.ok();
    auto checks = nlohmann::json::array();
    for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}});
    j["checks"] = checks;
    return j;
}

inline nlohmann::json to_json(const HouseholdSpec& h) {
    return {{"gamma", h.gamma},
            {"theta", h.theta},
            {"delta", h.delta},
            {"kappa_weight_1", h.kappa1_w},
            {"kappa_weight_2", h.kappa2_w},
            {"T_R", h.T_R},
            {"T", h.T},
            {"W0", h.W0},
            {"mortality", {{"b", h.mortality.b}, {"m", h.mortality.m}, {"x", h.mortality.x}}},
            {"income",
             {{"Y0", h.income.Y0},
              {"a0", h.income.a0},
              {"a1", h.income.a1},
              {"a2", h.income.a2},
              {"age_offset", h.income.age_offset}}}};
}

// Reads the keys present in `j`; absent keys keep their current value.
inline void apply_household_json(HouseholdSpec& h, const nlohmann::json& j) {
    auto get = [&](const nlohmann::json& o, const char* k, double& dst) {
        if (o.contains(k)) {
            require(o.at(k).is_number(), Errc::InvalidArgument, std::string("household '") + k + "' must be a number");
            dst = o.at(k).get<double>();
        }
    };
    get(j, "gamma", h.gamma);
    get(j, "theta", h.theta);
    get(j, "delta", h.delta);
    get(j, "kappa_weight_1", h.kappa1_w);
    get(j, "kappa_weight_2", h.kappa2_w);
    get(j, "T_R", h.T_R);
    get(j, "T", h.T);
    get(j, "W0", h.W0);
    if (j.contains("mortality")) {
        get(j.at("mortality"), "b", h.mortality.b);
        get(j.at("mortality"), "m", h.mortality.m);
        get(j.at("mortality"), "x", h.mortality.x);
    }
    if (j.contains("income")) {
        const auto& i = j.at("income");
        get(i, "Y0", h.income.Y0);
        get(i, "a0", h.income.a0);
        get(i, "a1", h.income.a1);
        get(i, "a2", h.income.a2);
        get(i, "age_offset", h.income.age_offset);
    }
}

inline nlohmann::json to_json(const HjbPhaseSummary& s) {
    return {{"phase", phase_name(s.phase)},
            {"samples", s.samples},
            {"max_relative_residual", s.max_relative},
            {"max_suboptimal_relative_residual", s.max_suboptimal},
            {"max_finite_difference_gap", s.max_fd_gap},
            {"max_foc_mismatch", s.max_foc}};
}

inline nlohmann::json to_json(const MleResult& r) {
    nlohmann::json j;
    j["market"] = to_json(r.market);
    j["meas_sd"] = json_vec(r.meas_sd);
    j["loglik"] = r.loglik;
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["gradient_norm"] = r.grad_norm;
    j["best_start"] = r.best_start;
    nlohmann::json se;
    for (int i = 0; i < kNumCalibParams; ++i)
        se[calib_param_names()[i]] = std::isfinite(r.stderrs(i)) ? nlohmann::json(r.stderrs(i)) : nlohmann::json(nullptr);
    const double dse = delta_R_stderr(r);
    se["delta_R"] = std::isfinite(dse) ? nlohmann::json(dse) : nlohmann::json(nullptr);
    j["stderr"] = se;
    auto starts = nlohmann::json::array();
    for (const auto& s : r.starts)
        starts.push_back({{"loglik", s.loglik}, {"iterations", s.iterations}, {"converged", s.converged}});
    j["starts"] = starts;
    return j;
}

inline Vec8 meas_sd_from_json(const nlohmann::json& j, const Vec8& fallback) {
    if (!j.contains("meas_sd")) return fallback;
    const auto& a = j.at("meas_sd");
    require(a.is_array() && a.size() == 8, Errc::InvalidArgument, "meas_sd must be an array of 8 numbers");
    Vec8 v;
    for (int i = 0; i < 8; ++i) v(i) = a.at(i).get<double>();
    return v;
}

}  // namespace lcmi
