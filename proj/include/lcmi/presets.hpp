#pragma once

#include "lcmi/market.hpp"

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace lcmi {

// US monthly data June 1961 - December 2023, annualized.
inline MarketParams preset_us_1961_2023() {
    MarketParams p;
    p.delta_r = 0.01254;
    p.delta_R = 0.05120;
    p.delta_pi_e = 0.03831;
    p.kappa1 = 0.61921;
    p.kappa2 = 0.18894;
    p.sigma1 << 0.02209, 0.0, 0.0, 0.0;
    p.sigma2 << -0.00673, 0.01408, 0.0, 0.0;
    p.sigma_Pi << 0.00042, 0.00207, 0.01363, 0.0;
    p.sigma_S << -0.01974, -0.01785, -0.00793, 0.15410;
    p.mu0 = 0.046;
    p.mu1 << -1.97, -1.41;
    p.Lambda0 << 0.00487, -0.17007, 0.0, 0.27943;
    p.Lambda1 << -9.92002, 0.0,
                 0.0, -9.98001,
                 0.0, 0.0,
                 -14.05465, -10.30593;
    return p;
}

inline std::vector<std::string> preset_names() { return {"us-1961-2023"}; }

inline MarketParams load_preset(const std::string& name) {
    if (name == "us-1961-2023") return preset_us_1961_2023();
    throw Error(Errc::UnknownPreset, "no built-in preset named '" + name + "'");
}

namespace detail {
template <int N>
nlohmann::json vec_json(const Eigen::Matrix<double, N, 1>& v) {
    auto a = nlohmann::json::array();
    for (int i = 0; i < N; ++i) a.push_back(v(i));
    return a;
}
template <int N>
Eigen::Matrix<double, N, 1> vec_from(const nlohmann::json& j, const char* key) {
    require(j.contains(key) && j.at(key).is_array() && j.at(key).size() == N, Errc::InvalidArgument,
            std::string("parameter '") + key + "' must be an array of length " + std::to_string(N));
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) v(i) = j.at(key).at(i).get<double>();
    return v;
}
inline double num_from(const nlohmann::json& j, const char* key) {
    require(j.contains(key) && j.at(key).is_number(), Errc::InvalidArgument,
            std::string("parameter '") + key + "' missing or not a number");
    return j.at(key).get<double>();
}
}  // namespace detail

// Flat key-value form used for parameter files and calibration output.
inline nlohmann::json to_json(const MarketParams& p) {
    nlohmann::json j;
    j["delta_r"] = p.delta_r;
    j["delta_pi_e"] = p.delta_pi_e;
    j["delta_R"] = p.delta_R;
    j["kappa1"] = p.kappa1;
    j["kappa2"] = p.kappa2;
    j["sigma1"] = detail::vec_json<4>(p.sigma1);
    j["sigma2"] = detail::vec_json<4>(p.sigma2);
    j["sigma_Pi"] = detail::vec_json<4>(p.sigma_Pi);
    j["sigma_S"] = detail::vec_json<4>(p.sigma_S);
    j["mu0"] = p.mu0;
    j["mu1"] = detail::vec_json<2>(p.mu1);
    j["Lambda0"] = detail::vec_json<4>(p.Lambda0);
    j["Lambda1_11"] = p.Lambda1(0, 0);
    j["Lambda1_22"] = p.Lambda1(1, 1);
    j["Lambda1_41"] = p.Lambda1(3, 0);
    j["Lambda1_42"] = p.Lambda1(3, 1);
    return j;
}

inline MarketParams market_from_json(const nlohmann::json& j) {
    MarketParams p;
    p.delta_r = detail::num_from(j, "delta_r");
    p.delta_pi_e = detail::num_from(j, "delta_pi_e");
    p.delta_R = detail::num_from(j, "delta_R");
    p.kappa1 = detail::num_from(j, "kappa1");
    p.kappa2 = detail::num_from(j, "kappa2");
    p.sigma1 = detail::vec_from<4>(j, "sigma1");
    p.sigma2 = detail::vec_from<4>(j, "sigma2");
    p.sigma_Pi = detail::vec_from<4>(j, "sigma_Pi");
    p.sigma_S = detail::vec_from<4>(j, "sigma_S");
    p.mu0 = detail::num_from(j, "mu0");
    p.mu1 = detail::vec_from<2>(j, "mu1");
    p.Lambda0 = detail::vec_from<4>(j, "Lambda0");
    p.Lambda1.setZero();
    p.Lambda1(0, 0) = detail::num_from(j, "Lambda1_11");
    p.Lambda1(1, 1) = detail::num_from(j, "Lambda1_22");
    p.Lambda1(3, 0) = detail::num_from(j, "Lambda1_41");
    p.Lambda1(3, 1) = detail::num_from(j, "Lambda1_42");
    return p;
}

inline MarketParams load_market_file(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), Errc::InvalidArgument, "cannot open parameter file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidArgument, "malformed parameter file " + path + ": " + e.what());
    }
    // Calibration output nests the market under "market".
    if (j.contains("market")) return market_from_json(j.at("market"));
    return market_from_json(j);
}

}  // namespace lcmi
