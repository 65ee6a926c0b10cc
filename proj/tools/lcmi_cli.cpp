// lcmi: command-line front end.

#include "lcmi/actuarial.hpp"
#include "lcmi/calibration.hpp"
#include "lcmi/hjb.hpp"
#include "lcmi/io.hpp"
#include "lcmi/montecarlo.hpp"
#include "lcmi/presets.hpp"
#include "lcmi/report.hpp"
#include "lcmi/riccati.hpp"
#include "lcmi/strategies.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace lcmi;

namespace {

// Options shared by every model-building subcommand. Precedence: flags over
// parameter file over preset.
struct CommonOptions {
    std::string preset;
    std::string params;
    std::optional<double> gamma, theta, delta, kw1, kw2, kf1, kf2, T, T_R, W0, age, age_offset;

    void add_market(CLI::App* app) {
        auto* p = app->add_option("--preset", preset, "Built-in market preset (us-1961-2023)");
        auto* f = app->add_option("--params", params, "JSON parameter file (market, optional household)");
        p->excludes(f);
        app->add_option("--kappa-factor-1", kf1, "Override mean-reversion speed of X1");
        app->add_option("--kappa-factor-2", kf2, "Override mean-reversion speed of X2");
    }

    void add_household(CLI::App* app, bool with_gamma = true, bool with_theta = true) {
        if (with_gamma) app->add_option("--gamma", gamma, "Relative risk aversion");
        if (with_theta) app->add_option("--theta", theta, "Degree of money illusion in [0,1]");
        app->add_option("--delta", delta, "Subjective discount rate");
        app->add_option("--kappa-weight-1", kw1, "Utility weight of the breadwinner");
        app->add_option("--kappa-weight-2", kw2, "Utility weight of the family");
        app->add_option("--T", T, "Planning horizon in years");
        app->add_option("--T-R", T_R, "Retirement time in years");
        app->add_option("--W0", W0, "Initial real wealth (thousand USD)");
        app->add_option("--age", age, "Age at t = 0");
        app->add_option("--age-offset", age_offset, "Age argument offset in the income growth polynomial");
    }

    nlohmann::json param_file() const {
        nlohmann::json j;
        if (params.empty()) return j;
        std::ifstream in(params);
        require(static_cast<bool>(in), Errc::InvalidArgument, "cannot open parameter file " + params);
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::InvalidArgument, "malformed parameter file " + params + ": " + e.what());
        }
        return j;
    }

    MarketParams market() const {
        MarketParams p = params.empty() ? load_preset(preset.empty() ? "us-1961-2023" : preset)
                                        : load_market_file(params);
        if (kf1) p.kappa1 = *kf1;
        if (kf2) p.kappa2 = *kf2;
        validate(p);
        return p;
    }

    HouseholdSpec household() const {
        HouseholdSpec h;
        const nlohmann::json j = param_file();
        if (j.contains("household")) apply_household_json(h, j.at("household"));
        if (gamma) h.gamma = *gamma;
        if (theta) h.theta = *theta;
        if (delta) h.delta = *delta;
        if (kw1 && !kw2) {
            h.kappa1_w = *kw1;
            h.kappa2_w = 1.0 - *kw1;
        } else if (kw2 && !kw1) {
            h.kappa2_w = *kw2;
            h.kappa1_w = 1.0 - *kw2;
        } else if (kw1 && kw2) {
            h.kappa1_w = *kw1;
            h.kappa2_w = *kw2;
        }
        if (T) h.T = *T;
        if (T_R) h.T_R = *T_R;
        if (W0) h.W0 = *W0;
        if (age) h.mortality.x = *age;
        if (age_offset) h.income.age_offset = *age_offset;
        h.income.T_R = h.T_R;
        validate(h);
        return h;
    }
};

// Writes to `path`, or stdout when empty or "-".
class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty() && path != "-") {
            if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
            file_ = std::make_unique<std::ofstream>(path);
            require(static_cast<bool>(*file_), Errc::InvalidArgument, "cannot write '" + path + "'");
        }
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

std::string default_out_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("LCMI_OUT_DIR")) return env;
    return ".";
}

// "0.25..10" with a step, or a comma list.
std::vector<double> parse_taus(const std::string& spec, double step) {
    const auto dots = spec.find("..");
    if (dots == std::string::npos) return parse_list(spec);
    const double lo = parse_double(spec.substr(0, dots)), hi = parse_double(spec.substr(dots + 2));
    require(lo > 0.0 && hi >= lo && step > 0.0, Errc::InvalidArgument, "tau range must be lo..hi with 0 < lo <= hi");
    std::vector<double> out;
    const long n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
    return out;
}

void write_json(const nlohmann::json& j, const std::string& path) {
    Output o(path);
    o.stream() << j.dump(2) << '\n';
}

// --- market ----------------------------------------------------------------

struct MarketCmd {
    CommonOptions common;
    std::string tau = "0.25..10";
    double tau_step = 0.25, x1 = 0.0, x2 = 0.0;
    std::string out;

    void attach(CLI::App& app) {
        auto* market = app.add_subcommand("market", "Term structure under the two-factor model");
        market->require_subcommand(1);
        auto* yc = market->add_subcommand("yield-curve", "Nominal and real zero-coupon yields");
        common.add_market(yc);
        yc->add_option("--tau", tau, "Maturities: lo..hi or a comma list");
        yc->add_option("--tau-step", tau_step, "Step for a lo..hi range");
        yc->add_option("--x1", x1, "State X1");
        yc->add_option("--x2", x2, "State X2");
        yc->add_option("--out", out, "Output CSV (default stdout)");
        yc->callback([this] { run(); });
    }

    void run() {
        const MarketParams p = common.market();
        const auto taus = parse_taus(tau, tau_step);
        const BondCoefficients bc = solve_bond_odes(p, taus.back());
        const Vec2 X(x1, x2);
        Output o(out);
        CsvWriter w(o.stream(), {"tau", "nominal_yield", "real_yield"});
        for (double t : taus) {
            w.cell(t).cell(bc.nominal_yield(t, X)).cell(bc.real_yield(t, X));
            w.end_row();
        }
    }
};

// --- actuarial -------------------------------------------------------------

struct ActuarialCmd {
    CommonOptions common;
    double from_age = 35.0, to_age = 95.0, step = 1.0;
    std::string out;

    void attach(CLI::App& app) {
        auto* a = app.add_subcommand("actuarial", "Mortality, income and human capital");
        a->require_subcommand(1);
        auto* t = a->add_subcommand("table", "Hazard, survival, income and human capital by age");
        common.add_market(t);
        common.add_household(t, false, false);
        t->add_option("--from-age", from_age, "First age");
        t->add_option("--to-age", to_age, "Last age");
        t->add_option("--step", step, "Age step in years");
        t->add_option("--out", out, "Output CSV (default stdout)");
        t->callback([this] { run(); });
    }

    void run() {
        const MarketParams p = common.market();
        const HouseholdSpec h = common.household();
        require(step > 0.0 && to_age >= from_age, Errc::InvalidArgument, "need step > 0 and to-age >= from-age");
        require(from_age >= h.mortality.x, Errc::InvalidArgument, "from-age must not precede the initial age");
        const BondCoefficients bc = solve_bond_odes(p, std::max(h.T_R, 1e-3));
        Output o(out);
        CsvWriter w(o.stream(), {"t", "hazard", "survival", "income", "human_capital_at_X0"});
        const long n = static_cast<long>(std::floor((to_age - from_age) / step + 1e-9));
        for (long i = 0; i <= n; ++i) {
            const double t = from_age + static_cast<double>(i) * step - h.mortality.x;
            const double hc = t < h.T_R ? human_capital(h.income, h.mortality, bc, t, Vec2::Zero()) : 0.0;
            w.cell(t).cell(hazard(h.mortality, t)).cell(survival(h.mortality, t)).cell(income_path(h.income, t)).cell(hc);
            w.end_row();
        }
    }
};

// --- solve -----------------------------------------------------------------

struct SolveCmd {
    CommonOptions common;
    double out_step = 1.0 / 12.0;
    std::string out, report;

    void attach(CLI::App& app) {
        auto* s = app.add_subcommand("solve", "Riccati system for the value function");
        s->require_subcommand(1);
        auto* g = s->add_subcommand("gammas", "Gamma0, Gamma1, Gamma2 on a maturity grid");
        common.add_market(g);
        common.add_household(g);
        g->add_option("--out-step", out_step, "Spacing of output rows in tau");
        g->add_option("--out", out, "Output CSV (default stdout)");
        g->add_option("--report", report, "Existence report JSON (default stderr)");
        g->callback([this] { run(); });
    }

    void run() {
        const MarketParams p = common.market();
        const HouseholdSpec h = common.household();
        require(out_step > 0.0, Errc::InvalidArgument, "out-step must be positive");
        const ExistenceReport rep = existence_check(p, h.gamma, h.theta, h.T);
        const nlohmann::json rj = to_json(rep);
        if (report.empty())
            std::cerr << rj.dump(2) << '\n';
        else
            write_json(rj, report);
        if (!rep.ok()) throw Error(Errc::ExistenceFail, "global existence conditions fail");
        const GammaSolution sol = solve_gamma_system(build_coefficients(p, h.gamma, h.theta), h.T);
        Output o(out);
        CsvWriter w(o.stream(), {"tau", "Gamma0", "Gamma1_1", "Gamma1_2", "Gamma2_11", "Gamma2_12", "Gamma2_22"});
        const long n = static_cast<long>(std::floor(h.T / out_step + 1e-9));
        for (long i = 0; i <= n; ++i) {
            const double tau = std::min(h.T, static_cast<double>(i) * out_step);
            const GammaState s = sol.state(tau);
            const Mat2 G2 = GammaSolution::to_mat(s);
            w.cell(tau).cell(s(6)).cell(s(4)).cell(s(5)).cell(G2(0, 0)).cell(G2(0, 1)).cell(G2(1, 1));
            w.end_row();
        }
    }
};

// --- policy ----------------------------------------------------------------

struct PolicyCmd {
    CommonOptions eval_common, surf_common;
    double t = 5.0, x1 = 0.0, x2 = 0.0;
    std::optional<double> w_eval, w_surf;
    bool dead = false, dead_surf = false;
    double ts = 5.0;
    std::string grid = "41x41", x1_range = "-0.1454:0.1454", x2_range = "-0.1696:0.1696";
    std::string out_eval, out_surf;

    void attach(CLI::App& app) {
        auto* p = app.add_subcommand("policy", "Optimal strategies at a state");
        p->require_subcommand(1);
        auto* e = p->add_subcommand("eval", "Evaluate the strategy at one state (JSON)");
        eval_common.add_market(e);
        eval_common.add_household(e);
        e->add_option("--t", t, "Time since age x");
        e->add_option("--x1", x1, "State X1");
        e->add_option("--x2", x2, "State X2");
        e->add_option("--w", w_eval, "Real wealth W_R (default W0)");
        e->add_flag("--dead", dead, "Evaluate after the breadwinner's death");
        e->add_option("--out", out_eval, "Output JSON (default stdout)");
        e->callback([this] { run_eval(); });

        auto* s = p->add_subcommand("surface", "Strategies over an (X1, X2) grid (CSV)");
        surf_common.add_market(s);
        surf_common.add_household(s);
        s->add_option("--t", ts, "Time since age x");
        s->add_option("--grid", grid, "Grid size N1xN2");
        s->add_option("--x1-range", x1_range, "lo:hi for X1");
        s->add_option("--x2-range", x2_range, "lo:hi for X2");
        s->add_option("--w", w_surf, "Real wealth W_R (default W0)");
        s->add_flag("--dead", dead_surf, "Evaluate after the breadwinner's death");
        s->add_option("--out", out_surf, "Output CSV (default stdout)");
        s->callback([this] { run_surface(); });
    }

    void run_eval() {
        const Model m = make_model(eval_common.market(), eval_common.household());
        const PolicyEvaluation e = evaluate_policy(m, t, w_eval.value_or(m.household.W0), Vec2(x1, x2), !dead);
        write_json(to_json(e), out_eval);
    }

    void run_surface() {
        const Model m = make_model(surf_common.market(), surf_common.household());
        const auto x = grid.find('x');
        require(x != std::string::npos, Errc::InvalidArgument, "grid must be N1xN2");
        const int n1 = std::stoi(grid.substr(0, x)), n2 = std::stoi(grid.substr(x + 1));
        require(n1 >= 2 && n2 >= 2, Errc::InvalidArgument, "grid needs at least 2 points per axis");
        const auto r1 = parse_interval(x1_range), r2 = parse_interval(x2_range);
        const double W = w_surf.value_or(m.household.W0);
        Output o(out_surf);
        CsvWriter w(o.stream(), {"x1", "x2", "c1", "c2", "premium", "face_value", "bequest_ratio", "human_capital",
                                 "beta_1", "beta_2", "beta_3", "beta_4", "alpha_1", "alpha_2", "alpha_3", "alpha_4",
                                 "smd_1", "smd_2", "smd_3", "smd_4", "ifhd_1", "ifhd_2", "ifhd_3", "ifhd_4",
                                 "ithd_1", "ithd_2", "ithd_3", "ithd_4"});
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (int i = 0; i < n1; ++i)
            for (int j = 0; j < n2; ++j) {
                const Vec2 X(r1.first + (r1.second - r1.first) * i / (n1 - 1),
                             r2.first + (r2.second - r2.first) * j / (n2 - 1));
                const PolicyEvaluation e = evaluate_policy(m, ts, W, X, !dead_surf);
                w.cell(X(0)).cell(X(1)).cell(e.c1.value_or(nan)).cell(e.c2).cell(e.premium_I.value_or(nan));
                w.cell(e.face_value.value_or(nan)).cell(e.bequest_wealth_ratio).cell(e.human_capital);
                for (const Vec4* v : {&e.beta, &e.alpha, &e.decomposition.smd, &e.decomposition.ifhd,
                                      &e.decomposition.ithd})
                    for (int k = 0; k < 4; ++k) w.cell((*v)(k));
                w.end_row();
            }
    }
};

// --- simulate --------------------------------------------------------------

struct SimOptions {
    long paths = 100000;
    double dt = 1.0 / 12.0;
    std::uint64_t seed = 42;
    bool antithetic = false;
    int threads = 1;

    void add(CLI::App* app) {
        app->add_option("--paths", paths, "Number of simulated paths");
        app->add_option("--dt", dt, "Time step in years");
        app->add_option("--seed", seed, "Random seed");
        app->add_flag("--antithetic", antithetic, "Antithetic pairs");
        app->add_option("--threads", threads, "Worker threads");
    }

    SimConfig config() const {
        SimConfig c;
        c.n_paths = paths;
        c.dt = dt;
        c.seed = seed;
        c.antithetic = antithetic;
        c.threads = threads;
        return c;
    }
};

struct SimulateCmd {
    CommonOptions curves_common, welfare_common;
    SimOptions curves_sim, welfare_sim;
    std::string thetas = "0,0.2,0.4,0.6,0.8,1.0";
    std::string gammas = "3,5,10";
    std::string theta_grid = "0:1:0.05";
    std::string conditioning = "both";
    std::string out_dir, out_welfare;

    void attach(CLI::App& app) {
        auto* s = app.add_subcommand("simulate", "Monte Carlo life-cycle simulation");
        s->require_subcommand(1);
        auto* c = s->add_subcommand("curves", "Expected strategy curves, one CSV per observable");
        curves_common.add_market(c);
        curves_common.add_household(c, true, false);
        curves_sim.add(c);
        c->add_option("--thetas", thetas, "Comma list of money-illusion degrees");
        c->add_option("--conditioning", conditioning, "unconditional, alive or both")
            ->check(CLI::IsMember({"unconditional", "alive", "both"}));
        c->add_option("--out-dir", out_dir, "Output directory (default $LCMI_OUT_DIR or .)");
        c->callback([this] { run_curves(); });

        auto* w = s->add_subcommand("welfare", "Welfare loss of money-illusioned strategies");
        welfare_common.add_market(w);
        welfare_common.add_household(w, false, false);
        welfare_sim.add(w);
        w->add_option("--gamma", gammas, "Comma list of risk aversions");
        w->add_option("--theta-grid", theta_grid, "lo:hi:step");
        w->add_option("--out", out_welfare, "Output CSV (default stdout)");
        w->callback([this] { run_welfare(); });
    }

    void run_curves() {
        const MarketParams p = curves_common.market();
        const HouseholdSpec base = curves_common.household();
        const auto ths = parse_list(thetas);
        const SimConfig cfg = curves_sim.config();
        std::vector<SimResult> results;
        for (double th : ths) {
            HouseholdSpec h = base;
            h.theta = th;
            results.push_back(simulate(make_model(p, h), cfg));
        }
        const fs::path dir = default_out_dir(out_dir);
        fs::create_directories(dir);
        auto emit = [&](int k, bool alive) {
            const std::string name = std::string(obs_name(k)) + (alive ? "_alive" : "") + ".csv";
            std::ofstream f(dir / name);
            require(static_cast<bool>(f), Errc::InvalidArgument, "cannot write " + (dir / name).string());
            CsvWriter w(f, {"age", "theta", "mean", "stderr"});
            for (std::size_t i = 0; i < ths.size(); ++i) {
                const SimResult& r = results[i];
                const auto& curve = alive ? r.alive_conditioned[k] : r.unconditional[k];
                for (std::size_t n = 0; n < r.times.size(); ++n) {
                    w.cell(r.ages[n]).cell(ths[i]).cell(curve[n].mean).cell(curve[n].stderr_);
                    w.end_row();
                }
            }
        };
        for (int k = 0; k < kNumObs; ++k) {
            if (conditioning != "alive") emit(k, false);
            if (conditioning != "unconditional" && k != kAlive) emit(k, true);
        }
    }

    void run_welfare() {
        const MarketParams p = welfare_common.market();
        const HouseholdSpec base = welfare_common.household();
        const auto gs = parse_list(gammas);
        const auto grid = parse_range(theta_grid);
        const SimConfig cfg = welfare_sim.config();
        Output o(out_welfare);
        CsvWriter w(o.stream(), {"gamma", "theta", "loss", "stderr"});
        for (double g : gs) {
            HouseholdSpec h = base;
            h.gamma = g;
            h.theta = 0.0;
            const Model m0 = make_model(p, h);
            for (double th : grid) {
                const WelfarePoint wp = welfare_point(m0, th == 0.0 ? m0 : with_theta(m0, th), cfg);
                w.cell(g).cell(th).cell(wp.loss).cell(wp.stderr_);
                w.end_row();
            }
        }
    }
};

// --- calibrate -------------------------------------------------------------

struct CalibrateCmd {
    std::string data, out, init, params;
    int restarts = 10, max_iter = 400;
    std::uint64_t seed = 7;
    std::string filter_data, filter_params, filter_out;
    int months = 750;
    std::uint64_t synth_seed = 1;
    double synth_sd = 0.0005;
    std::string synth_out, synth_params, synth_states;
    CLI::App* filter = nullptr;
    CLI::App* synth = nullptr;

    void attach(CLI::App& app) {
        auto* c = app.add_subcommand("calibrate", "Kalman-filter maximum likelihood estimation");
        c->add_option("--data", data, "Observation panel CSV");
        c->add_option("--restarts", restarts, "Number of optimizer starts");
        c->add_option("--max-iter", max_iter, "Iterations per start");
        c->add_option("--seed", seed, "Seed for restart perturbations");
        c->add_option("--init", init, "Initial parameters JSON (default: preset, 5bp yield errors)");
        c->add_option("--out", out, "Output parameters JSON (default stdout)");
        c->require_subcommand(0, 1);

        filter = c->add_subcommand("filter", "Filtered states for a parameter set");
        filter->add_option("--params", filter_params, "Parameters JSON")->required();
        filter->add_option("--data", filter_data, "Observation panel CSV")->required();
        filter->add_option("--out", filter_out, "Output CSV (default stdout)");

        synth = c->add_subcommand("synthetic", "Simulate an observation panel from a parameter set");
        synth->add_option("--params", synth_params, "Parameters JSON (default preset)");
        synth->add_option("--months", months, "Panel length");
        synth->add_option("--seed", synth_seed, "Random seed");
        synth->add_option("--meas-sd", synth_sd, "Yield measurement error standard deviation");
        synth->add_option("--out", synth_out, "Output panel CSV (default stdout)");
        synth->add_option("--states-out", synth_states, "Optional CSV of the true states");

        c->callback([this, c] {
            if (filter->parsed())
                run_filter();
            else if (synth->parsed())
                run_synth();
            else
                run_fit(c);
        });
    }

    static std::pair<MarketParams, Vec8> load_params(const std::string& path, const Vec8& fallback_sd) {
        if (path.empty()) {
            MarketParams p = preset_us_1961_2023();
            return {p, fallback_sd};
        }
        std::ifstream in(path);
        require(static_cast<bool>(in), Errc::InvalidArgument, "cannot open " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::InvalidArgument, "malformed JSON in " + path + ": " + e.what());
        }
        const nlohmann::json& mj = j.contains("market") ? j.at("market") : j;
        return {market_from_json(mj), meas_sd_from_json(j, fallback_sd)};
    }

    void run_fit(CLI::App* c) {
        if (data.empty()) throw CLI::RequiredError("--data");
        (void)c;
        const ObservationPanel panel = read_panel_file(data);
        auto [p, sd] = load_params(init, Vec8::Constant(0.0005));
        apply_identities(p);
        MleOptions o;
        o.restarts = restarts;
        o.max_iter = max_iter;
        o.seed = seed;
        const MleResult r = fit_mle(panel, pack_params(p, sd), default_bounds(), o);
        write_json(to_json(r), out);
        if (!r.converged) std::cerr << "warning: optimizer stopped before the gradient tolerance was met\n";
    }

    void run_filter() {
        const ObservationPanel panel = read_panel_file(filter_data);
        const auto [p, sd] = load_params(filter_params, Vec8::Constant(0.0005));
        const StateSpaceModel m = build_state_space(p, sd);
        Output o(filter_out);
        CsvWriter w(o.stream(), {"date", "x1", "x2", "r", "pi_e", "R"});
        for (const auto& row : filter_states(p, m, panel)) {
            w.cell(row.date).cell(row.x1).cell(row.x2).cell(row.r).cell(row.pi_e).cell(row.R);
            w.end_row();
        }
    }

    void run_synth() {
        auto [p, sd] = load_params(synth_params, Vec8::Constant(synth_sd));
        if (synth_params.empty()) apply_identities(p);
        const SyntheticPanel s = synthetic_panel(p, sd, months, synth_seed);
        {
            Output o(synth_out);
            write_panel(o.stream(), s.panel);
        }
        if (!synth_states.empty()) {
            Output o(synth_states);
            CsvWriter w(o.stream(), {"date", "x1", "x2", "log_pi", "log_s"});
            for (std::size_t t = 0; t < s.states.size(); ++t) {
                w.cell(s.panel.dates[t]);
                for (int k = 0; k < 4; ++k) w.cell(s.states[t](k));
                w.end_row();
            }
        }
    }
};

// --- verify ----------------------------------------------------------------

struct VerifyCmd {
    CommonOptions common;
    int samples = 200;
    std::uint64_t seed = 2024;
    bool no_fd = false;
    std::string report;

    void attach(CLI::App& app) {
        auto* v = app.add_subcommand("verify", "Numerical verification");
        v->require_subcommand(1);
        auto* h = v->add_subcommand("hjb", "HJB residuals of the closed-form value functions");
        common.add_market(h);
        common.add_household(h);
        h->add_option("--samples", samples, "States per phase");
        h->add_option("--seed", seed, "Sampling seed");
        h->add_flag("--no-fd", no_fd, "Skip the finite-difference cross-check");
        h->add_option("--report", report, "Output JSON (default stdout)");
        h->callback([this] { run(); });
    }

    void run() {
        const Model m = make_model(common.market(), common.household());
        nlohmann::json j;
        j["gamma"] = m.gamma();
        j["theta"] = m.theta();
        auto phases = nlohmann::json::array();
        double worst = 0.0, worst_sub = -INFINITY;
        for (Phase ph : {Phase::primary, Phase::retired, Phase::widowed}) {
            const HjbPhaseSummary s = verify_hjb_phase(m, ph, samples, seed + static_cast<int>(ph), !no_fd);
            worst = std::max(worst, s.max_relative);
            worst_sub = std::max(worst_sub, s.max_suboptimal);
            phases.push_back(to_json(s));
        }
        j["phases"] = phases;
        j["max_relative_residual"] = worst;
        j["max_suboptimal_relative_residual"] = worst_sub;
        write_json(j, report);
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Life-cycle consumption, investment and insurance under money illusion"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");
    MarketCmd market;
    ActuarialCmd actuarial;
    SolveCmd solve;
    PolicyCmd policy;
    SimulateCmd simulate_cmd;
    CalibrateCmd calibrate;
    VerifyCmd verify;
    market.attach(app);
    actuarial.attach(app);
    solve.attach(app);
    policy.attach(app);
    simulate_cmd.attach(app);
    calibrate.attach(app);
    verify.attach(app);
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return is_validation(e.code()) ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
