#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridsim/control/adp.hpp"
#include "gridsim/control/dqn.hpp"
#include "gridsim/control/hybrid.hpp"
#include "gridsim/control/ppo.hpp"
#include "gridsim/core/bus_state.hpp"
#include "gridsim/core/errors.hpp"
#include "gridsim/cyber/actuation.hpp"
#include "gridsim/cyber/channel.hpp"
#include "gridsim/devices/load.hpp"
#include "gridsim/devices/renewables.hpp"
#include "gridsim/devices/storage.hpp"
#include "gridsim/market/game.hpp"

#ifndef GRIDSIM_DATA_DIR
#define GRIDSIM_DATA_DIR "data"
#endif

namespace gridsim::sim {

// Device placement. Bus ids are 1-based; an empty list with `all` set means
// every bus of the network.
template <class Params>
struct Placement {
    bool all = false;
    std::vector<int> buses;
    Params params;

    bool covers(int bus_id) const {
        if (all) return true;
        for (int b : buses)
            if (b == bus_id) return true;
        return false;
    }
};

struct LoadSettings {
    devices::DailyShape shape = devices::default_load_shape();
    double variability = 0.2;
    double noise_sigma = 3.0;  // kW
    double jump_prob = 0.0;
    double max_jump = 0.2;
    int jump_hold_steps = 1;
    double scale = 1.0;  // multiplies the network base loads
};

struct DeviceRoster {
    LoadSettings load;
    Placement<devices::SolarUnit> solar{false, {5, 10, 12, 16, 18, 22, 25, 30}, {}};
    Placement<devices::WindUnit> wind{false, {5, 9, 14, 20, 24, 28, 31}, {}};
    Placement<devices::Battery> battery{true, {}, {}};
    Placement<devices::EvCharger> ev{false, {8, 13, 20, 26, 30}, {}};
};

struct ActionScaling {
    double q_max_kvar = 50.0;  // reactive range of u0
    double shed_max = 0.2;     // fraction of the load reachable by u2
};

struct ControllerSet {
    bool adp = true;
    bool ppo = true;
    bool dqn = true;

    bool any() const { return adp || ppo || dqn; }
    bool has(control::ControllerTag t) const {
        switch (t) {
            case control::ControllerTag::adp: return adp;
            case control::ControllerTag::ppo: return ppo;
            case control::ControllerTag::dqn: return dqn;
        }
        return false;
    }
};

struct AttackSchedule {
    // Explicit windows win; otherwise windows are drawn at random.
    std::vector<cyber::AttackWindow> windows;
    double expected_windows = 6.0;
    long window_length = 150;
};

struct ScenarioConfig {
    std::string network_file = std::string(GRIDSIM_DATA_DIR) + "/ieee33.json";
    long steps = 6000;
    std::uint64_t seed = 42;
    double dt = 1.0;  // s
    int day_length_steps = 6000;
    double start_hour = 0.0;

    bool enable_dynamics = true;
    bool enable_attacks = true;
    bool hybrid = true;
    ControllerSet controllers;

    double alpha = 0.1;
    std::size_t resilience_window = 100;
    std::size_t moving_average_window = 100;
    std::size_t cloud_latency = 2;
    long cloud_sync_period = 50;
    double max_diverged_fraction = 0.01;
    int pretrain_episodes = 0;  // disturbance-free warm-up runs before the main run
    long pretrain_steps = 600;

    DeviceRoster devices;
    ActionScaling actions;
    FeatureScales features;
    cyber::ChannelConfig channel;
    cyber::FdiConfig fdi;
    AttackSchedule attacks;
    cyber::ActuationConfig actuation;

    control::AdpConfig adp;
    control::PpoConfig ppo = [] {
        control::PpoConfig p;
        p.log_std_floor = -0.7;  // keeps exploration alive over a long run
        return p;
    }();
    control::DqnConfig dqn;

    std::vector<market::ProsumerAgent> prosumers;
    market::LinearPrice price;
};

inline void validate(const ScenarioConfig& c) {
    if (c.steps <= 0) throw ConfigError("steps must be positive");
    if (!(c.dt > 0.0)) throw ConfigError("dt must be positive");
    if (c.day_length_steps <= 0) throw ConfigError("day length must be positive");
    if (!(c.alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (c.resilience_window == 0 || c.moving_average_window == 0) throw ConfigError("windows must be positive");
    if (c.cloud_sync_period <= 0) throw ConfigError("cloud sync period must be positive");
    if (c.cloud_latency > cyber::max_delay + 8) throw ConfigError("cloud latency too large");
    if (!(c.actions.q_max_kvar >= 0.0 && c.actions.shed_max >= 0.0 && c.actions.shed_max <= 1.0))
        throw ConfigError("action scaling out of range");
    if (c.pretrain_episodes < 0 || c.pretrain_steps <= 0) throw ConfigError("pre-training counts out of range");
    if (!(c.max_diverged_fraction >= 0.0 && c.max_diverged_fraction <= 1.0))
        throw ConfigError("diverged fraction must lie in [0, 1]");
    cyber::validate(c.channel);
    cyber::validate(c.fdi);
    cyber::validate(c.actuation);
    control::validate(c.adp);
    control::validate(c.ppo);
    control::validate(c.dqn);
    for (const auto& p : c.prosumers) market::validate(p);
}

namespace detail {

using nlohmann::json;

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline nn::OptimizerConfig read_optimizer(const json& j, nn::OptimizerConfig o) {
    if (j.contains("kind")) {
        const auto k = j.at("kind").get<std::string>();
        if (k == "adam")
            o.kind = nn::OptimizerKind::adam;
        else if (k == "sgd")
            o.kind = nn::OptimizerKind::sgd;
        else
            throw ConfigError("unknown optimizer kind: " + k);
    }
    read(j, "learning_rate", o.learning_rate);
    read(j, "grad_clip", o.grad_clip);
    return o;
}

template <class P, class Fill>
Placement<P> read_placement(const json& j, Placement<P> p, Fill fill) {
    if (j.contains("buses")) {
        const auto& b = j.at("buses");
        if (b.is_string()) {
            if (b.get<std::string>() != "all") throw ConfigError("bus list must be an array or \"all\"");
            p.all = true;
            p.buses.clear();
        } else {
            p.all = false;
            p.buses = b.get<std::vector<int>>();
        }
    }
    fill(j, p.params);
    return p;
}

inline std::vector<int> read_hidden(const json& j, std::vector<int> h) {
    if (j.contains("hidden")) h = j.at("hidden").get<std::vector<int>>();
    return h;
}

inline nn::Activation read_activation(const json& j, nn::Activation a) {
    if (j.contains("activation")) a = nn::activation_from_string(j.at("activation").get<std::string>());
    return a;
}

}  // namespace detail

// Controller subset from a comma-separated list such as "adp,ppo".
inline ControllerSet parse_controllers(const std::string& list) {
    ControllerSet c{false, false, false};
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto end = std::min(list.find(',', start), list.size());
        const auto name = list.substr(start, end - start);
        if (name == "adp")
            c.adp = true;
        else if (name == "ppo")
            c.ppo = true;
        else if (name == "dqn")
            c.dqn = true;
        else if (!name.empty())
            throw ConfigError("unknown controller: " + name);
        start = end + 1;
    }
    if (!c.any()) throw ConfigError("at least one controller must be enabled");
    return c;
}

// Fields absent from the document keep their defaults. Relative network
// paths resolve against `base_dir`.
inline ScenarioConfig scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    using detail::read;
    ScenarioConfig c;
    try {
        if (j.contains("network_file")) {
            std::filesystem::path p = j.at("network_file").get<std::string>();
            if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
            c.network_file = p.string();
        }
        read(j, "steps", c.steps);
        read(j, "seed", c.seed);
        read(j, "dt_s", c.dt);
        read(j, "day_length_steps", c.day_length_steps);
        read(j, "start_hour", c.start_hour);
        read(j, "alpha", c.alpha);
        read(j, "resilience_window", c.resilience_window);
        read(j, "moving_average_window", c.moving_average_window);
        read(j, "cloud_latency_steps", c.cloud_latency);
        read(j, "cloud_sync_period", c.cloud_sync_period);
        read(j, "max_diverged_fraction", c.max_diverged_fraction);
        read(j, "pretrain_episodes", c.pretrain_episodes);
        read(j, "pretrain_steps", c.pretrain_steps);

        if (j.contains("flags")) {
            const auto& f = j.at("flags");
            read(f, "enable_dynamics", c.enable_dynamics);
            read(f, "enable_attacks", c.enable_attacks);
            read(f, "hybrid", c.hybrid);
            if (f.contains("controllers")) {
                const auto& list = f.at("controllers");
                if (list.is_string()) {
                    c.controllers = parse_controllers(list.get<std::string>());
                } else {
                    std::string joined;
                    for (const auto& name : list) joined += name.get<std::string>() + ",";
                    c.controllers = parse_controllers(joined);
                }
            }
        }

        if (j.contains("devices")) {
            const auto& d = j.at("devices");
            if (d.contains("load")) {
                const auto& l = d.at("load");
                auto& s = c.devices.load;
                if (l.contains("daily_shape")) {
                    const auto v = l.at("daily_shape").get<std::vector<double>>();
                    if (v.size() != 24) throw ConfigError("daily_shape needs 24 hourly values");
                    std::copy(v.begin(), v.end(), s.shape.begin());
                }
                read(l, "variability", s.variability);
                read(l, "noise_sigma_kw", s.noise_sigma);
                read(l, "jump_prob", s.jump_prob);
                read(l, "max_jump", s.max_jump);
                read(l, "jump_hold_steps", s.jump_hold_steps);
                read(l, "scale", s.scale);
            }
            if (d.contains("solar"))
                c.devices.solar = detail::read_placement(d.at("solar"), c.devices.solar, [](const auto& x, auto& u) {
                    read(x, "rated_kw", u.rated);
                    read(x, "efficiency", u.efficiency);
                    read(x, "area_m2", u.area);
                    read(x, "beta_a", u.beta_a);
                    read(x, "beta_b", u.beta_b);
                    read(x, "peak_irradiance", u.peak_irradiance);
                    read(x, "sunrise_h", u.sunrise);
                    read(x, "sunset_h", u.sunset);
                    read(x, "dip_prob", u.dip_prob);
                    read(x, "dip_min", u.dip_min);
                    read(x, "dip_max", u.dip_max);
                    read(x, "dip_hold_steps", u.dip_hold_steps);
                });
            if (d.contains("wind"))
                c.devices.wind = detail::read_placement(d.at("wind"), c.devices.wind, [](const auto& x, auto& u) {
                    read(x, "rated_kw", u.rated);
                    read(x, "air_density", u.air_density);
                    read(x, "swept_area_m2", u.swept_area);
                    read(x, "power_coeff", u.power_coeff);
                    read(x, "weibull_scale", u.weibull_scale);
                    read(x, "weibull_shape", u.weibull_shape);
                    read(x, "cut_in", u.cut_in);
                    read(x, "cut_out", u.cut_out);
                });
            if (d.contains("battery"))
                c.devices.battery =
                    detail::read_placement(d.at("battery"), c.devices.battery, [](const auto& x, auto& b) {
                        read(x, "e_max_kwh", b.e_max);
                        read(x, "p_max_kw", b.p_max);
                        read(x, "soc", b.soc);
                        read(x, "soc_min", b.soc_min);
                        read(x, "soc_max", b.soc_max);
                        read(x, "eta_charge", b.eta_charge);
                        read(x, "eta_discharge", b.eta_discharge);
                    });
            if (d.contains("ev"))
                c.devices.ev = detail::read_placement(d.at("ev"), c.devices.ev, [](const auto& x, auto& e) {
                    read(x, "demand_min_kw", e.demand_min);
                    read(x, "demand_max_kw", e.demand_max);
                    read(x, "efficiency", e.efficiency);
                    read(x, "avail_start_h", e.avail_start);
                    read(x, "avail_end_h", e.avail_end);
                });
        }

        if (j.contains("actions")) {
            read(j.at("actions"), "q_max_kvar", c.actions.q_max_kvar);
            read(j.at("actions"), "shed_max", c.actions.shed_max);
        }
        if (j.contains("feature_scales")) {
            const auto& f = j.at("feature_scales");
            read(f, "p_base_kw", c.features.p_base);
            read(f, "q_base_kvar", c.features.q_base);
            read(f, "solar_rated_kw", c.features.solar_rated);
            read(f, "wind_rated_kw", c.features.wind_rated);
            read(f, "ev_max_kw", c.features.ev_max);
        }
        if (j.contains("channel")) {
            const auto& ch = j.at("channel");
            if (ch.contains("delay_pmf")) {
                const auto v = ch.at("delay_pmf").get<std::vector<double>>();
                if (v.size() != c.channel.delay_pmf.size()) throw ConfigError("delay_pmf needs one mass per delay");
                std::copy(v.begin(), v.end(), c.channel.delay_pmf.begin());
            }
            read(ch, "p_drop", c.channel.p_drop);
            read(ch, "sigma_v", c.channel.sigma_v);
            read(ch, "sigma_f", c.channel.sigma_f);
            read(ch, "ms_per_step", c.channel.ms_per_step);
            read(ch, "min_ms", c.channel.min_ms);
        }
        if (j.contains("fdi")) {
            const auto& f = j.at("fdi");
            read(f, "p_fdi", c.fdi.p_fdi);
            read(f, "a_v_min", c.fdi.a_v_min);
            read(f, "a_v_max", c.fdi.a_v_max);
            read(f, "a_f_min", c.fdi.a_f_min);
            read(f, "a_f_max", c.fdi.a_f_max);
            read(f, "severity", c.fdi.severity);
            read(f, "expected_windows", c.attacks.expected_windows);
            read(f, "window_length", c.attacks.window_length);
            if (f.contains("windows"))
                for (const auto& w : f.at("windows"))
                    c.attacks.windows.push_back({w.at(0).get<long>(), w.at(1).get<long>()});
        }
        if (j.contains("actuation")) {
            read(j.at("actuation"), "sigma_edge", c.actuation.sigma_edge);
            read(j.at("actuation"), "tau_inv_s", c.actuation.tau_inv);
        }
        if (j.contains("adp")) {
            const auto& a = j.at("adp");
            c.adp.hidden = detail::read_hidden(a, c.adp.hidden);
            c.adp.activation = detail::read_activation(a, c.adp.activation);
            read(a, "gamma", c.adp.gamma);
            read(a, "exploration_sigma", c.adp.exploration_sigma);
            if (a.contains("critic_opt")) c.adp.critic_opt = detail::read_optimizer(a.at("critic_opt"), c.adp.critic_opt);
            if (a.contains("actor_opt")) c.adp.actor_opt = detail::read_optimizer(a.at("actor_opt"), c.adp.actor_opt);
        }
        if (j.contains("ppo")) {
            const auto& p = j.at("ppo");
            c.ppo.hidden = detail::read_hidden(p, c.ppo.hidden);
            c.ppo.activation = detail::read_activation(p, c.ppo.activation);
            read(p, "clip_eps", c.ppo.clip_eps);
            read(p, "gamma", c.ppo.gamma);
            read(p, "gae_lambda", c.ppo.gae_lambda);
            read(p, "rollout_len", c.ppo.rollout_len);
            read(p, "epochs", c.ppo.epochs);
            read(p, "minibatch", c.ppo.minibatch);
            read(p, "init_log_std", c.ppo.init_log_std);
            read(p, "entropy_coef", c.ppo.entropy_coef);
            read(p, "log_std_floor", c.ppo.log_std_floor);
            if (p.contains("actor_opt")) c.ppo.actor_opt = detail::read_optimizer(p.at("actor_opt"), c.ppo.actor_opt);
            if (p.contains("critic_opt")) c.ppo.critic_opt = detail::read_optimizer(p.at("critic_opt"), c.ppo.critic_opt);
        }
        if (j.contains("dqn")) {
            const auto& q = j.at("dqn");
            c.dqn.hidden = detail::read_hidden(q, c.dqn.hidden);
            c.dqn.activation = detail::read_activation(q, c.dqn.activation);
            read(q, "action_grid", c.dqn.action_grid);
            read(q, "component", c.dqn.component);
            read(q, "gamma", c.dqn.gamma);
            read(q, "epsilon_start", c.dqn.epsilon_start);
            read(q, "epsilon_end", c.dqn.epsilon_end);
            read(q, "epsilon_decay_steps", c.dqn.epsilon_decay_steps);
            read(q, "replay_capacity", c.dqn.replay_capacity);
            read(q, "batch_size", c.dqn.batch_size);
            read(q, "target_sync", c.dqn.target_sync);
            read(q, "violation_penalty", c.dqn.violation_penalty);
            if (q.contains("opt")) c.dqn.opt = detail::read_optimizer(q.at("opt"), c.dqn.opt);
        }
        if (j.contains("market")) {
            const auto& m = j.at("market");
            if (m.contains("prosumers"))
                for (const auto& p : m.at("prosumers")) {
                    market::ProsumerAgent a;
                    read(p, "a", a.a);
                    if (p.contains("load_max_kw")) a.p_min = -p.at("load_max_kw").get<double>();
                    if (p.contains("gen_max_kw")) a.p_max = p.at("gen_max_kw").get<double>();
                    read(p, "wear", a.wear);
                    read(p, "comfort", a.comfort);
                    read(p, "comfort_ref", a.comfort_ref);
                    c.prosumers.push_back(a);
                }
            if (m.contains("price")) {
                read(m.at("price"), "intercept", c.price.intercept);
                read(m.at("price"), "slope", c.price.slope);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario config: ") + e.what());
    }
    validate(c);
    return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("scenario config " + path + ": " + e.what());
    }
    return scenario_from_json(j, std::filesystem::path(path).parent_path());
}

inline std::string default_scenario_path() { return std::string(GRIDSIM_DATA_DIR) + "/default_scenario.json"; }

}  // namespace gridsim::sim
