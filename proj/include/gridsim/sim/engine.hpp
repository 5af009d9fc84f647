#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "gridsim/control/adp.hpp"
#include "gridsim/control/cost.hpp"
#include "gridsim/control/dqn.hpp"
#include "gridsim/control/hybrid.hpp"
#include "gridsim/control/ppo.hpp"
#include "gridsim/core/random.hpp"
#include "gridsim/cyber/actuation.hpp"
#include "gridsim/cyber/channel.hpp"
#include "gridsim/devices/load.hpp"
#include "gridsim/devices/renewables.hpp"
#include "gridsim/devices/storage.hpp"
#include "gridsim/dynamics/dae.hpp"
#include "gridsim/dynamics/generator.hpp"
#include "gridsim/grid/network_io.hpp"
#include "gridsim/grid/power_flow.hpp"
#include "gridsim/metrics/resilience.hpp"
#include "gridsim/sim/records.hpp"
#include "gridsim/sim/scenario.hpp"

namespace gridsim::sim {

// Too many steps failed to solve.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StepLog {
    long step = 0;
    bool diverged = false;
    int iterations = 0;
    double max_mismatch = 0.0;
    int voltage_violations = 0;
};

struct SimulationResult {
    std::vector<StepRecord> records;
    std::vector<double> ppo_continuous;  // battery component of the PPO command, one per record
    std::map<std::string, std::vector<double>> series;
    std::vector<StepLog> log;
    std::vector<long> diverged_steps;
    std::vector<cyber::AttackWindow> attack_windows;
    long steps = 0;
    std::size_t buses = 0;
    std::size_t moving_average_window = 100;
    double wall_seconds = 0.0;
};

inline const std::vector<std::string>& series_names() {
    static const std::vector<std::string> names{"feeder_power", "wind",       "solar",    "bus5_voltage",
                                                "load_pu",      "pv_pu",      "wind_pu",  "resilience",
                                                "cost_total",   "cost_adp",   "cost_ppo", "cost_dqn"};
    return names;
}

namespace detail {

inline constexpr std::uint64_t stream_load = 1000;
inline constexpr std::uint64_t stream_solar = 2000;
inline constexpr std::uint64_t stream_wind = 3000;
inline constexpr std::uint64_t stream_ev = 4000;
inline constexpr std::uint64_t stream_channel = 5000;
inline constexpr std::uint64_t stream_actuation = 6000;
inline constexpr std::uint64_t stream_explore = 7000;
inline constexpr std::uint64_t stream_init = 7100;
inline constexpr std::uint64_t stream_attacks = 7200;
inline constexpr std::uint64_t stream_replay = 7300;
inline constexpr std::uint64_t stream_pretrain = 9000;

constexpr std::array<control::ControllerTag, 3> all_tags{control::ControllerTag::adp, control::ControllerTag::ppo,
                                                          control::ControllerTag::dqn};

// Disturbance switches that differ between the actual and the nominal plant.
struct PlantSettings {
    cyber::ChannelConfig channel;
    cyber::FdiConfig fdi;
    cyber::ActuationConfig actuation;
    double load_jump_prob = 0.0;
    bool solar_dips = true;
    double ppo_drop = 0.0;
};

inline PlantSettings disturbed_settings(const ScenarioConfig& c, const cyber::FdiConfig& fdi) {
    return {c.channel, fdi, c.actuation, c.devices.load.jump_prob, true, c.channel.p_drop};
}

inline PlantSettings nominal_settings(const ScenarioConfig& c, const cyber::FdiConfig& fdi) {
    PlantSettings s{c.channel, fdi, c.actuation, 0.0, false, 0.0};
    s.channel.p_drop = 0.0;
    s.channel.delay_pmf = {1.0, 0.0, 0.0, 0.0};
    s.channel.sigma_v = 0.0;
    s.channel.sigma_f = 0.0;
    s.fdi.p_fdi = 0.0;
    s.fdi.enabled = false;
    s.actuation.sigma_edge = 0.0;
    return s;
}

struct BusUnit {
    std::size_t index = 0;
    int id = 0;
    double base_p = 0.0;  // kW, scaled network load
    std::optional<devices::LoadProcess> load;
    std::optional<devices::SolarProcess> solar;
    std::optional<devices::WindUnit> wind;
    std::optional<devices::Battery> battery;
    std::optional<devices::EvCharger> ev;
    Rng wind_rng, ev_rng, act_rng, chan_rng;

    // draws of the current step
    devices::LoadSample load_now;
    double solar_now = 0.0;
    double wind_now = 0.0;
    double ev_base = 0.0;
    bool ev_on = false;

    ControlAction applied;  // command in force during the current step
    BusState truth;
};

struct Injection {
    double p_gen = 0.0, p_load = 0.0, q_gen = 0.0, q_load = 0.0;  // kW / kVAr
    double served_p = 0.0, served_q = 0.0, ev = 0.0;
    std::optional<devices::Battery> battery_after;
};

struct Plant {
    grid::NetworkModel net;
    std::vector<dynamics::GeneratorSpec> gens;
    std::vector<std::size_t> owner;
    dynamics::DaeState dae;
    std::vector<BusUnit> units;
    std::vector<cyber::BusChannel> channels;
    PlantSettings settings;
    Rng adp_rng, ppo_rng, dqn_rng;
    double feeder_kw = 0.0;
};

struct Agents {
    std::optional<control::AdpAgent> adp_edge, adp_cloud;
    std::optional<control::PpoAgent> ppo;
    std::optional<control::DqnAgent> dqn;
    Rng replay_rng;
    std::deque<std::vector<control::Transition>> adp_pending;
};

struct BusDecision {
    cyber::Observation obs;
    BusState edge, cloud;
    Eigen::VectorXd x_true, x_edge;
    Eigen::VectorXd u_adp;
    double adp_value = 0.0;
    control::PpoDecision ppo;
    control::DqnDecision dqn;
    std::array<std::optional<BusState>, 3> shadow;
    std::array<double, 3> cost{};
    std::array<bool, 3> violation{};
    ControlAction chosen;
    ControlAction next_applied;
};

struct StepOutcome {
    bool diverged = false;
    int iterations = 0;
    double max_mismatch = 0.0;
    int voltage_violations = 0;
    std::vector<BusDecision> bus;
    std::array<double, 3> cost_sum{};
    double feeder_kw = 0.0;
};

inline std::size_t slot(control::ControllerTag t) { return static_cast<std::size_t>(t); }

inline Injection injection_for(const BusUnit& u, const ControlAction& a, const ScenarioConfig& c) {
    Injection in;
    const double shed = std::max(a[2], 0.0) * c.actions.shed_max;
    in.served_p = u.load_now.p * (1.0 - shed);
    in.served_q = u.load_now.q * (1.0 - shed);
    if (u.ev && u.ev_on) in.ev = devices::ev_grid_demand(*u.ev, u.ev_base, 1.0 + a[3]);
    double p_batt = 0.0;
    if (u.battery) {
        const auto b = devices::battery_step(*u.battery, a[1] * u.battery->p_max, c.dt / 3600.0);
        in.battery_after = b.battery;
        p_batt = b.applied;
    }
    in.p_gen = u.solar_now + u.wind_now + std::max(-p_batt, 0.0);
    in.p_load = in.served_p + in.ev + std::max(p_batt, 0.0);
    in.q_gen = a[0] * c.actions.q_max_kvar;
    in.q_load = in.served_q;
    return in;
}

inline void set_injection(grid::NetworkModel& net, std::size_t i, const Injection& in) {
    const double kw = net.base.s_base_kw();
    auto& b = net.buses[i];
    b.p_gen = in.p_gen / kw;
    b.p_load = in.p_load / kw;
    b.q_gen = in.q_gen / kw;
    b.q_load = in.q_load / kw;
}

struct Solved {
    dynamics::DaeState dae;
    Eigen::VectorXd freq;
    double feeder_kw = 0.0;
};

inline std::optional<Solved> solve(const Plant& p, const grid::NetworkModel& net, const ScenarioConfig& c) {
    Solved s;
    const auto slack = net.slack_index();
    if (c.enable_dynamics) {
        try {
            s.dae = dynamics::dae_step(p.dae, net, p.gens, c.dt);
        } catch (const StepRejected&) {
            return std::nullopt;
        }
        s.freq = dynamics::bus_frequencies(s.dae, p.owner, net.base.f_nominal_hz);
        s.feeder_kw = s.dae.p_e.empty() ? 0.0 : s.dae.p_e.front() * net.base.s_base_kw();
    } else {
        grid::PowerFlowSolution pf;
        try {
            pf = grid::solve_power_flow(net);
        } catch (const SingularJacobianError&) {
            return std::nullopt;
        }
        if (!pf.converged) return std::nullopt;
        const auto inj = grid::power_injection(pf.v_mag, pf.v_ang, grid::build_ybus(net.buses, net.lines));
        const auto& b = net.buses[slack];
        s.feeder_kw = (inj.p[static_cast<Eigen::Index>(slack)] + b.p_load - b.p_gen) * net.base.s_base_kw();
        s.dae = p.dae;
        s.dae.y = pf;
        s.freq = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(net.size()), net.base.f_nominal_hz);
    }
    return s;
}

inline BusState bus_state(const Solved& s, std::size_t i, const Injection& in, const BusUnit& u, long step) {
    const auto k = static_cast<Eigen::Index>(i);
    BusState b;
    b.v = s.dae.y.v_mag[k];
    b.theta = s.dae.y.v_ang[k];
    b.p_load = in.served_p;
    b.q_load = in.served_q;
    b.solar = u.solar_now;
    b.wind = u.wind_now;
    b.soc = in.battery_after ? in.battery_after->soc : (u.battery ? u.battery->soc : 0.0);
    b.ev = in.ev;
    b.freq = s.freq[k];
    b.step = step;
    return b;
}

inline Plant make_plant(const ScenarioConfig& c, const grid::NetworkModel& base_net,
                        const std::vector<dynamics::GeneratorSpec>& gens, const PlantSettings& settings,
                        std::uint64_t seed) {
    Plant p;
    p.net = base_net;
    p.gens = gens;
    p.owner = dynamics::nearest_machine(p.net, p.gens);
    p.settings = settings;
    p.adp_rng = Rng::stream(seed, stream_explore + 0);
    p.ppo_rng = Rng::stream(seed, stream_explore + 1);
    p.dqn_rng = Rng::stream(seed, stream_explore + 2);

    const double kw = p.net.base.s_base_kw();
    const auto& ls = c.devices.load;
    devices::LoadProfile shape_only;
    shape_only.daily_shape = ls.shape;
    shape_only.variability = ls.variability;
    const double m0 = devices::load_multiplier(shape_only, c.start_hour);

    for (std::size_t i = 0; i < p.net.size(); ++i) {
        auto& bus = p.net.buses[i];
        BusUnit u;
        u.index = i;
        u.id = bus.id;
        const auto sid = static_cast<std::uint64_t>(bus.id);
        u.wind_rng = Rng::stream(seed, stream_wind + sid);
        u.ev_rng = Rng::stream(seed, stream_ev + sid);
        u.act_rng = Rng::stream(seed, stream_actuation + sid);
        u.chan_rng = Rng::stream(seed, stream_channel + sid);
        u.base_p = bus.p_load * kw * ls.scale;
        if (u.base_p > 0.0) {
            devices::LoadProfile prof;
            prof.p_base = u.base_p;
            prof.q_base = bus.q_load * kw * ls.scale;
            prof.daily_shape = ls.shape;
            prof.variability = ls.variability;
            prof.noise_sigma = ls.noise_sigma;
            prof.step_jump_prob = settings.load_jump_prob;
            prof.max_jump = ls.max_jump;
            prof.jump_hold_steps = ls.jump_hold_steps;
            u.load.emplace(prof, Rng::stream(seed, stream_load + sid));
        }
        if (c.devices.solar.covers(bus.id)) {
            auto unit = c.devices.solar.params;
            if (!settings.solar_dips) unit.dip_prob = 0.0;
            u.solar.emplace(unit, Rng::stream(seed, stream_solar + sid));
        }
        if (c.devices.wind.covers(bus.id)) {
            devices::validate(c.devices.wind.params);
            u.wind = c.devices.wind.params;
        }
        if (c.devices.battery.covers(bus.id)) {
            devices::validate(c.devices.battery.params);
            u.battery = c.devices.battery.params;
        }
        if (c.devices.ev.covers(bus.id)) {
            devices::validate(c.devices.ev.params);
            u.ev = c.devices.ev.params;
        }
        // Initial operating point: base load at the starting hour, nothing else.
        bus.p_gen = bus.q_gen = 0.0;
        bus.p_load *= ls.scale * m0;
        bus.q_load *= ls.scale * m0;
        p.units.push_back(std::move(u));
    }

    if (c.enable_dynamics) {
        p.dae = dynamics::dae_initialize(p.net, p.gens);
        p.feeder_kw = p.dae.p_e.empty() ? 0.0 : p.dae.p_e.front() * kw;
    } else {
        const auto pf = grid::solve_power_flow(p.net);
        if (!pf.converged) throw DivergenceError("initial power flow did not converge");
        p.dae.y = pf;
    }

    for (auto& u : p.units) {
        const auto k = static_cast<Eigen::Index>(u.index);
        u.truth.v = p.dae.y.v_mag[k];
        u.truth.theta = p.dae.y.v_ang[k];
        u.truth.p_load = p.net.buses[u.index].p_load * kw;
        u.truth.q_load = p.net.buses[u.index].q_load * kw;
        u.truth.soc = u.battery ? u.battery->soc : 0.0;
        u.truth.freq = p.net.base.f_nominal_hz;
        u.truth.step = -1;
        p.channels.emplace_back(u.truth);
    }
    return p;
}

inline Agents make_agents(const ScenarioConfig& c) {
    Agents a;
    const int nf = static_cast<int>(n_features), na = static_cast<int>(n_action);
    if (c.controllers.adp) {
        auto cfg = c.adp;
        cfg.alpha = c.alpha;
        Rng init = Rng::stream(c.seed, stream_init + 0);
        a.adp_cloud.emplace(nf, na, cfg, control::AdpMode::cloud, init);
        Rng init_edge = Rng::stream(c.seed, stream_init + 0);
        a.adp_edge.emplace(nf, na, cfg, control::AdpMode::edge, init_edge);
        a.adp_edge->copy_parameters_from(*a.adp_cloud);
    }
    if (c.controllers.ppo) {
        Rng init = Rng::stream(c.seed, stream_init + 1);
        a.ppo.emplace(nf, na, c.ppo, init);
    }
    if (c.controllers.dqn) {
        Rng init = Rng::stream(c.seed, stream_init + 2);
        a.dqn.emplace(nf, c.dqn, init);
    }
    a.replay_rng = Rng::stream(c.seed, stream_replay);
    return a;
}

inline int ppo_bin(double u) {
    const auto b = static_cast<int>(std::floor((u + 1.0) / 2.0 * 4.0));
    return std::clamp(b, 0, 3);
}

// One step of Algorithm-style sense, solve, observe, decide, act for one plant.
inline StepOutcome step_plant(Plant& p, const Agents& agents, const ScenarioConfig& c, long k, long global_step) {
    const devices::DayClock clock{c.day_length_steps, c.start_hour};
    const double hour = clock.hour(k);
    const std::size_t n = p.units.size();
    StepOutcome out;
    out.bus.resize(n);

    // Devices.
    for (auto& u : p.units) {
        u.load_now = u.load ? u.load->next(hour) : devices::LoadSample{};
        u.solar_now = u.solar ? u.solar->next(hour) : 0.0;
        u.wind_now = u.wind ? devices::wind_power(*u.wind, u.wind_rng) : 0.0;
        if (u.ev) {
            u.ev_base = u.ev_rng.uniform(u.ev->demand_min, u.ev->demand_max);
            u.ev_on = devices::ev_available(*u.ev, hour);
        }
    }

    // Network solve with the commands currently in force.
    std::vector<Injection> inj(n);
    grid::NetworkModel net = p.net;
    for (std::size_t i = 0; i < n; ++i) {
        inj[i] = injection_for(p.units[i], p.units[i].applied, c);
        set_injection(net, i, inj[i]);
    }
    const auto solved = solve(p, net, c);
    if (solved) {
        p.dae = solved->dae;
        p.feeder_kw = solved->feeder_kw;
        out.iterations = solved->dae.y.iterations;
        out.max_mismatch = solved->dae.y.max_mismatch;
        for (std::size_t i = 0; i < n; ++i) {
            auto& u = p.units[i];
            if (inj[i].battery_after) u.battery = inj[i].battery_after;
            u.truth = bus_state(*solved, i, inj[i], u, k);
            const auto& b = net.buses[i];
            if (u.truth.v < b.v_min || u.truth.v > b.v_max) ++out.voltage_violations;
        }
    } else {
        // Keep the last solved electrical state; devices still advance.
        out.diverged = true;
        for (auto& u : p.units) u.truth.step = k;
    }
    out.feeder_kw = p.feeder_kw;

    // Observation and controller inference.
    std::vector<control::Candidate> cands;
    for (std::size_t i = 0; i < n; ++i) {
        auto& u = p.units[i];
        auto& d = out.bus[i];
        p.channels[i].push(u.truth);
        d.obs = p.channels[i].observe(p.settings.channel, p.settings.fdi, k, u.chan_rng);
        std::tie(d.edge, d.cloud) = cyber::edge_cloud_views(p.channels[i].history(), d.obs, c.cloud_latency);
        d.x_true = features(u.truth, c.features);
        d.x_edge = features(d.edge, c.features);
        if (agents.adp_edge) {
            d.u_adp = agents.adp_edge->explore(d.x_edge, p.adp_rng);
            d.adp_value = agents.adp_edge->value(d.x_edge);
        }
        if (agents.ppo) d.ppo = agents.ppo->act(d.x_edge, p.ppo_rng, p.settings.ppo_drop);
        if (agents.dqn) d.dqn = agents.dqn->act(d.x_edge, agents.dqn->epsilon(global_step), p.dqn_rng);
    }

    auto candidate = [&](control::ControllerTag t, const BusDecision& d) {
        switch (t) {
            case control::ControllerTag::adp: return control::to_action(d.u_adp);
            case control::ControllerTag::ppo: return control::to_action(d.ppo.applied);
            case control::ControllerTag::dqn: return d.dqn.action;
        }
        return ControlAction{};
    };

    // Shadow evaluation: each controller's full set of commands on a copy of
    // the network, same device draws, no actuation noise.
    if (!out.diverged) {
        for (auto t : all_tags) {
            if (!c.controllers.has(t)) continue;
            grid::NetworkModel shadow_net = p.net;
            std::vector<Injection> sin(n);
            for (std::size_t i = 0; i < n; ++i) {
                sin[i] = injection_for(p.units[i], candidate(t, out.bus[i]), c);
                set_injection(shadow_net, i, sin[i]);
            }
            const auto s = solve(p, shadow_net, c);
            if (!s) continue;
            for (std::size_t i = 0; i < n; ++i) {
                auto& d = out.bus[i];
                const auto st = bus_state(*s, i, sin[i], p.units[i], k + 1);
                d.shadow[slot(t)] = st;
                d.cost[slot(t)] = control::unified_cost(st, candidate(t, d), c.alpha, c.features.f_nominal);
                const auto& b = shadow_net.buses[i];
                d.violation[slot(t)] = st.v < b.v_min || st.v > b.v_max;
                out.cost_sum[slot(t)] += d.cost[slot(t)];
            }
        }
    }

    // Selection and actuation.
    for (std::size_t i = 0; i < n; ++i) {
        auto& d = out.bus[i];
        auto& u = p.units[i];
        if (!out.diverged) {
            if (c.hybrid) {
                std::vector<control::Candidate> cs;
                std::vector<std::optional<BusState>> next;
                for (auto t : all_tags)
                    if (c.controllers.has(t)) {
                        cs.push_back({t, candidate(t, d)});
                        next.push_back(d.shadow[slot(t)]);
                    }
                d.chosen = control::hybrid_select(cs, std::as_const(next), c.alpha, c.features.f_nominal).action;
            } else {
                for (auto t : all_tags)
                    if (c.controllers.has(t)) {
                        d.chosen = candidate(t, d);
                        break;
                    }
            }
        }
        d.next_applied = cyber::actuate(p.settings.actuation, d.chosen, u.applied, c.dt, u.act_rng);
        u.applied = d.next_applied;
    }
    return out;
}

// Online updates from one actual-plant step.
inline bool learn(Agents& a, const ScenarioConfig& c, const StepOutcome& o, long global_step) {
    if (o.diverged) return false;
    const std::size_t n = o.bus.size();
    if (a.adp_cloud) {
        std::vector<control::Transition> batch;
        for (const auto& d : o.bus) {
            const auto& s = d.shadow[slot(control::ControllerTag::adp)];
            if (!s) continue;
            control::Transition t;
            t.state = d.x_true;
            t.action = d.u_adp;
            t.reward = -d.cost[slot(control::ControllerTag::adp)];
            t.next_state = features(*s, c.features);
            batch.push_back(std::move(t));
        }
        a.adp_pending.push_back(std::move(batch));
        while (a.adp_pending.size() > c.cloud_latency) {
            a.adp_cloud->update(a.adp_pending.front());
            a.adp_pending.pop_front();
        }
    }
    if (a.ppo) {
        std::vector<control::PpoAgent::Sample> samples;
        samples.reserve(n);
        for (const auto& d : o.bus)
            samples.push_back({d.x_edge, d.ppo.sample, d.ppo.log_prob, d.ppo.value,
                               -d.cost[slot(control::ControllerTag::ppo)], false});
        a.ppo->record(std::move(samples));
    }
    if (a.dqn) {
        for (const auto& d : o.bus) {
            const auto& s = d.shadow[slot(control::ControllerTag::dqn)];
            if (!s) continue;
            control::Transition t;
            t.state = d.x_edge;
            t.action_index = d.dqn.index;
            const double pen = d.violation[slot(control::ControllerTag::dqn)] ? c.dqn.violation_penalty : 0.0;
            t.reward = -d.cost[slot(control::ControllerTag::dqn)] - pen;
            t.next_state = features(*s, c.features);
            a.dqn->remember(std::move(t));
        }
        a.dqn->train_step(a.replay_rng);
    }
    bool synced = false;
    if (a.adp_edge && (global_step + 1) % c.cloud_sync_period == 0) {
        a.adp_edge->copy_parameters_from(*a.adp_cloud);
        synced = true;
    }
    return synced;
}

inline cyber::FdiConfig attack_config(const ScenarioConfig& c) {
    auto fdi = c.fdi;
    fdi.enabled = c.enable_attacks && c.fdi.enabled;
    if (!c.attacks.windows.empty()) {
        fdi.windows = c.attacks.windows;
    } else if (fdi.windows.empty()) {
        Rng rng = Rng::stream(c.seed, stream_attacks);
        fdi.windows = cyber::random_attack_windows(c.steps, c.attacks.expected_windows, c.attacks.window_length, rng);
    }
    cyber::validate(fdi);
    return fdi;
}

inline StepRecord make_record(const std::string& ts, const BusUnit& u, const BusDecision& d, const StepOutcome& o,
                              const cyber::BusChannel& ch, const ScenarioConfig& c, double resilience, int flag) {
    StepRecord r;
    r.timestamp = ts;
    r.bus_id = u.id;
    r.voltage = round6(u.truth.v);
    r.angle = round6(u.truth.theta);
    r.load_p = round6(u.truth.p_load);
    r.load_q = round6(u.truth.q_load);
    r.solar = round6(u.truth.solar);
    r.wind = round6(u.truth.wind);
    r.battery_soc_pct = round6(100.0 * u.truth.soc);
    r.ev_load = round6(u.truth.ev);
    r.frequency = round6(u.truth.freq);
    r.feeder_power = round6(o.feeder_kw);
    r.comm_delay_ms = round6(cyber::delay_ms(c.channel, d.obs.delay_applied));
    r.packet_loss_rate = round6(ch.loss_rate());
    r.fdi_attack = d.obs.fdi_active ? 1 : 0;
    r.fdi_severity = round6(d.obs.fdi_severity);
    r.measurement_error = round6(d.obs.measurement_error);
    if (c.controllers.adp) {
        r.adp_value = round6(d.adp_value);
        r.adp_action = round6(d.u_adp.norm());
    }
    if (c.controllers.ppo) {
        r.ppo_action = ppo_bin(d.ppo.applied[1]);
        r.ppo_reward = round6(-d.cost[slot(control::ControllerTag::ppo)]);
    }
    if (c.controllers.dqn) {
        r.dqn_q_value = round6(d.dqn.q_value);
        r.dqn_action = d.dqn.index;
    }
    r.resilience = round6(resilience);
    r.edge_v = round_fixed3(d.edge.v);
    r.edge_a = round_fixed3(d.edge.theta);
    r.cloud_v = round_fixed3(d.cloud.v);
    r.cloud_a = round_fixed3(d.cloud.theta);
    r.edge_control_action = round6(std::sqrt(d.next_applied.squared_norm()));
    r.cloud_update_flag = flag;
    return r;
}

inline double window_resilience(metrics::ResilienceWindow& w, const metrics::DeviationTerms& t) {
    try {
        return w.push(t);
    } catch (const DomainError&) {
        return t.deviation == 0.0 ? 1.0 : 0.0;
    }
}

inline void pretrain(Agents& agents, const ScenarioConfig& c, const grid::NetworkModel& net,
                     const std::vector<dynamics::GeneratorSpec>& gens, const cyber::FdiConfig& fdi) {
    long global = 0;
    for (int ep = 0; ep < c.pretrain_episodes; ++ep) {
        Plant p = make_plant(c, net, gens, nominal_settings(c, fdi), Rng::splitmix(c.seed + stream_pretrain + ep));
        for (long k = 0; k < c.pretrain_steps; ++k, ++global) learn(agents, c, step_plant(p, agents, c, k, global), global);
        spdlog::info("pre-training episode {} done", ep + 1);
    }
    agents.adp_pending.clear();
}

}  // namespace detail

// Runs the actual plant and its disturbance-free companion side by side.
// Both plants read the same agents; only the actual plant trains them.
inline SimulationResult run_scenario(const ScenarioConfig& cfg) {
    validate(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const auto doc = grid::read_json_file(cfg.network_file);
    const auto net = grid::network_from_json(doc);
    const auto gens = dynamics::generators_from_json(doc, net.base.f_nominal_hz);

    const auto fdi = detail::attack_config(cfg);
    auto agents = detail::make_agents(cfg);
    detail::pretrain(agents, cfg, net, gens, fdi);

    auto actual = detail::make_plant(cfg, net, gens, detail::disturbed_settings(cfg, fdi), cfg.seed);
    auto nominal = detail::make_plant(cfg, net, gens, detail::nominal_settings(cfg, fdi), cfg.seed);
    const std::size_t n = actual.units.size();

    SimulationResult res;
    res.steps = cfg.steps;
    res.buses = n;
    res.moving_average_window = cfg.moving_average_window;
    res.attack_windows = fdi.windows;
    res.records.reserve(static_cast<std::size_t>(cfg.steps) * n);
    res.ppo_continuous.reserve(res.records.capacity());
    for (const auto& name : series_names()) res.series[name].reserve(static_cast<std::size_t>(cfg.steps));

    std::vector<metrics::ResilienceWindow> windows(n, metrics::ResilienceWindow(cfg.resilience_window));
    std::size_t bus5 = n;
    for (std::size_t i = 0; i < n; ++i)
        if (actual.units[i].id == 5) bus5 = i;

    const auto max_diverged = static_cast<std::size_t>(std::floor(cfg.max_diverged_fraction * cfg.steps));
    const long offset = cfg.pretrain_episodes * cfg.pretrain_steps;

    for (long k = 0; k < cfg.steps; ++k) {
        const auto a = detail::step_plant(actual, agents, cfg, k, offset + k);
        const auto b = detail::step_plant(nominal, agents, cfg, k, offset + k);
        const int flag = detail::learn(agents, cfg, a, offset + k) ? 1 : 0;

        if (a.diverged) {
            res.diverged_steps.push_back(k);
            spdlog::warn("step {}: network solve failed, holding the last state and applying zero action", k);
            if (res.diverged_steps.size() > max_diverged)
                throw DivergenceError("network solve failed on " + std::to_string(res.diverged_steps.size()) +
                                      " steps, above the allowed " + std::to_string(max_diverged) + " of " +
                                      std::to_string(cfg.steps) + "; last failure at step " + std::to_string(k));
        }
        res.log.push_back({k, a.diverged, a.iterations, a.max_mismatch, a.voltage_violations});

        const auto ts = step_timestamp(k, cfg.day_length_steps, cfg.start_hour);
        double r_sum = 0.0, solar = 0.0, wind = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& u = actual.units[i];
            const auto terms = metrics::deviation_terms(a.bus[i].x_true, b.bus[i].x_true);
            const double r = detail::window_resilience(windows[i], terms);
            r_sum += r;
            solar += u.truth.solar;
            wind += u.truth.wind;
            res.records.push_back(detail::make_record(ts, u, a.bus[i], a, actual.channels[i], cfg, r, flag));
            res.ppo_continuous.push_back(cfg.controllers.ppo ? a.bus[i].ppo.applied[1] : 0.0);
        }

        auto& s = res.series;
        s["feeder_power"].push_back(a.feeder_kw);
        s["solar"].push_back(solar);
        s["wind"].push_back(wind);
        s["resilience"].push_back(r_sum / static_cast<double>(n));
        if (bus5 < n) {
            const auto& u = actual.units[bus5];
            s["bus5_voltage"].push_back(u.truth.v);
            s["load_pu"].push_back(u.base_p > 0.0 ? u.truth.p_load / u.base_p : 0.0);
            s["pv_pu"].push_back(u.solar ? u.truth.solar / u.solar->unit().rated : 0.0);
            s["wind_pu"].push_back(u.wind ? u.truth.wind / u.wind->rated : 0.0);
        } else {
            for (const char* name : {"bus5_voltage", "load_pu", "pv_pu", "wind_pu"}) s[name].push_back(0.0);
        }
        const auto& cs = a.cost_sum;
        s["cost_adp"].push_back(cs[0]);
        s["cost_ppo"].push_back(cs[1]);
        s["cost_dqn"].push_back(cs[2]);
        s["cost_total"].push_back(cs[0] + cs[1] + cs[2]);

        if ((k + 1) % 1000 == 0) spdlog::info("step {}/{}", k + 1, cfg.steps);
    }
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

inline const std::vector<double>& get_series(const SimulationResult& r, const std::string& name) {
    const auto it = r.series.find(name);
    if (it == r.series.end()) {
        std::string list;
        for (const auto& s : series_names()) list += (list.empty() ? "" : ", ") + s;
        throw ConfigError("unknown series '" + name + "'; available: " + list);
    }
    return it->second;
}

inline void write_series_csv(const std::vector<double>& x, std::size_t window, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write series file: " + path);
    const auto ma = metrics::moving_average(x, window);
    out << "step,value,moving_average\n";
    for (std::size_t k = 0; k < x.size(); ++k) out << k << ',' << format_g6(x[k]) << ',' << format_g6(ma[k]) << '\n';
    if (!out) throw IoError("failed while writing series file: " + path);
}

// (step, value, moving average) for one named series.
inline void export_series(const SimulationResult& r, const std::string& name, const std::string& path) {
    write_series_csv(get_series(r, name), r.moving_average_window, path);
}

// All series side by side, one row per step.
inline void write_series_table(const SimulationResult& r, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write series file: " + path);
    out << "step";
    for (const auto& n : series_names()) out << ',' << n;
    out << '\n';
    for (long k = 0; k < r.steps; ++k) {
        out << k;
        for (const auto& n : series_names()) out << ',' << format_g6(r.series.at(n)[static_cast<std::size_t>(k)]);
        out << '\n';
    }
    if (!out) throw IoError("failed while writing series file: " + path);
}

inline std::map<std::string, std::vector<double>> read_series_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open series file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("series file is empty: " + path);
    const auto head = detail::split_commas(line);
    std::vector<std::string> names;
    for (std::size_t i = 1; i < head.size(); ++i) names.emplace_back(head[i]);
    std::map<std::string, std::vector<double>> out;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        const auto f = detail::split_commas(line);
        if (f.size() != head.size()) throw ConfigError("series file line " + std::to_string(n) + ": wrong field count");
        for (std::size_t i = 1; i < f.size(); ++i) out[names[i - 1]].push_back(detail::parse_double(f[i], n));
    }
    return out;
}

}  // namespace gridsim::sim
