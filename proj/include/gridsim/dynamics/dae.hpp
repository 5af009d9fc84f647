#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <queue>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "gridsim/core/errors.hpp"
#include "gridsim/dynamics/generator.hpp"
#include "gridsim/grid/network.hpp"
#include "gridsim/grid/power_flow.hpp"
#include "gridsim/grid/ybus.hpp"

namespace gridsim::dynamics {

// x: machine states. y: network voltages over the real buses. p_e holds the
// electrical power of each machine consistent with y.
struct DaeState {
    std::vector<GeneratorState> x;
    grid::PowerFlowSolution y;
    std::vector<double> p_e;
};

struct DaeOptions {
    grid::PowerFlowOptions power_flow;
    // RK4 substep length used while the algebraic variables are frozen.
    double max_substep = 0.05;
};

inline constexpr std::size_t no_machine = static_cast<std::size_t>(-1);

namespace detail {

inline std::size_t reference_machine(const grid::NetworkModel& net,
                                     const std::vector<GeneratorSpec>& gens) {
    std::size_t ref = no_machine;
    for (std::size_t i = 0; i < gens.size(); ++i) {
        if (gens[i].internal_reactance) {
            if (!(*gens[i].internal_reactance > 0.0))
                throw ConfigError("internal reactance must be positive");
            continue;
        }
        if (gens[i].bus != net.slack_index())
            throw ConfigError("a machine without internal reactance must sit at the slack bus");
        if (ref != no_machine) throw ConfigError("only one reference machine is allowed");
        ref = i;
    }
    return ref;
}

inline double internal_power(const GeneratorState& s, const GeneratorSpec& g, double delta_ref,
                             double v_t, double theta_t) {
    return s.e_fd * v_t * std::sin(s.delta - delta_ref - theta_t) / *g.internal_reactance;
}

}  // namespace detail

// Solves the network with every internal EMF node pinned at (e_fd, delta
// relative to the reference machine). Throws StepRejected on failure.
inline DaeState solve_algebraic(const grid::NetworkModel& net, const std::vector<GeneratorSpec>& gens,
                                const std::vector<GeneratorState>& x,
                                const grid::PowerFlowOptions& opts = {}) {
    if (x.size() != gens.size()) throw DimensionError("one state per generator required");
    const auto ref = detail::reference_machine(net, gens);
    const double delta_ref = ref == no_machine ? 0.0 : x[ref].delta;
    const std::size_t nb = net.size();
    const auto slack = net.slack_index();

    std::vector<grid::Line> lines = net.lines;
    std::vector<std::size_t> node(gens.size(), no_machine);
    std::size_t n = nb;
    for (std::size_t i = 0; i < gens.size(); ++i) {
        if (!gens[i].internal_reactance) continue;
        if (gens[i].bus >= nb) throw ConfigError("generator bus outside the network");
        node[i] = n;
        lines.push_back(grid::Line{gens[i].bus, n, 0.0, *gens[i].internal_reactance, 0.0});
        ++n;
    }
    const auto y = grid::build_ybus(n, lines);
    const auto en = static_cast<Eigen::Index>(n);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(en), q = Eigen::VectorXd::Zero(en);
    Eigen::VectorXd vf = Eigen::VectorXd::Ones(en), af = Eigen::VectorXd::Zero(en);
    std::vector<bool> fixed(n, false);
    for (std::size_t i = 0; i < nb; ++i) {
        const auto& b = net.buses[i];
        p[static_cast<Eigen::Index>(i)] = b.p_gen - b.p_load;
        q[static_cast<Eigen::Index>(i)] = b.q_gen - b.q_load;
    }
    fixed[slack] = true;
    vf[static_cast<Eigen::Index>(slack)] = net.slack_voltage;
    for (std::size_t i = 0; i < gens.size(); ++i) {
        if (node[i] == no_machine) continue;
        fixed[node[i]] = true;
        vf[static_cast<Eigen::Index>(node[i])] = x[i].e_fd;
        af[static_cast<Eigen::Index>(node[i])] = x[i].delta - delta_ref;
    }

    grid::PowerFlowSolution sol;
    try {
        sol = grid::solve_newton(y, p, q, fixed, vf, af, opts);
    } catch (const SingularJacobianError& e) {
        throw StepRejected(e.what());
    }
    if (!sol.converged) throw StepRejected("network solve did not converge");

    DaeState out;
    out.x = x;
    out.y.v_mag = sol.v_mag.head(static_cast<Eigen::Index>(nb));
    out.y.v_ang = sol.v_ang.head(static_cast<Eigen::Index>(nb));
    out.y.iterations = sol.iterations;
    out.y.max_mismatch = sol.max_mismatch;
    out.y.converged = true;
    out.p_e.assign(gens.size(), 0.0);
    const auto s = grid::power_injection(sol.v_mag, sol.v_ang, y);
    for (std::size_t i = 0; i < gens.size(); ++i) {
        if (node[i] == no_machine) {
            const auto& b = net.buses[slack];
            out.p_e[i] = s.p[static_cast<Eigen::Index>(slack)] + b.p_load - b.p_gen;
        } else {
            const auto k = static_cast<Eigen::Index>(gens[i].bus);
            out.p_e[i] = detail::internal_power(x[i], gens[i], delta_ref, out.y.v_mag[k],
                                                out.y.v_ang[k]);
        }
    }
    return out;
}

// Builds an equilibrium operating point. The reference machine picks up the
// slack power; every other machine delivers its p_ref at unity power factor.
// Writes p_ref and v_ref of every machine so that all derivatives vanish.
inline DaeState dae_initialize(const grid::NetworkModel& net, std::vector<GeneratorSpec>& gens,
                               const grid::PowerFlowOptions& opts = {}) {
    const auto ref = detail::reference_machine(net, gens);
    for (const auto& g : gens) validate(g.params);

    grid::NetworkModel loaded = net;
    for (const auto& g : gens)
        if (g.internal_reactance) loaded.buses[g.bus].p_gen += g.params.p_ref;
    const auto pf = grid::solve_power_flow(loaded, opts);
    if (!pf.converged) throw StepRejected("initial power flow did not converge");

    std::vector<GeneratorState> x(gens.size());
    for (std::size_t i = 0; i < gens.size(); ++i) {
        auto& s = x[i];
        s.omega = gens[i].params.omega_nominal;
        if (!gens[i].internal_reactance) continue;
        const auto k = static_cast<Eigen::Index>(gens[i].bus);
        const std::complex<double> v = std::polar(pf.v_mag[k], pf.v_ang[k]);
        const std::complex<double> current = std::conj(std::complex<double>(gens[i].params.p_ref, 0.0) / v);
        const std::complex<double> e = v + std::complex<double>(0.0, *gens[i].internal_reactance) * current;
        s.e_fd = std::abs(e);
        s.delta = std::arg(e);
    }

    auto st = solve_algebraic(net, gens, x, opts);
    for (std::size_t i = 0; i < gens.size(); ++i) {
        auto& p = gens[i].params;
        auto& s = st.x[i];
        const double v_t = st.y.v_mag[static_cast<Eigen::Index>(gens[i].bus)];
        p.v_ref = v_t + s.e_fd / p.avr_gain;
        if (i == ref) s.e_fd = p.avr_gain * (p.v_ref - v_t);
        p.p_ref = st.p_e[i];
        s.p_m = st.p_e[i];
    }
    return st;
}

// One partitioned step: RK4 on the machine states with the algebraic
// variables frozen, then a network re-solve at the new states.
inline DaeState dae_step(const DaeState& state, const grid::NetworkModel& net,
                         const std::vector<GeneratorSpec>& gens, double dt,
                         const DaeOptions& opts = {}) {
    if (!(dt > 0.0)) throw DomainError("dae_step: dt must be positive");
    if (state.x.size() != gens.size() || state.p_e.size() != gens.size())
        throw DimensionError("dae_step: state does not match the generator list");
    const auto ref = detail::reference_machine(net, gens);
    const std::size_t m = gens.size();

    std::vector<double> v_t(m), th_t(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto k = static_cast<Eigen::Index>(gens[i].bus);
        v_t[i] = state.y.v_mag[k];
        th_t[i] = state.y.v_ang[k];
    }

    using Stack = std::vector<std::array<double, 4>>;
    auto deriv = [&](const std::vector<GeneratorState>& x) {
        Stack d(m);
        const double delta_ref = ref == no_machine ? 0.0 : x[ref].delta;
        for (std::size_t i = 0; i < m; ++i) {
            const double p_e = gens[i].internal_reactance
                                   ? detail::internal_power(x[i], gens[i], delta_ref, v_t[i], th_t[i])
                                   : state.p_e[i];
            d[i] = generator_derivatives(x[i], gens[i].params, p_e, v_t[i]);
        }
        return d;
    };
    auto shift = [&](const std::vector<GeneratorState>& x, const Stack& d, double h) {
        auto out = x;
        for (std::size_t i = 0; i < m; ++i) {
            out[i].delta += h * d[i][0];
            out[i].omega += h * d[i][1];
            out[i].e_fd += h * d[i][2];
            out[i].p_m += h * d[i][3];
        }
        return out;
    };

    int n_sub = 1;
    if (std::isfinite(opts.max_substep) && opts.max_substep > 0.0)
        n_sub = std::max(1, static_cast<int>(std::ceil(dt / opts.max_substep - 1e-12)));
    const double h = dt / n_sub;

    auto x = state.x;
    for (int sub = 0; sub < n_sub; ++sub) {
        const auto k1 = deriv(x);
        const auto k2 = deriv(shift(x, k1, h / 2));
        const auto k3 = deriv(shift(x, k2, h / 2));
        const auto k4 = deriv(shift(x, k3, h));
        for (std::size_t i = 0; i < m; ++i) {
            x[i].delta += h / 6.0 * (k1[i][0] + 2.0 * k2[i][0] + 2.0 * k3[i][0] + k4[i][0]);
            x[i].omega += h / 6.0 * (k1[i][1] + 2.0 * k2[i][1] + 2.0 * k3[i][1] + k4[i][1]);
            x[i].e_fd += h / 6.0 * (k1[i][2] + 2.0 * k2[i][2] + 2.0 * k3[i][2] + k4[i][2]);
            x[i].p_m += h / 6.0 * (k1[i][3] + 2.0 * k2[i][3] + 2.0 * k3[i][3] + k4[i][3]);
            x[i].p_m = std::clamp(x[i].p_m, gens[i].params.p_m_min, gens[i].params.p_m_max);
        }
    }
    for (const auto& s : x)
        if (!std::isfinite(s.delta) || !std::isfinite(s.omega) || !std::isfinite(s.e_fd) ||
            !std::isfinite(s.p_m))
            throw StepRejected("machine state is no longer finite");
    return solve_algebraic(net, gens, x, opts.power_flow);
}

// For every bus, the machine with the smallest series-impedance distance.
// Ties go to the lower machine index; no_machine when the list is empty.
inline std::vector<std::size_t> nearest_machine(const grid::NetworkModel& net,
                                                const std::vector<GeneratorSpec>& gens) {
    const std::size_t n = net.size();
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
    for (const auto& l : net.lines) {
        const double z = std::hypot(l.resistance, l.reactance);
        adj[l.from_bus].push_back({l.to_bus, z});
        adj[l.to_bus].push_back({l.from_bus, z});
    }
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> owner(n, no_machine);
    using Item = std::tuple<double, std::size_t, std::size_t>;  // dist, machine, bus
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for (std::size_t i = 0; i < gens.size(); ++i)
        pq.push({gens[i].internal_reactance.value_or(0.0), i, gens[i].bus});
    while (!pq.empty()) {
        auto [d, g, b] = pq.top();
        pq.pop();
        if (owner[b] != no_machine) continue;
        owner[b] = g;
        dist[b] = d;
        for (auto [nb, z] : adj[b])
            if (owner[nb] == no_machine) pq.push({d + z, g, nb});
    }
    return owner;
}

inline Eigen::VectorXd bus_frequencies(const DaeState& st, const std::vector<std::size_t>& owner,
                                       double f_nominal) {
    Eigen::VectorXd f(static_cast<Eigen::Index>(owner.size()));
    for (std::size_t i = 0; i < owner.size(); ++i)
        f[static_cast<Eigen::Index>(i)] =
            owner[i] == no_machine ? f_nominal : frequency_hz(st.x[owner[i]]);
    return f;
}

}  // namespace gridsim::dynamics
