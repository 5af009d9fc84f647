#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "gridsim/core/errors.hpp"

namespace gridsim::grid {

enum class BusKind { slack, pq };

// All electrical quantities are per-unit on the network base.
// Bus ids are 1-based and contiguous; the bus at index i has id i + 1.
struct Bus {
    int id = 0;
    BusKind kind = BusKind::pq;
    double p_load = 0.0;
    double q_load = 0.0;
    double p_gen = 0.0;
    double q_gen = 0.0;
    double v_min = 0.95;
    double v_max = 1.05;
};

// from_bus / to_bus are 0-based bus indices.
struct Line {
    std::size_t from_bus = 0;
    std::size_t to_bus = 0;
    double resistance = 0.0;
    double reactance = 0.0;
    double length_km = 0.0;
};

struct BaseQuantities {
    double s_base_mva = 10.0;
    double v_base_kv = 12.66;
    double f_nominal_hz = 50.0;

    double s_base_kw() const { return s_base_mva * 1000.0; }
    double z_base_ohm() const { return v_base_kv * v_base_kv / s_base_mva; }
};

struct NetworkModel {
    std::vector<Bus> buses;
    std::vector<Line> lines;
    BaseQuantities base;
    double slack_voltage = 1.0;

    std::size_t size() const { return buses.size(); }

    std::size_t slack_index() const {
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].kind == BusKind::slack) return i;
        throw InvalidNetworkError("network has no slack bus");
    }
};

namespace detail {

inline std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
    while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    return i;
}

}  // namespace detail

// True when every bus is reachable from bus 0 through the given lines.
inline bool is_connected(std::size_t n_buses, const std::vector<Line>& lines) {
    if (n_buses == 0) return false;
    std::vector<std::size_t> parent(n_buses);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::size_t components = n_buses;
    for (const auto& l : lines) {
        if (l.from_bus >= n_buses || l.to_bus >= n_buses) continue;
        auto a = detail::find_root(parent, l.from_bus);
        auto b = detail::find_root(parent, l.to_bus);
        if (a != b) {
            parent[a] = b;
            --components;
        }
    }
    return components == 1;
}

inline void validate_line(const Line& l, std::size_t n_buses) {
    if (l.from_bus >= n_buses || l.to_bus >= n_buses)
        throw InvalidNetworkError("line references a bus outside the network");
    if (l.from_bus == l.to_bus) throw InvalidNetworkError("line connects a bus to itself");
    if (l.resistance == 0.0 && l.reactance == 0.0)
        throw SingularBranchError("line " + std::to_string(l.from_bus + 1) + "-" +
                                  std::to_string(l.to_bus + 1) + " has zero impedance");
    if (l.resistance < 0.0) throw InvalidNetworkError("line resistance must be non-negative");
    if (!(l.reactance > 0.0)) throw InvalidNetworkError("line reactance must be positive");
}

// Checks the full set of model invariants: one slack, ordered voltage
// limits, valid lines, and a connected radial tree.
inline void validate(const NetworkModel& net) {
    if (net.buses.empty()) throw InvalidNetworkError("network has no buses");
    std::size_t slack_count = 0;
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        const auto& b = net.buses[i];
        if (b.id != static_cast<int>(i) + 1)
            throw InvalidNetworkError("bus ids must be 1..N in order");
        if (b.kind == BusKind::slack) ++slack_count;
        if (!(b.v_min < b.v_max)) throw InvalidNetworkError("bus voltage limits out of order");
    }
    if (slack_count != 1) throw InvalidNetworkError("network needs exactly one slack bus");
    for (const auto& l : net.lines) validate_line(l, net.size());
    if (!is_connected(net.size(), net.lines)) throw TopologyError("network is disconnected");
    if (net.lines.size() != net.size() - 1) throw TopologyError("network is not radial");
}

}  // namespace gridsim::grid
