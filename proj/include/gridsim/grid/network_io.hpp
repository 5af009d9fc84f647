#pragma once

#include <algorithm>
#include <fstream>
#include <string>

#include <json.hpp>

#include "gridsim/core/errors.hpp"
#include "gridsim/grid/network.hpp"

// Network definition file (JSON).
//
//   {
//     "base": {"s_base_mva": 10, "v_base_kv": 12.66, "f_nominal_hz": 50},
//     "slack_voltage": 1.0,
//     "transformer": {"r_pu": 0.01, "x_pu": 0.04},      optional
//     "buses": [{"id": 1, "kind": "slack" | "pq",
//                "p_kw", "q_kvar"  or  "p_pu", "q_pu",  (load)
//                "p_gen_kw", "q_gen_kvar"  or  "p_gen_pu", "q_gen_pu",
//                "v_min", "v_max"}, ...],
//     "lines": [{"from": 1, "to": 2,
//                "r_ohm", "x_ohm"  or  "r_pu", "x_pu",
//                "length_km"}, ...],
//     "generators": [...]                                 read by dynamics
//   }
//
// Bus ids in the file are 1-based. When a transformer block is present its
// impedance is added in series to the first line leaving the slack bus.

namespace gridsim::grid {

namespace detail {

inline double pick(const nlohmann::json& j, const char* kw_key, const char* pu_key, double to_pu,
                   double fallback = 0.0) {
    if (j.contains(pu_key)) return j.at(pu_key).get<double>();
    if (j.contains(kw_key)) return j.at(kw_key).get<double>() * to_pu;
    return fallback;
}

}  // namespace detail

inline NetworkModel network_from_json(const nlohmann::json& doc) {
    NetworkModel net;
    try {
        if (doc.contains("base")) {
            const auto& b = doc.at("base");
            net.base.s_base_mva = b.value("s_base_mva", net.base.s_base_mva);
            net.base.v_base_kv = b.value("v_base_kv", net.base.v_base_kv);
            net.base.f_nominal_hz = b.value("f_nominal_hz", net.base.f_nominal_hz);
        }
        net.slack_voltage = doc.value("slack_voltage", 1.0);
        const double per_kw = 1.0 / net.base.s_base_kw();
        const double per_ohm = 1.0 / net.base.z_base_ohm();

        for (const auto& jb : doc.at("buses")) {
            Bus b;
            b.id = jb.at("id").get<int>();
            const auto kind = jb.value("kind", std::string("pq"));
            if (kind == "slack")
                b.kind = BusKind::slack;
            else if (kind == "pq")
                b.kind = BusKind::pq;
            else
                throw InvalidNetworkError("unknown bus kind '" + kind + "'");
            b.p_load = detail::pick(jb, "p_kw", "p_pu", per_kw);
            b.q_load = detail::pick(jb, "q_kvar", "q_pu", per_kw);
            b.p_gen = detail::pick(jb, "p_gen_kw", "p_gen_pu", per_kw);
            b.q_gen = detail::pick(jb, "q_gen_kvar", "q_gen_pu", per_kw);
            b.v_min = jb.value("v_min", 0.95);
            b.v_max = jb.value("v_max", 1.05);
            net.buses.push_back(b);
        }
        std::sort(net.buses.begin(), net.buses.end(),
                  [](const Bus& a, const Bus& b) { return a.id < b.id; });

        for (const auto& jl : doc.at("lines")) {
            const int from = jl.at("from").get<int>();
            const int to = jl.at("to").get<int>();
            if (from < 1 || to < 1) throw InvalidNetworkError("line bus ids are 1-based");
            Line l;
            l.from_bus = static_cast<std::size_t>(from - 1);
            l.to_bus = static_cast<std::size_t>(to - 1);
            l.resistance = detail::pick(jl, "r_ohm", "r_pu", per_ohm);
            l.reactance = detail::pick(jl, "x_ohm", "x_pu", per_ohm);
            l.length_km = jl.value("length_km", 0.0);
            net.lines.push_back(l);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("network file: ") + e.what());
    }

    validate(net);

    if (doc.contains("transformer")) {
        const auto& t = doc.at("transformer");
        const double rt = t.value("r_pu", 0.0);
        const double xt = t.value("x_pu", 0.0);
        const auto slack = net.slack_index();
        auto it = std::find_if(net.lines.begin(), net.lines.end(), [&](const Line& l) {
            return l.from_bus == slack || l.to_bus == slack;
        });
        if (it == net.lines.end()) throw TopologyError("slack bus has no outgoing line");
        it->resistance += rt;
        it->reactance += xt;
    }
    return net;
}

inline nlohmann::json network_to_json(const NetworkModel& net) {
    nlohmann::json doc;
    doc["base"] = {{"s_base_mva", net.base.s_base_mva},
                   {"v_base_kv", net.base.v_base_kv},
                   {"f_nominal_hz", net.base.f_nominal_hz}};
    doc["slack_voltage"] = net.slack_voltage;
    auto& buses = doc["buses"] = nlohmann::json::array();
    for (const auto& b : net.buses) {
        buses.push_back({{"id", b.id},
                         {"kind", b.kind == BusKind::slack ? "slack" : "pq"},
                         {"p_pu", b.p_load},
                         {"q_pu", b.q_load},
                         {"p_gen_pu", b.p_gen},
                         {"q_gen_pu", b.q_gen},
                         {"v_min", b.v_min},
                         {"v_max", b.v_max}});
    }
    auto& lines = doc["lines"] = nlohmann::json::array();
    for (const auto& l : net.lines) {
        lines.push_back({{"from", l.from_bus + 1},
                         {"to", l.to_bus + 1},
                         {"r_pu", l.resistance},
                         {"x_pu", l.reactance},
                         {"length_km", l.length_km}});
    }
    return doc;
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline NetworkModel load_network(const std::string& path) {
    return network_from_json(read_json_file(path));
}

inline void save_network(const NetworkModel& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << network_to_json(net).dump(2) << '\n';
}

}  // namespace gridsim::grid
