#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <json.hpp>

#include "gridsim/core/errors.hpp"

namespace gridsim::dynamics {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct GeneratorParams {
    double omega_nominal = two_pi * 50.0;  // rad/s
    double inertia = 2.0 * 5.0 / (two_pi * 50.0);  // M = 2H/w0, s^2 p.u.
    double damping = 1.0;
    double avr_gain = 50.0;
    double avr_time = 0.1;  // s
    double gov_time = 5.0;  // s
    double droop = 0.05;    // p.u. speed per p.u. power
    double v_ref = 1.0;
    double p_ref = 0.0;
    double p_m_min = -std::numeric_limits<double>::infinity();
    double p_m_max = std::numeric_limits<double>::infinity();
};

struct GeneratorState {
    double delta = 0.0;  // rad
    double omega = two_pi * 50.0;  // rad/s
    double e_fd = 1.0;
    double p_m = 0.0;

    bool operator==(const GeneratorState&) const = default;
};

// A machine either is the reference machine at the slack bus (no internal
// reactance; its electrical power is the slack injection) or drives an
// internal EMF node behind `internal_reactance` connected to `bus`.
struct GeneratorSpec {
    std::size_t bus = 0;  // 0-based
    GeneratorParams params;
    std::optional<double> internal_reactance;
};

inline void validate(const GeneratorParams& p) {
    if (!(p.inertia > 0.0)) throw ConfigError("generator inertia must be positive");
    if (!(p.avr_time > 0.0)) throw ConfigError("AVR time constant must be positive");
    if (!(p.gov_time > 0.0)) throw ConfigError("governor time constant must be positive");
    if (!(p.droop > 0.0)) throw ConfigError("governor droop must be positive");
    if (!(p.avr_gain > 0.0)) throw ConfigError("AVR gain must be positive");
    if (!(p.omega_nominal > 0.0)) throw ConfigError("nominal speed must be positive");
    if (!(p.p_m_min <= p.p_m_max)) throw ConfigError("mechanical power limits out of order");
}

// (d delta, d omega, d e_fd, d p_m). Damping and droop act on the per-unit
// speed deviation (omega - w0) / w0.
inline std::array<double, 4> generator_derivatives(const GeneratorState& s, const GeneratorParams& p,
                                                   double p_e, double v_term) {
    const double dw = s.omega - p.omega_nominal;
    const double dw_pu = dw / p.omega_nominal;
    return {dw, (s.p_m - p_e - p.damping * dw_pu) / p.inertia,
            (-s.e_fd + p.avr_gain * (p.v_ref - v_term)) / p.avr_time,
            (-s.p_m + p.p_ref - dw_pu / p.droop) / p.gov_time};
}

inline double frequency_hz(const GeneratorState& s) { return s.omega / two_pi; }

// Reads the "generators" block of a network file. Inertia is given as the
// constant H in seconds and converted to M = 2H/w0.
inline std::vector<GeneratorSpec> generators_from_json(const nlohmann::json& doc, double f_nominal) {
    std::vector<GeneratorSpec> out;
    if (!doc.contains("generators")) return out;
    try {
        for (const auto& j : doc.at("generators")) {
            GeneratorSpec g;
            const int bus = j.at("bus").get<int>();
            if (bus < 1) throw ConfigError("generator bus ids are 1-based");
            g.bus = static_cast<std::size_t>(bus - 1);
            auto& p = g.params;
            p.omega_nominal = two_pi * f_nominal;
            p.inertia = 2.0 * j.value("h_s", 5.0) / p.omega_nominal;
            p.damping = j.value("damping", p.damping);
            p.avr_gain = j.value("avr_gain", p.avr_gain);
            p.avr_time = j.value("avr_time_s", p.avr_time);
            p.gov_time = j.value("gov_time_s", p.gov_time);
            p.droop = j.value("droop", p.droop);
            p.v_ref = j.value("v_ref", p.v_ref);
            p.p_ref = j.value("p_ref_pu", p.p_ref);
            if (j.contains("p_m_min_pu")) p.p_m_min = j.at("p_m_min_pu").get<double>();
            if (j.contains("p_m_max_pu")) p.p_m_max = j.at("p_m_max_pu").get<double>();
            if (j.contains("x_internal_pu")) g.internal_reactance = j.at("x_internal_pu").get<double>();
            validate(p);
            out.push_back(g);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("generator block: ") + e.what());
    }
    return out;
}

}  // namespace gridsim::dynamics
