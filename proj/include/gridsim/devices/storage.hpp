#pragma once

#include <algorithm>
#include <cmath>

#include "gridsim/core/errors.hpp"
#include "gridsim/core/random.hpp"

namespace gridsim::devices {

// Positive power charges the battery.
struct Battery {
    double e_max = 300.0;   // kWh
    double p_max = 150.0;   // kW
    double soc = 0.5;
    double soc_min = 0.20;
    double soc_max = 0.90;
    double eta_charge = 0.95;
    double eta_discharge = 0.95;
};

inline void validate(const Battery& b) {
    if (!(b.e_max > 0.0 && b.p_max > 0.0)) throw ConfigError("battery capacity and power must be positive");
    if (!(0.0 <= b.soc_min && b.soc_min < b.soc_max && b.soc_max <= 1.0))
        throw ConfigError("battery SOC limits must be ordered within [0, 1]");
    if (!(b.soc >= b.soc_min && b.soc <= b.soc_max)) throw ConfigError("battery SOC outside its limits");
    if (!(b.eta_charge > 0.0 && b.eta_charge <= 1.0 && b.eta_discharge > 0.0 && b.eta_discharge <= 1.0))
        throw ConfigError("battery efficiencies must lie in (0, 1]");
}

struct BatteryStep {
    Battery battery;
    double applied = 0.0;  // kW, grid side
};

// dt in hours. The command is clamped to p_max and then to the power that
// exactly reaches the SOC bound.
inline BatteryStep battery_step(const Battery& b, double command, double dt_h) {
    if (!(dt_h > 0.0)) throw DomainError("battery_step: dt must be positive");
    BatteryStep out{b, 0.0};
    double p = std::clamp(command, -b.p_max, b.p_max);
    if (p > 0.0) {
        const double room = std::max(0.0, b.soc_max - b.soc) * b.e_max / (b.eta_charge * dt_h);
        p = std::min(p, room);
        out.battery.soc = b.soc + b.eta_charge * p * dt_h / b.e_max;
    } else if (p < 0.0) {
        const double room = std::max(0.0, b.soc - b.soc_min) * b.e_max * b.eta_discharge / dt_h;
        p = std::max(p, -room);
        out.battery.soc = b.soc + p * dt_h / (b.eta_discharge * b.e_max);
    }
    out.battery.soc = std::clamp(out.battery.soc, b.soc_min, b.soc_max);
    out.applied = p;
    return out;
}

struct EvCharger {
    double demand_min = 40.0;   // kW, vehicle side
    double demand_max = 110.0;
    double efficiency = 0.92;
    double avail_start = 7.0;   // h
    double avail_end = 23.0;    // h
};

inline void validate(const EvCharger& e) {
    if (!(0.0 <= e.demand_min && e.demand_min <= e.demand_max)) throw ConfigError("EV demand range out of order");
    if (!(e.efficiency > 0.0 && e.efficiency <= 1.0)) throw ConfigError("EV efficiency must lie in (0, 1]");
}

inline bool ev_available(const EvCharger& e, double hour) {
    if (e.avail_start <= e.avail_end) return hour >= e.avail_start && hour < e.avail_end;
    return hour >= e.avail_start || hour < e.avail_end;
}

// Grid-side draw in kW for a given vehicle-side base demand.
inline double ev_grid_demand(const EvCharger& e, double base, double modulation) {
    return std::clamp(base, 0.0, e.demand_max) * std::clamp(modulation, 0.0, 1.0) / e.efficiency;
}

// Draws the base demand (one uniform, always consumed) and gates it by the
// availability window.
inline double ev_demand(const EvCharger& e, double hour, double modulation, Rng& rng) {
    const double base = rng.uniform(e.demand_min, e.demand_max);
    if (!ev_available(e, hour)) return 0.0;
    return ev_grid_demand(e, base, modulation);
}

}  // namespace gridsim::devices
