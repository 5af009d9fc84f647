#pragma once

#include <algorithm>

#include "gridsim/core/bus_state.hpp"
#include "gridsim/core/errors.hpp"
#include "gridsim/core/random.hpp"

namespace gridsim::cyber {

struct ActuationConfig {
    double sigma_edge = 0.01;
    double tau_inv = 0.040;  // s
};

inline void validate(const ActuationConfig& a) {
    if (!(a.tau_inv > 0.0)) throw ConfigError("inverter time constant must be positive");
    if (!(a.sigma_edge >= 0.0)) throw ConfigError("edge noise sigma must be non-negative");
}

// Edge noise followed by a discretized first-order inverter lag. The lag
// coefficient dt / tau is capped at 1 to keep the discrete filter stable.
// Draws one normal per component.
inline ControlAction actuate(const ActuationConfig& cfg, const ControlAction& commanded,
                             const ControlAction& prev_applied, double dt, Rng& rng) {
    if (!(dt > 0.0)) throw DomainError("actuate: dt must be positive");
    const double c = std::min(dt / cfg.tau_inv, 1.0);
    ControlAction out;
    for (std::size_t i = 0; i < n_action; ++i) {
        const double noisy = commanded[i] + rng.normal(0.0, cfg.sigma_edge);
        out[i] = prev_applied[i] + c * (noisy - prev_applied[i]);
    }
    return out.clamped();
}

}  // namespace gridsim::cyber
