#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "gridsim/core/errors.hpp"
#include "gridsim/core/random.hpp"

namespace gridsim::devices {

// Maps simulation steps onto a 24 h profile clock. A whole day is squeezed
// into day_length_steps steps, starting at start_hour.
struct DayClock {
    int day_length_steps = 6000;
    double start_hour = 0.0;

    double hour(long step) const {
        const double h = start_hour + 24.0 * static_cast<double>(step) / day_length_steps;
        return std::fmod(h, 24.0);
    }
};

using DailyShape = std::array<double, 24>;

inline constexpr DailyShape flat_shape() {
    DailyShape s{};
    for (auto& v : s) v = 1.0;
    return s;
}

// Mixed residential / commercial feeder shape, evening peak.
inline constexpr DailyShape default_load_shape() {
    return {0.62, 0.58, 0.56, 0.55, 0.56, 0.62, 0.72, 0.85, 0.93, 0.97, 1.00, 1.00,
            0.98, 0.96, 0.95, 0.96, 1.00, 1.08, 1.12, 1.10, 1.02, 0.92, 0.80, 0.70};
}

// Periodic linear interpolation between the hourly points.
inline double shape_at(const DailyShape& s, double hour) {
    const double h = std::fmod(std::fmod(hour, 24.0) + 24.0, 24.0);
    const auto i = static_cast<std::size_t>(h);
    const double t = h - static_cast<double>(i);
    return s[i % 24] * (1.0 - t) + s[(i + 1) % 24] * t;
}

struct LoadProfile {
    double p_base = 100.0;  // kW
    double q_base = 50.0;   // kVAr
    DailyShape daily_shape = flat_shape();
    double variability = 0.2;   // peak-to-mean swing of the shape
    double noise_sigma = 3.0;   // kW; reactive noise scales by q_base / p_base
    double step_jump_prob = 0.0;
    double max_jump = 0.20;
    int jump_hold_steps = 1;
};

inline void validate(const LoadProfile& l) {
    if (!(l.p_base > 0.0 && l.p_base <= 1800.0)) throw ConfigError("load p_base must lie in (0, 1800] kW");
    if (!(l.q_base >= 0.0 && l.q_base <= 900.0)) throw ConfigError("load q_base must lie in [0, 900] kVAr");
    for (double v : l.daily_shape)
        if (!(v > 0.0)) throw ConfigError("load shape multipliers must be positive");
    if (!(l.variability >= 0.0 && l.variability < 1.0)) throw ConfigError("load variability must lie in [0, 1)");
    if (!(l.noise_sigma >= 0.0)) throw ConfigError("load noise sigma must be non-negative");
    if (!(l.step_jump_prob >= 0.0 && l.step_jump_prob <= 1.0)) throw ConfigError("jump probability out of range");
    if (!(l.max_jump >= 0.0 && l.max_jump < 1.0)) throw ConfigError("max jump out of range");
    if (l.jump_hold_steps < 1) throw ConfigError("jump hold must be at least one step");
}

// Shape multiplier rescaled so that its largest excursion from 1 equals the
// configured variability. A flat shape gives exactly 1.
inline double load_multiplier(const LoadProfile& l, double hour) {
    double span = 0.0;
    for (double v : l.daily_shape) span = std::max(span, std::abs(v - 1.0));
    if (span == 0.0) return 1.0;
    return 1.0 + l.variability * (shape_at(l.daily_shape, hour) - 1.0) / span;
}

struct LoadSample {
    double p = 0.0;  // kW
    double q = 0.0;  // kVAr
    double jump = 0.0;
};

// p = p_base * m * (1 + dP), dP = noise_p / p_base + jump. Clamped at 0.
inline LoadSample load_from(const LoadProfile& l, double hour, double noise_p, double noise_q, double jump) {
    const double m = load_multiplier(l, hour);
    LoadSample s;
    s.jump = jump;
    s.p = std::max(0.0, l.p_base * m * (1.0 + noise_p / l.p_base + jump));
    const double dq = l.q_base > 0.0 ? noise_q / l.q_base : 0.0;
    s.q = std::max(0.0, l.q_base * m * (1.0 + dq + jump));
    return s;
}

// Stateless draw: one step of noise plus a possible one-step jump.
// Always consumes six uniforms.
inline LoadSample sample_load(const LoadProfile& l, double hour, Rng& rng) {
    const double np = rng.normal(0.0, l.noise_sigma);
    const double nq = rng.normal(0.0, l.q_base > 0.0 ? l.noise_sigma * l.q_base / l.p_base : 0.0);
    const bool jump = rng.bernoulli(l.step_jump_prob);
    const double mag = rng.uniform(-l.max_jump, l.max_jump);
    return load_from(l, hour, np, nq, jump ? mag : 0.0);
}

// Load with jumps that persist for jump_hold_steps once triggered.
class LoadProcess {
  public:
    LoadProcess(LoadProfile profile, Rng rng) : profile_(profile), rng_(rng) { validate(profile_); }

    LoadSample next(double hour) {
        const double np = rng_.normal(0.0, profile_.noise_sigma);
        const double nq =
            rng_.normal(0.0, profile_.q_base > 0.0 ? profile_.noise_sigma * profile_.q_base / profile_.p_base : 0.0);
        const bool trigger = rng_.bernoulli(profile_.step_jump_prob);
        const double mag = rng_.uniform(-profile_.max_jump, profile_.max_jump);
        if (hold_ > 0) {
            --hold_;
        } else if (trigger) {
            jump_ = mag;
            hold_ = profile_.jump_hold_steps - 1;
        } else {
            jump_ = 0.0;
        }
        return load_from(profile_, hour, np, nq, jump_);
    }

    const LoadProfile& profile() const { return profile_; }

  private:
    LoadProfile profile_;
    Rng rng_;
    double jump_ = 0.0;
    int hold_ = 0;
};

}  // namespace gridsim::devices
