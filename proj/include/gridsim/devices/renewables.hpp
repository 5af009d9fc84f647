#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gridsim/core/errors.hpp"
#include "gridsim/core/random.hpp"

namespace gridsim::devices {

struct SolarUnit {
    double rated = 500.0;       // kW
    double efficiency = 0.2;
    double area = 2500.0;       // m^2
    double beta_a = 8.0;
    double beta_b = 2.0;
    double peak_irradiance = 1000.0;  // W/m^2, clear sky at solar noon
    double sunrise = 6.0;       // h
    double sunset = 18.0;       // h
    double dip_prob = 0.0;
    double dip_min = 0.20;
    double dip_max = 0.60;
    int dip_hold_steps = 1;
};

inline void validate(const SolarUnit& u) {
    if (!(u.rated > 0.0 && u.efficiency > 0.0 && u.efficiency <= 1.0 && u.area > 0.0))
        throw ConfigError("solar unit rating, efficiency and area must be positive");
    if (!(u.beta_a > 0.0 && u.beta_b > 0.0)) throw ConfigError("beta shape parameters must be positive");
    if (!(u.sunrise < u.sunset)) throw ConfigError("sunrise must precede sunset");
    if (!(u.dip_prob >= 0.0 && u.dip_prob <= 1.0)) throw ConfigError("dip probability out of range");
    if (!(u.dip_min >= 0.0 && u.dip_min <= u.dip_max && u.dip_max <= 1.0))
        throw ConfigError("dip range must be ordered within [0, 1]");
    if (u.dip_hold_steps < 1) throw ConfigError("dip hold must be at least one step");
}

// Clear-sky envelope in [0, 1]: half sine between sunrise and sunset.
inline double solar_envelope(const SolarUnit& u, double hour) {
    if (hour <= u.sunrise || hour >= u.sunset) return 0.0;
    return std::sin(std::numbers::pi * (hour - u.sunrise) / (u.sunset - u.sunrise));
}

// P = eta * A * I, reduced by a dip fraction, clamped to [0, rated]. kW.
inline double pv_from_irradiance(const SolarUnit& u, double irradiance, double dip = 0.0) {
    const double p = u.efficiency * u.area * irradiance / 1000.0 * (1.0 - dip);
    return std::clamp(p, 0.0, u.rated);
}

inline double pv_power(const SolarUnit& u, double hour, Rng& rng) {
    const double clear = rng.beta(u.beta_a, u.beta_b);
    const bool dip = rng.bernoulli(u.dip_prob);
    const double d = rng.uniform(u.dip_min, u.dip_max);
    const double irr = clear * solar_envelope(u, hour) * u.peak_irradiance;
    return pv_from_irradiance(u, irr, dip ? d : 0.0);
}

// PV with cloud dips held for dip_hold_steps.
class SolarProcess {
  public:
    SolarProcess(SolarUnit unit, Rng rng) : unit_(unit), rng_(rng) { validate(unit_); }

    double next(double hour) {
        const double clear = rng_.beta(unit_.beta_a, unit_.beta_b);
        const bool trigger = rng_.bernoulli(unit_.dip_prob);
        const double d = rng_.uniform(unit_.dip_min, unit_.dip_max);
        if (hold_ > 0) {
            --hold_;
        } else if (trigger) {
            dip_ = d;
            hold_ = unit_.dip_hold_steps - 1;
        } else {
            dip_ = 0.0;
        }
        return pv_from_irradiance(unit_, clear * solar_envelope(unit_, hour) * unit_.peak_irradiance, dip_);
    }

    double dip() const { return dip_; }
    const SolarUnit& unit() const { return unit_; }

  private:
    SolarUnit unit_;
    Rng rng_;
    double dip_ = 0.0;
    int hold_ = 0;
};

struct WindUnit {
    double rated = 300.0;  // kW
    double air_density = 1.225;
    double swept_area = 700.0;  // m^2
    double power_coeff = 0.4;
    double weibull_scale = 7.5;
    double weibull_shape = 2.0;
    double cut_in = 3.0;
    double cut_out = 22.0;
};

inline void validate(const WindUnit& u) {
    if (!(u.rated > 0.0 && u.air_density > 0.0 && u.swept_area > 0.0))
        throw ConfigError("wind unit rating, density and area must be positive");
    if (!(u.power_coeff > 0.0 && u.power_coeff <= 16.0 / 27.0)) throw ConfigError("power coefficient out of range");
    if (!(u.weibull_scale > 0.0 && u.weibull_shape > 0.0)) throw ConfigError("Weibull parameters must be positive");
    if (!(u.cut_in < u.cut_out)) throw ConfigError("cut-in must be below cut-out");
}

// Cube law, zero outside [cut_in, cut_out], clamped to rated. kW.
inline double wind_from_speed(const WindUnit& u, double v) {
    if (v < u.cut_in || v > u.cut_out) return 0.0;
    const double p = 0.5 * u.air_density * u.swept_area * u.power_coeff * v * v * v / 1000.0;
    return std::clamp(p, 0.0, u.rated);
}

inline double wind_power(const WindUnit& u, Rng& rng) {
    return wind_from_speed(u, rng.weibull(u.weibull_scale, u.weibull_shape));
}

}  // namespace gridsim::devices
