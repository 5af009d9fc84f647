#pragma once

#include <algorithm>
#include <array>
#include <cstddef>

#include <Eigen/Dense>

namespace gridsim {

// Per-bus physical measurement vector. Powers in kW / kVAr, SOC as a
// fraction, frequency in Hz. `step` is the sampling time index.
struct BusState {
    double v = 1.0;
    double theta = 0.0;
    double p_load = 0.0;
    double q_load = 0.0;
    double solar = 0.0;
    double wind = 0.0;
    double soc = 0.0;
    double ev = 0.0;
    double freq = 50.0;
    long step = 0;

    bool operator==(const BusState&) const = default;
};

inline constexpr std::size_t n_features = 9;

// Normalization used for the feature vector.
struct FeatureScales {
    double p_base = 100.0;  // kW
    double q_base = 100.0;  // kVAr
    double solar_rated = 500.0;
    double wind_rated = 300.0;
    double ev_max = 120.0;
    double f_nominal = 50.0;
};

inline Eigen::VectorXd features(const BusState& s, const FeatureScales& k) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(n_features));
    x << s.v - 1.0, s.theta, s.p_load / k.p_base, s.q_load / k.q_base, s.solar / k.solar_rated,
        s.wind / k.wind_rated, s.soc, s.ev / k.ev_max, s.freq - k.f_nominal;
    return x;
}

inline constexpr std::size_t n_action = 4;

// Normalized per-bus command: reactive injection, battery power, load
// curtailment, EV modulation. Each component in [-1, 1].
struct ControlAction {
    std::array<double, n_action> values{};

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    double squared_norm() const {
        double s = 0.0;
        for (double v : values) s += v * v;
        return s;
    }

    ControlAction clamped() const {
        ControlAction out = *this;
        for (auto& v : out.values) v = std::clamp(v, -1.0, 1.0);
        return out;
    }

    bool operator==(const ControlAction&) const = default;
};

}  // namespace gridsim
