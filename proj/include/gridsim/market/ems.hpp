#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gridsim/core/errors.hpp"
#include "gridsim/devices/storage.hpp"

namespace gridsim::market {

struct QuadraticCost {
    double a = 0.0;  // per kW^2 h
    double b = 0.0;  // per kWh
    double c = 0.0;  // per h

    double operator()(double p) const { return a * p * p + b * p + c; }
};

struct EmsCostParams {
    std::vector<QuadraticCost> gen_cost;  // one per generator
    double curtail_cost = 0.0;            // per kWh shed
    double storage_cost = 0.0;            // per kW^2 h of battery throughput
    double switch_cost = 0.0;             // per squared action change
};

inline void validate(const EmsCostParams& p) {
    for (const auto& g : p.gen_cost)
        if (!(g.a >= 0.0 && g.b >= 0.0 && g.c >= 0.0)) throw ConfigError("generation cost coefficients must be non-negative");
    if (!(p.curtail_cost >= 0.0 && p.storage_cost >= 0.0 && p.switch_cost >= 0.0))
        throw ConfigError("EMS cost coefficients must be non-negative");
}

// One dispatch interval. Powers in kW; battery power positive when charging.
struct DispatchStep {
    std::vector<double> p_gen;
    std::vector<double> p_shed;     // per bus
    std::vector<double> p_load;     // per bus, before shedding
    std::vector<double> p_storage;  // per battery
    std::vector<double> u;          // control vector
    std::optional<double> pf_mismatch;  // network residual reported by the power-flow solver, p.u.
};

struct EmsCostBreakdown {
    double generation = 0.0;
    double curtailment = 0.0;
    double storage = 0.0;
    double switching = 0.0;
    double total() const { return generation + curtailment + storage + switching; }
};

// Rectangle rule: J = sum_k (C_G + C_L + C_E + C_S) * dt, dt in hours.
inline EmsCostBreakdown ems_cost_breakdown(const std::vector<DispatchStep>& series, const EmsCostParams& p, double dt_h) {
    validate(p);
    if (!(dt_h > 0.0)) throw DomainError("ems_cost: dt must be positive");
    EmsCostBreakdown out;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        if (s.p_gen.size() > p.gen_cost.size()) throw DimensionError("more generators than cost curves");
        for (std::size_t g = 0; g < s.p_gen.size(); ++g) out.generation += p.gen_cost[g](s.p_gen[g]) * dt_h;
        for (double x : s.p_shed) out.curtailment += p.curtail_cost * x * dt_h;
        for (double x : s.p_storage) out.storage += p.storage_cost * x * x * dt_h;
        if (k > 0) {
            const auto& prev = series[k - 1].u;
            if (prev.size() != s.u.size()) throw DimensionError("control vector length changed");
            for (std::size_t i = 0; i < s.u.size(); ++i) {
                const double d = s.u[i] - prev[i];
                out.switching += p.switch_cost * d * d * dt_h;
            }
        }
    }
    return out;
}

inline double ems_cost(const std::vector<DispatchStep>& series, const EmsCostParams& p, double dt_h) {
    return ems_cost_breakdown(series, p, dt_h).total();
}

struct DispatchConstraints {
    std::vector<double> p_g_min;
    std::vector<double> p_g_max;
    std::vector<devices::Battery> batteries;  // initial state per storage unit
    double shed_max_fraction = 1.0;           // of the bus load
    double pf_tolerance = 1e-6;
};

inline void validate(const DispatchConstraints& c) {
    if (c.p_g_min.size() != c.p_g_max.size()) throw ConfigError("generator limit lists differ in length");
    for (std::size_t i = 0; i < c.p_g_min.size(); ++i)
        if (!(c.p_g_min[i] <= c.p_g_max[i])) throw ConfigError("generator limits out of order");
    for (const auto& b : c.batteries) {
        devices::validate(b);
        for (double eta : {b.eta_charge, b.eta_discharge})
            if (!(eta >= 0.85 && eta <= 0.98)) throw ConfigError("storage efficiency must lie in [0.85, 0.98]");
    }
    if (!(c.shed_max_fraction >= 0.0 && c.shed_max_fraction <= 1.0)) throw ConfigError("shed fraction out of range");
}

struct Violation {
    std::string kind;  // generation, shed, storage, power_flow
    std::size_t index = 0;
    std::size_t step = 0;
    double value = 0.0;
    double bound = 0.0;

    std::string describe() const {
        std::ostringstream os;
        os << kind << " " << index << " at step " << step << ": " << value << " vs bound " << bound;
        return os.str();
    }
};

// Bound checks per step. Storage commands are replayed through battery_step;
// any clamp is a violation, reported with the feasible power as the bound.
inline std::vector<Violation> check_constraints(const std::vector<DispatchStep>& series, const DispatchConstraints& c,
                                                double dt_h) {
    validate(c);
    if (!(dt_h > 0.0)) throw DomainError("check_constraints: dt must be positive");
    constexpr double tol = 1e-9;
    std::vector<Violation> out;
    auto batteries = c.batteries;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        for (std::size_t g = 0; g < s.p_gen.size() && g < c.p_g_max.size(); ++g) {
            if (s.p_gen[g] > c.p_g_max[g] + tol) out.push_back({"generation", g, k, s.p_gen[g], c.p_g_max[g]});
            if (s.p_gen[g] < c.p_g_min[g] - tol) out.push_back({"generation", g, k, s.p_gen[g], c.p_g_min[g]});
        }
        for (std::size_t i = 0; i < s.p_shed.size(); ++i) {
            const double load = i < s.p_load.size() ? s.p_load[i] : 0.0;
            const double cap = c.shed_max_fraction * load;
            if (s.p_shed[i] < -tol) out.push_back({"shed", i, k, s.p_shed[i], 0.0});
            if (s.p_shed[i] > cap + tol) out.push_back({"shed", i, k, s.p_shed[i], cap});
        }
        for (std::size_t b = 0; b < s.p_storage.size() && b < batteries.size(); ++b) {
            const auto r = devices::battery_step(batteries[b], s.p_storage[b], dt_h);
            if (std::abs(r.applied - s.p_storage[b]) > 1e-6) out.push_back({"storage", b, k, s.p_storage[b], r.applied});
            batteries[b] = r.battery;
        }
        if (s.pf_mismatch && *s.pf_mismatch > c.pf_tolerance)
            out.push_back({"power_flow", 0, k, *s.pf_mismatch, c.pf_tolerance});
    }
    return out;
}

}  // namespace gridsim::market
