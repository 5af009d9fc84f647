#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "gridsim/control/cost.hpp"

namespace gridsim::control {

// Listed in tie-break priority order.
enum class ControllerTag { adp = 0, ppo = 1, dqn = 2 };

inline const char* to_string(ControllerTag t) {
    switch (t) {
        case ControllerTag::adp: return "adp";
        case ControllerTag::ppo: return "ppo";
        case ControllerTag::dqn: return "dqn";
    }
    return "?";
}

struct Candidate {
    ControllerTag tag = ControllerTag::adp;
    ControlAction action;
};

struct HybridChoice {
    std::optional<ControllerTag> tag;  // empty when every candidate was excluded
    ControlAction action;
    double cost = 0.0;
    std::vector<std::optional<double>> candidate_costs;  // aligned with the input
};

// Evaluates each candidate through `shadow` (action -> optional next state;
// empty means the shadow step diverged) and returns the unified-cost argmin.
// Ties go to the higher-priority tag.
template <class Shadow>
HybridChoice hybrid_select(const std::vector<Candidate>& candidates, Shadow&& shadow, double alpha,
                           double f_nominal = 50.0) {
    HybridChoice out;
    out.candidate_costs.resize(candidates.size());
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const std::optional<BusState> next = shadow(candidates[i]);
        if (!next) continue;
        const double c = unified_cost(*next, candidates[i].action, alpha, f_nominal);
        out.candidate_costs[i] = c;
        if (!best || c < out.cost ||
            (c == out.cost && static_cast<int>(candidates[i].tag) < static_cast<int>(candidates[*best].tag))) {
            best = i;
            out.cost = c;
        }
    }
    if (!best) {
        spdlog::debug("hybrid supervisor: every candidate diverged in the shadow step, applying zero action");
        out.cost = 0.0;
        return out;
    }
    out.tag = candidates[*best].tag;
    out.action = candidates[*best].action;
    return out;
}

// Selection from precomputed shadow next states (aligned with candidates).
inline HybridChoice hybrid_select(const std::vector<Candidate>& candidates,
                                  const std::vector<std::optional<BusState>>& next_states, double alpha,
                                  double f_nominal = 50.0) {
    if (next_states.size() != candidates.size()) throw DimensionError("one shadow state per candidate");
    std::size_t i = 0;
    return hybrid_select(
        candidates, [&](const Candidate&) { return next_states[i++]; }, alpha, f_nominal);
}

}  // namespace gridsim::control
