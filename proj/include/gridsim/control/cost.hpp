#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "gridsim/core/bus_state.hpp"
#include "gridsim/core/errors.hpp"

namespace gridsim::control {

// c = (V - 1)^2 + (f - f0)^2 + alpha * |u|^2. Reward is -c.
inline double unified_cost(const BusState& s, const ControlAction& u, double alpha, double f_nominal = 50.0) {
    if (!(alpha > 0.0)) throw DomainError("unified_cost: alpha must be positive");
    const double dv = s.v - 1.0;
    const double df = s.freq - f_nominal;
    return dv * dv + df * df + alpha * u.squared_norm();
}

inline double reward(const BusState& s, const ControlAction& u, double alpha, double f_nominal = 50.0) {
    return -unified_cost(s, u, alpha, f_nominal);
}

inline Eigen::VectorXd to_vector(const ControlAction& u) {
    return Eigen::Map<const Eigen::VectorXd>(u.values.data(), static_cast<Eigen::Index>(n_action));
}

inline ControlAction to_action(const Eigen::VectorXd& v) {
    if (v.size() != static_cast<Eigen::Index>(n_action)) throw DimensionError("action vector must have 4 components");
    ControlAction u;
    for (std::size_t i = 0; i < n_action; ++i) u[i] = v[static_cast<Eigen::Index>(i)];
    return u;
}

struct Transition {
    Eigen::VectorXd state;
    Eigen::VectorXd action;  // continuous agents
    int action_index = -1;   // discrete agents
    double reward = 0.0;
    Eigen::VectorXd next_state;
    bool done = false;
};

inline void validate(const Transition& t) {
    if (!std::isfinite(t.reward)) throw DomainError("transition reward must be finite");
    if (t.state.size() != t.next_state.size()) throw DimensionError("transition state sizes differ");
}

inline Eigen::MatrixXd stack_columns(const std::vector<Eigen::VectorXd>& cols) {
    if (cols.empty()) return {};
    Eigen::MatrixXd m(cols.front().size(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = cols[j];
    return m;
}

inline std::vector<int> layer_sizes(int n_in, const std::vector<int>& hidden, int n_out) {
    std::vector<int> s{n_in};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(n_out);
    return s;
}

}  // namespace gridsim::control
