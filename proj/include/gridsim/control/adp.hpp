#pragma once

#include <algorithm>
#include <vector>

#include "gridsim/control/cost.hpp"
#include "gridsim/core/random.hpp"
#include "gridsim/nn/mlp.hpp"
#include "gridsim/nn/optimizer.hpp"

namespace gridsim::control {

enum class AdpMode { edge, cloud };

struct AdpConfig {
    std::vector<int> hidden{64, 64};
    nn::Activation activation = nn::Activation::tanh;
    double gamma = 0.95;
    double alpha = 0.1;               // effort weight in the actor objective
    double exploration_sigma = 0.05;  // Gaussian perturbation of the acted command
    nn::OptimizerConfig critic_opt{nn::OptimizerKind::adam, 1e-3};
    nn::OptimizerConfig actor_opt{nn::OptimizerKind::adam, 1e-4};
};

inline void validate(const AdpConfig& c) {
    if (!(c.gamma > 0.0 && c.gamma <= 1.0)) throw ConfigError("ADP gamma must lie in (0, 1]");
    if (!(c.alpha > 0.0)) throw ConfigError("ADP alpha must be positive");
    if (!(c.exploration_sigma >= 0.0)) throw ConfigError("ADP exploration sigma must be non-negative");
    nn::validate(c.critic_opt);
    nn::validate(c.actor_opt);
}

struct TdResult {
    double target = 0.0;
    double error = 0.0;
};

// Actor-critic approximation of the cost-to-go. The critic is trained on the
// semi-gradient TD(0) loss; the actor descends the effort term of the unified
// cost and moves toward taken actions that produced a positive TD error.
class AdpAgent {
  public:
    AdpAgent(int n_in, int n_act, AdpConfig cfg, AdpMode mode, Rng& init)
        : cfg_(std::move(cfg)),
          mode_(mode),
          value_(layer_sizes(n_in, cfg_.hidden, 1), cfg_.activation, init),
          policy_(layer_sizes(n_in, cfg_.hidden, n_act), cfg_.activation, init),
          critic_opt_(cfg_.critic_opt),
          actor_opt_(cfg_.actor_opt) {
        validate(cfg_);
    }

    AdpMode mode() const { return mode_; }
    const AdpConfig& config() const { return cfg_; }
    nn::Mlp& value_net() { return value_; }
    const nn::Mlp& value_net() const { return value_; }
    nn::Mlp& policy_net() { return policy_; }
    const nn::Mlp& policy_net() const { return policy_; }

    double value(const Eigen::VectorXd& x) const { return value_.forward(x)[0]; }

    Eigen::VectorXd act_vector(const Eigen::VectorXd& x) const { return policy_.forward(x).array().tanh(); }

    ControlAction act(const Eigen::VectorXd& x) const { return to_action(act_vector(x)); }

    // Deterministic action plus exploration; draws one normal per component.
    Eigen::VectorXd explore(const Eigen::VectorXd& x, Rng& rng) const {
        Eigen::VectorXd u = act_vector(x);
        for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = std::clamp(u[i] + rng.normal(0.0, cfg_.exploration_sigma), -1.0, 1.0);
        return u;
    }

    TdResult td(const Transition& t) const {
        TdResult r;
        r.target = t.reward + (t.done ? 0.0 : cfg_.gamma * value(t.next_state));
        r.error = r.target - value(t.state);
        return r;
    }

    // One optimizer step on each network over the batch. Returns mean squared TD error.
    double update(const std::vector<Transition>& batch) {
        if (batch.empty()) return 0.0;
        for (const auto& t : batch) validate(t);
        const auto n = static_cast<Eigen::Index>(batch.size());
        Eigen::MatrixXd s(value_.input_size(), n), s2(value_.input_size(), n);
        for (Eigen::Index j = 0; j < n; ++j) {
            s.col(j) = batch[static_cast<std::size_t>(j)].state;
            s2.col(j) = batch[static_cast<std::size_t>(j)].next_state;
        }
        const Eigen::RowVectorXd v = value_.forward_batch(s);
        const Eigen::RowVectorXd v2 = value_.forward_batch(s2);
        Eigen::RowVectorXd delta(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto& t = batch[static_cast<std::size_t>(j)];
            delta[j] = t.reward + (t.done ? 0.0 : cfg_.gamma * v2[j]) - v[j];
        }
        const double inv = 1.0 / static_cast<double>(n);
        critic_opt_.apply(value_, value_.backward_batch(s, -delta * inv));

        const bool has_actions = batch.front().action.size() == policy_.output_size();
        const Eigen::MatrixXd u = policy_.forward_batch(s).array().tanh();
        Eigen::MatrixXd gu = 2.0 * cfg_.alpha * u;
        if (has_actions) {
            for (Eigen::Index j = 0; j < n; ++j)
                if (delta[j] > 0.0) gu.col(j) += u.col(j) - batch[static_cast<std::size_t>(j)].action;
        }
        const Eigen::MatrixXd gz = gu.array() * (1.0 - u.array().square()) * inv;
        actor_opt_.apply(policy_, policy_.backward_batch(s, gz));
        return delta.squaredNorm() * inv;
    }

    double update(const Transition& t) { return update(std::vector<Transition>{t}); }

    // Pull of parameters from another agent (cloud to edge).
    void copy_parameters_from(const AdpAgent& other) {
        value_ = other.value_;
        policy_ = other.policy_;
    }

  private:
    AdpConfig cfg_;
    AdpMode mode_;
    nn::Mlp value_;
    nn::Mlp policy_;
    nn::Optimizer critic_opt_;
    nn::Optimizer actor_opt_;
};

}  // namespace gridsim::control
