#pragma once

#include <algorithm>
#include <vector>

#include "gridsim/control/cost.hpp"
#include "gridsim/core/random.hpp"
#include "gridsim/nn/mlp.hpp"
#include "gridsim/nn/optimizer.hpp"

namespace gridsim::control {

struct DqnConfig {
    std::vector<int> hidden{64, 64};
    nn::Activation activation = nn::Activation::tanh;
    std::vector<double> action_grid{-1.0, -0.5, 0.0, 0.5, 1.0};
    std::size_t component = 1;  // which ControlAction entry the grid drives
    double gamma = 0.95;
    double epsilon_start = 0.2;
    double epsilon_end = 0.02;
    long epsilon_decay_steps = 2000;
    std::size_t replay_capacity = 20000;
    std::size_t batch_size = 32;
    long target_sync = 200;  // updates between target copies
    double violation_penalty = 0.0;
    nn::OptimizerConfig opt{nn::OptimizerKind::adam, 5e-4, 0.9, 0.999, 1e-8, 10.0};
};

inline void validate(const DqnConfig& c) {
    if (c.action_grid.empty()) throw ConfigError("DQN action grid must not be empty");
    if (c.component >= n_action) throw ConfigError("DQN component index out of range");
    if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) throw ConfigError("DQN gamma must lie in [0, 1]");
    for (double e : {c.epsilon_start, c.epsilon_end})
        if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("DQN epsilon must lie in [0, 1]");
    if (c.replay_capacity == 0 || c.batch_size == 0 || c.target_sync < 1) throw ConfigError("DQN counts must be positive");
    if (!(c.violation_penalty >= 0.0)) throw ConfigError("DQN violation penalty must be non-negative");
    nn::validate(c.opt);
}

// Bounded FIFO of transitions.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {
        data_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
    }

    void push(Transition t) {
        validate(t);
        if (data_.size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }

    // Oldest first.
    const Transition& at(std::size_t i) const { return data_[(head_ + i) % data_.size()]; }

    // Uniform sampling with replacement; one uniform per draw.
    std::vector<Transition> sample(std::size_t n, Rng& rng) const {
        std::vector<Transition> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(data_[rng.index(data_.size())]);
        return out;
    }

  private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> data_;
};

// Lowest index among the maxima.
inline int argmax_first(const Eigen::VectorXd& q) {
    int best = 0;
    for (Eigen::Index i = 1; i < q.size(); ++i)
        if (q[i] > q[best]) best = static_cast<int>(i);
    return best;
}

struct DqnDecision {
    int index = 0;
    ControlAction action;
    double q_value = 0.0;  // Q of the chosen index
    bool explored = false;
};

class DqnAgent {
  public:
    DqnAgent(int n_in, DqnConfig cfg, Rng& init)
        : cfg_(std::move(cfg)),
          q_(layer_sizes(n_in, cfg_.hidden, static_cast<int>(cfg_.action_grid.size())), cfg_.activation, init),
          target_(q_),
          opt_(cfg_.opt),
          replay_(cfg_.replay_capacity) {
        validate(cfg_);
    }

    const DqnConfig& config() const { return cfg_; }
    nn::Mlp& q_net() { return q_; }
    const nn::Mlp& q_net() const { return q_; }
    const nn::Mlp& target_net() const { return target_; }
    ReplayBuffer& replay() { return replay_; }
    const ReplayBuffer& replay() const { return replay_; }
    long updates() const { return updates_; }
    std::size_t action_count() const { return cfg_.action_grid.size(); }

    Eigen::VectorXd q_values(const Eigen::VectorXd& x) const { return q_.forward(x); }

    double epsilon(long step) const {
        if (cfg_.epsilon_decay_steps <= 0 || step >= cfg_.epsilon_decay_steps) return cfg_.epsilon_end;
        const double f = static_cast<double>(step) / static_cast<double>(cfg_.epsilon_decay_steps);
        return cfg_.epsilon_start + f * (cfg_.epsilon_end - cfg_.epsilon_start);
    }

    ControlAction action_for(int index) const {
        ControlAction u;
        u[cfg_.component] = cfg_.action_grid.at(static_cast<std::size_t>(index));
        return u;
    }

    // epsilon-greedy; always consumes two uniforms.
    DqnDecision act(const Eigen::VectorXd& x, double eps, Rng& rng) const {
        const Eigen::VectorXd q = q_values(x);
        const bool explore = rng.bernoulli(eps);
        const auto random_index = static_cast<int>(rng.index(action_count()));
        DqnDecision d;
        d.explored = explore;
        d.index = explore ? random_index : argmax_first(q);
        d.q_value = q[d.index];
        d.action = action_for(d.index);
        return d;
    }

    void remember(Transition t) { replay_.push(std::move(t)); }

    // One optimizer step on the squared TD loss against the target network.
    // Returns the mean loss.
    double update(const std::vector<Transition>& batch) {
        if (batch.empty()) return 0.0;
        const auto n = static_cast<Eigen::Index>(batch.size());
        Eigen::MatrixXd s(q_.input_size(), n), s2(q_.input_size(), n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto& t = batch[static_cast<std::size_t>(j)];
            if (t.action_index < 0 || t.action_index >= static_cast<int>(action_count()))
                throw DimensionError("DQN transition action index out of range");
            s.col(j) = t.state;
            s2.col(j) = t.next_state;
        }
        const Eigen::MatrixXd q = q_.forward_batch(s);
        const Eigen::MatrixXd qt = target_.forward_batch(s2);
        Eigen::MatrixXd up = Eigen::MatrixXd::Zero(q.rows(), n);
        double loss = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto& t = batch[static_cast<std::size_t>(j)];
            const double y = t.reward + (t.done ? 0.0 : cfg_.gamma * qt.col(j).maxCoeff());
            const double err = q(t.action_index, j) - y;
            up(t.action_index, j) = err / static_cast<double>(n);
            loss += 0.5 * err * err / static_cast<double>(n);
        }
        opt_.apply(q_, q_.backward_batch(s, up));
        if (++updates_ % cfg_.target_sync == 0) target_ = q_;
        return loss;
    }

    // Samples a minibatch from replay when enough transitions are stored.
    bool train_step(Rng& rng) {
        if (replay_.size() < cfg_.batch_size) return false;
        update(replay_.sample(cfg_.batch_size, rng));
        return true;
    }

  private:
    DqnConfig cfg_;
    nn::Mlp q_;
    nn::Mlp target_;
    nn::Optimizer opt_;
    ReplayBuffer replay_;
    long updates_ = 0;
};

}  // namespace gridsim::control
