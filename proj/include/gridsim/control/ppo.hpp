#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>
#include <vector>

#include "gridsim/control/cost.hpp"
#include "gridsim/core/random.hpp"
#include "gridsim/nn/mlp.hpp"
#include "gridsim/nn/optimizer.hpp"

namespace gridsim::control {

inline constexpr double log_std_min = -20.0;
inline constexpr double log_std_max = 2.0;

struct PpoConfig {
    std::vector<int> hidden{64, 64};
    nn::Activation activation = nn::Activation::tanh;
    double clip_eps = 0.2;
    double gamma = 0.95;
    double gae_lambda = 0.95;
    int rollout_len = 256;  // steps per update round
    int epochs = 4;
    int minibatch = 1024;   // samples
    double init_log_std = -0.7;
    double entropy_coef = 0.0;
    double log_std_floor = log_std_min;  // lower bound on the policy log std
    nn::OptimizerConfig actor_opt{nn::OptimizerKind::adam, 3e-4, 0.9, 0.999, 1e-8, 0.5};
    nn::OptimizerConfig critic_opt{nn::OptimizerKind::adam, 1e-3, 0.9, 0.999, 1e-8, 0.5};
};

inline void validate(const PpoConfig& c) {
    if (!(c.clip_eps > 0.0 && c.clip_eps < 1.0)) throw ConfigError("PPO clip epsilon must lie in (0, 1)");
    if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) throw ConfigError("PPO gamma must lie in [0, 1]");
    if (!(c.gae_lambda >= 0.0 && c.gae_lambda <= 1.0)) throw ConfigError("GAE lambda must lie in [0, 1]");
    if (c.rollout_len < 1 || c.epochs < 1 || c.minibatch < 1) throw ConfigError("PPO counts must be positive");
    if (!(c.log_std_floor >= log_std_min && c.log_std_floor < log_std_max)) throw ConfigError("PPO log std floor out of range");
    nn::validate(c.actor_opt);
    nn::validate(c.critic_opt);
}

// A_t = delta_t + gamma * lambda * A_{t+1}, delta_t = r_t + gamma V_{t+1} - V_t.
// `values` has one more entry than `rewards` (the bootstrap). A done flag cuts
// both the bootstrap and the recursion at that step.
inline std::vector<double> gae(const std::vector<double>& rewards, const std::vector<double>& values, double gamma,
                               double lambda, const std::vector<bool>& dones = {}) {
    if (values.size() != rewards.size() + 1) throw DimensionError("gae: values must have one more entry than rewards");
    if (!dones.empty() && dones.size() != rewards.size()) throw DimensionError("gae: dones length");
    std::vector<double> adv(rewards.size());
    double next = 0.0;
    for (std::size_t t = rewards.size(); t-- > 0;) {
        const bool done = !dones.empty() && dones[t];
        const double delta = rewards[t] + (done ? 0.0 : gamma * values[t + 1]) - values[t];
        next = delta + (done ? 0.0 : gamma * lambda * next);
        adv[t] = next;
    }
    return adv;
}

struct Surrogate {
    double value = 0.0;
    bool gradient_active = false;  // d value / d rho is non-zero
};

// min(rho A, clip(rho, 1 - eps, 1 + eps) A).
inline Surrogate clipped_surrogate(double rho, double adv, double eps) {
    const double unclipped = rho * adv;
    const double clipped = std::clamp(rho, 1.0 - eps, 1.0 + eps) * adv;
    if (unclipped <= clipped) return {unclipped, true};
    return {clipped, false};
}

inline double gaussian_log_prob(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::VectorXd& log_std) {
    constexpr double half_log_2pi = 0.91893853320467274178;
    double lp = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double z = (x[i] - mu[i]) / std::exp(log_std[i]);
        lp += -0.5 * z * z - log_std[i] - half_log_2pi;
    }
    return lp;
}

struct PpoDecision {
    Eigen::VectorXd mean;
    Eigen::VectorXd log_std;
    Eigen::VectorXd sample;   // pre-clamp draw, used for training
    Eigen::VectorXd applied;  // clamped, zeroed on a dropped packet
    double log_prob = 0.0;
    double value = 0.0;
    bool dropped = false;
};

struct PpoBatch {
    Eigen::MatrixXd states;   // n_in x B
    Eigen::MatrixXd samples;  // n_act x B
    Eigen::VectorXd log_prob_old;
    Eigen::VectorXd advantages;
    Eigen::VectorXd returns;
};

struct PpoActorGradient {
    nn::Gradients grads;
    double mean_objective = 0.0;
    double max_objective = -std::numeric_limits<double>::infinity();
    double clip_fraction = 0.0;
};

// Gradient of the loss -mean(surrogate) - c_ent * mean(entropy) with respect to
// the actor parameters. The actor outputs [mu; log_std].
inline PpoActorGradient ppo_actor_gradient(const nn::Mlp& actor, const PpoBatch& b, double eps, double entropy_coef,
                                           double ls_floor = log_std_min) {
    const auto n_act = actor.output_size() / 2;
    const auto B = b.states.cols();
    const Eigen::MatrixXd out = actor.forward_batch(b.states);
    Eigen::MatrixXd up(out.rows(), B);
    PpoActorGradient r;
    int clipped = 0;
    const double inv = 1.0 / static_cast<double>(B);
    for (Eigen::Index j = 0; j < B; ++j) {
        const Eigen::VectorXd mu = out.col(j).head(n_act);
        const Eigen::VectorXd raw = out.col(j).tail(n_act);
        const Eigen::VectorXd ls = raw.cwiseMax(ls_floor).cwiseMin(log_std_max);
        const double lp = gaussian_log_prob(b.samples.col(j), mu, ls);
        const double rho = std::exp(lp - b.log_prob_old[j]);
        const auto s = clipped_surrogate(rho, b.advantages[j], eps);
        r.mean_objective += s.value * inv;
        r.max_objective = std::max(r.max_objective, s.value);
        if (!s.gradient_active) ++clipped;
        const double dobj = s.gradient_active ? rho * b.advantages[j] : 0.0;  // d obj / d log_prob
        for (Eigen::Index i = 0; i < n_act; ++i) {
            const double var = std::exp(2.0 * ls[i]);
            const double d = b.samples(i, j) - mu[i];
            up(i, j) = -dobj * d / var * inv;
            const bool inside = raw[i] > ls_floor && raw[i] < log_std_max;
            up(n_act + i, j) = inside ? (-dobj * (d * d / var - 1.0) - entropy_coef) * inv : 0.0;
        }
    }
    r.clip_fraction = static_cast<double>(clipped) * inv;
    r.grads = actor.backward_batch(b.states, up);
    return r;
}

struct PpoStats {
    int updates = 0;
    double mean_objective = 0.0;
    double max_objective = 0.0;
    double clip_fraction = 0.0;
    double value_loss = 0.0;
};

// Gaussian policy with state-dependent mean and log standard deviation, plus a
// separate critic. Samples from several parallel streams (buses) are recorded
// step by step; every `rollout_len` steps the collected rollout is consumed by
// an update round.
class PpoAgent {
  public:
    struct Sample {
        Eigen::VectorXd state;
        Eigen::VectorXd sample;
        double log_prob = 0.0;
        double value = 0.0;
        double reward = 0.0;
        bool done = false;
    };

    PpoAgent(int n_in, int n_act, PpoConfig cfg, Rng& init)
        : cfg_(std::move(cfg)),
          actor_(layer_sizes(n_in, cfg_.hidden, 2 * n_act), cfg_.activation, init),
          critic_(layer_sizes(n_in, cfg_.hidden, 1), cfg_.activation, init),
          actor_opt_(cfg_.actor_opt),
          critic_opt_(cfg_.critic_opt),
          shuffle_(Rng::stream(static_cast<std::uint64_t>(init.engine()()), 0x5050)) {
        validate(cfg_);
        auto& last = actor_.layers().back();
        last.w.bottomRows(n_act) *= 0.01;
        last.b.tail(n_act).setConstant(cfg_.init_log_std);
    }

    const PpoConfig& config() const { return cfg_; }
    nn::Mlp& actor() { return actor_; }
    const nn::Mlp& actor() const { return actor_; }
    nn::Mlp& critic() { return critic_; }
    const nn::Mlp& critic() const { return critic_; }
    int action_size() const { return actor_.output_size() / 2; }
    const PpoStats& last_stats() const { return stats_; }

    std::pair<Eigen::VectorXd, Eigen::VectorXd> distribution(const Eigen::VectorXd& x) const {
        const Eigen::VectorXd out = actor_.forward(x);
        const auto n = action_size();
        return {out.head(n), out.tail(n).cwiseMax(cfg_.log_std_floor).cwiseMin(log_std_max)};
    }

    double value(const Eigen::VectorXd& x) const { return critic_.forward(x)[0]; }

    double log_prob(const Eigen::VectorXd& x, const Eigen::VectorXd& sample) const {
        const auto [mu, ls] = distribution(x);
        return gaussian_log_prob(sample, mu, ls);
    }

    // Draws one normal per component and one uniform for the drop test.
    PpoDecision act(const Eigen::VectorXd& x, Rng& rng, double p_drop = 0.0) const {
        PpoDecision d;
        std::tie(d.mean, d.log_std) = distribution(x);
        d.sample.resize(d.mean.size());
        for (Eigen::Index i = 0; i < d.mean.size(); ++i) d.sample[i] = d.mean[i] + std::exp(d.log_std[i]) * rng.normal();
        d.dropped = rng.bernoulli(p_drop);
        d.applied = d.dropped ? Eigen::VectorXd::Zero(d.mean.size()) : Eigen::VectorXd(d.sample.cwiseMax(-1.0).cwiseMin(1.0));
        d.log_prob = gaussian_log_prob(d.sample, d.mean, d.log_std);
        d.value = value(x);
        return d;
    }

    // Adds one step of samples (one per stream). When a full rollout is
    // already stored, the new step's values bootstrap it and an update round
    // runs before the step is stored. Returns true when an update ran.
    bool record(std::vector<Sample> step) {
        bool updated = false;
        if (static_cast<int>(rollout_.size()) == cfg_.rollout_len) {
            std::vector<double> boot(step.size());
            for (std::size_t i = 0; i < step.size(); ++i) boot[i] = step[i].value;
            train_on_rollout(boot);
            updated = true;
        }
        rollout_.push_back(std::move(step));
        return updated;
    }

    // Consumes the stored rollout, bootstrapping from `bootstrap` (one per stream).
    void train_on_rollout(const std::vector<double>& bootstrap) {
        if (rollout_.empty()) return;
        const std::size_t streams = rollout_.front().size();
        if (bootstrap.size() != streams) throw DimensionError("bootstrap values per stream");
        const std::size_t T = rollout_.size();
        const std::size_t n = T * streams;
        PpoBatch b;
        b.states.resize(actor_.input_size(), static_cast<Eigen::Index>(n));
        b.samples.resize(action_size(), static_cast<Eigen::Index>(n));
        b.log_prob_old.resize(static_cast<Eigen::Index>(n));
        b.advantages.resize(static_cast<Eigen::Index>(n));
        b.returns.resize(static_cast<Eigen::Index>(n));
        for (std::size_t s = 0; s < streams; ++s) {
            std::vector<double> r(T), v(T + 1);
            std::vector<bool> d(T);
            for (std::size_t t = 0; t < T; ++t) {
                if (rollout_[t].size() != streams) throw DimensionError("stream count changed within a rollout");
                r[t] = rollout_[t][s].reward;
                v[t] = rollout_[t][s].value;
                d[t] = rollout_[t][s].done;
            }
            v[T] = bootstrap[s];
            const auto adv = gae(r, v, cfg_.gamma, cfg_.gae_lambda, d);
            for (std::size_t t = 0; t < T; ++t) {
                const auto j = static_cast<Eigen::Index>(t * streams + s);
                const auto& smp = rollout_[t][s];
                b.states.col(j) = smp.state;
                b.samples.col(j) = smp.sample;
                b.log_prob_old[j] = smp.log_prob;
                b.advantages[j] = adv[t];
                b.returns[j] = adv[t] + v[t];
            }
        }
        rollout_.clear();
        update(b);
    }

    // Normalizes advantages, then runs `epochs` passes over shuffled minibatches.
    PpoStats update(PpoBatch b) {
        const auto n = b.states.cols();
        stats_ = {};
        if (n == 0) return stats_;
        const double mean = b.advantages.mean();
        const double sd = std::sqrt((b.advantages.array() - mean).square().mean());
        b.advantages = (b.advantages.array() - mean) / (sd > 1e-12 ? sd : 1.0);

        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        stats_.max_objective = -std::numeric_limits<double>::infinity();
        for (int e = 0; e < cfg_.epochs; ++e) {
            for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[shuffle_.index(i)]);
            for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(cfg_.minibatch)) {
                const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(cfg_.minibatch));
                const auto m = static_cast<Eigen::Index>(end - start);
                PpoBatch mb;
                mb.states.resize(b.states.rows(), m);
                mb.samples.resize(b.samples.rows(), m);
                mb.log_prob_old.resize(m);
                mb.advantages.resize(m);
                mb.returns.resize(m);
                for (Eigen::Index k = 0; k < m; ++k) {
                    const auto j = idx[start + static_cast<std::size_t>(k)];
                    mb.states.col(k) = b.states.col(j);
                    mb.samples.col(k) = b.samples.col(j);
                    mb.log_prob_old[k] = b.log_prob_old[j];
                    mb.advantages[k] = b.advantages[j];
                    mb.returns[k] = b.returns[j];
                }
                auto g = ppo_actor_gradient(actor_, mb, cfg_.clip_eps, cfg_.entropy_coef, cfg_.log_std_floor);
                actor_opt_.apply(actor_, g.grads);

                const Eigen::RowVectorXd v = critic_.forward_batch(mb.states);
                const Eigen::RowVectorXd err = v - mb.returns.transpose();
                critic_opt_.apply(critic_, critic_.backward_batch(mb.states, err / static_cast<double>(m)));

                ++stats_.updates;
                stats_.mean_objective += g.mean_objective;
                stats_.max_objective = std::max(stats_.max_objective, g.max_objective);
                stats_.clip_fraction += g.clip_fraction;
                stats_.value_loss += 0.5 * err.squaredNorm() / static_cast<double>(m);
            }
        }
        stats_.mean_objective /= stats_.updates;
        stats_.clip_fraction /= stats_.updates;
        stats_.value_loss /= stats_.updates;
        return stats_;
    }

    std::size_t stored_steps() const { return rollout_.size(); }

  private:
    PpoConfig cfg_;
    nn::Mlp actor_;
    nn::Mlp critic_;
    nn::Optimizer actor_opt_;
    nn::Optimizer critic_opt_;
    Rng shuffle_;
    std::vector<std::vector<Sample>> rollout_;
    PpoStats stats_;
};

}  // namespace gridsim::control
