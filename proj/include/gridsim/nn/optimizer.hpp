#pragma once

#include <cmath>
#include <optional>

#include "gridsim/core/errors.hpp"
#include "gridsim/nn/mlp.hpp"

namespace gridsim::nn {

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double grad_clip = 0.0;  // global L2 norm; 0 disables
};

inline void validate(const OptimizerConfig& c) {
    if (!(c.learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
    if (!(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0))
        throw ConfigError("Adam decay rates must lie in [0, 1)");
    if (!(c.grad_clip >= 0.0)) throw ConfigError("gradient clip must be non-negative");
}

// Descends along the supplied gradients. Adam moments are bound to the
// network shape on first use.
class Optimizer {
  public:
    explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) { validate(cfg_); }

    const OptimizerConfig& config() const { return cfg_; }
    long steps() const { return t_; }

    void apply(Mlp& net, const Gradients& grads) {
        if (grads.layers.size() != net.layers().size()) throw DimensionError("gradient layer count");
        double scale = 1.0;
        if (cfg_.grad_clip > 0.0) {
            const double n = std::sqrt(grads.squared_norm());
            if (n > cfg_.grad_clip) scale = cfg_.grad_clip / n;
        }
        ++t_;
        const double lr = cfg_.learning_rate;
        if (cfg_.kind == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < grads.layers.size(); ++i) {
                net.layers()[i].w -= lr * scale * grads.layers[i].w;
                net.layers()[i].b -= lr * scale * grads.layers[i].b;
            }
            return;
        }
        if (!m_) {
            m_ = net.zero_gradients();
            v_ = net.zero_gradients();
        }
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < grads.layers.size(); ++i) {
            update(net.layers()[i].w, m_->layers[i].w, v_->layers[i].w, grads.layers[i].w, scale, c1, c2);
            update(net.layers()[i].b, m_->layers[i].b, v_->layers[i].b, grads.layers[i].b, scale, c1, c2);
        }
    }

  private:
    template <class P, class G>
    void update(P& p, P& m, P& v, const G& g, double scale, double c1, double c2) {
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * scale * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * (scale * g).cwiseAbs2();
        p.array() -= cfg_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.epsilon);
    }

    OptimizerConfig cfg_;
    std::optional<Gradients> m_;
    std::optional<Gradients> v_;
    long t_ = 0;
};

inline void apply_update(Mlp& net, const Gradients& grads, Optimizer& opt) { opt.apply(net, grads); }

}  // namespace gridsim::nn
