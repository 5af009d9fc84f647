#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gridsim/nn/mlp.hpp"

namespace gridsim::nn {

struct GradCheckResult {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
    std::size_t kinks_skipped = 0;  // probes that crossed a ReLU kink
};

// Sign pattern of every hidden ReLU pre-activation; empty for tanh.
inline std::vector<bool> relu_pattern(const Mlp& net, const Eigen::VectorXd& x) {
    std::vector<bool> out;
    if (net.activation() != Activation::relu) return out;
    Eigen::VectorXd h = x;
    const auto& ls = net.layers();
    for (std::size_t i = 0; i + 1 < ls.size(); ++i) {
        h = ls[i].w * h + ls[i].b;
        for (Eigen::Index j = 0; j < h.size(); ++j) out.push_back(h[j] > 0.0);
        h = h.cwiseMax(0.0);
    }
    return out;
}

// Compares backward() against central differences of dot(forward(x), upstream)
// over every parameter. Relative error uses max(|analytic|, |numeric|, floor).
// For ReLU nets a parameter whose +-h probe flips any unit on or off has no
// valid central difference; it is counted in kinks_skipped instead.
inline GradCheckResult gradient_check(const Mlp& net, const Eigen::VectorXd& x, const Eigen::VectorXd& upstream,
                                      double h = 1e-5, double floor = 1e-6) {
    const Eigen::VectorXd analytic = Mlp::flatten(net.backward(x, upstream));
    Mlp probe = net;
    Eigen::VectorXd p = net.parameters();
    GradCheckResult r;
    const auto pattern = relu_pattern(net, x);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double keep = p[i];
        p[i] = keep + h;
        probe.set_parameters(p);
        const double fp = probe.forward(x).dot(upstream);
        bool kink = relu_pattern(probe, x) != pattern;
        p[i] = keep - h;
        probe.set_parameters(p);
        const double fm = probe.forward(x).dot(upstream);
        kink = kink || relu_pattern(probe, x) != pattern;
        p[i] = keep;
        if (kink) {
            ++r.kinks_skipped;
            continue;
        }
        ++r.checked;
        const double numeric = (fp - fm) / (2.0 * h);
        const double abs_err = std::abs(numeric - analytic[i]);
        const double rel = abs_err / std::max({std::abs(numeric), std::abs(analytic[i]), floor});
        r.max_abs_error = std::max(r.max_abs_error, abs_err);
        if (rel > r.max_rel_error) {
            r.max_rel_error = rel;
            r.worst_index = static_cast<std::size_t>(i);
        }
    }
    return r;
}

}  // namespace gridsim::nn
