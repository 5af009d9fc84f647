#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <vector>

#include "gridsim/core/bus_state.hpp"
#include "gridsim/core/errors.hpp"
#include "gridsim/core/random.hpp"

namespace gridsim::cyber {

inline constexpr int max_delay = 3;

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Mass of round(N(mean, sd)) clamped to {0, 1, 2, 3}.
inline std::array<double, max_delay + 1> truncated_gaussian_pmf(double mean = 1.0, double sd = 1.0) {
    std::array<double, max_delay + 1> p{};
    double prev = 0.0;
    for (int k = 0; k < max_delay; ++k) {
        const double c = normal_cdf((k + 0.5 - mean) / sd);
        p[static_cast<std::size_t>(k)] = c - prev;
        prev = c;
    }
    p[max_delay] = 1.0 - prev;
    return p;
}

struct ChannelConfig {
    std::array<double, max_delay + 1> delay_pmf = truncated_gaussian_pmf();
    double p_drop = 0.05;
    double sigma_v = 0.005;  // p.u.
    double sigma_f = 0.02;   // Hz
    double ms_per_step = 40.0;
    double min_ms = 20.0;
};

struct AttackWindow {
    long start = 0;
    long end = 0;  // exclusive
};

struct FdiConfig {
    bool enabled = true;
    double p_fdi = 0.04;
    double a_v_min = -0.03;
    double a_v_max = 0.03;
    double a_f_min = -0.15;
    double a_f_max = 0.18;
    std::vector<AttackWindow> windows;
    double severity = 1.0;
};

inline void validate(const ChannelConfig& c) {
    double sum = 0.0;
    for (double p : c.delay_pmf) {
        if (!(p >= 0.0)) throw ConfigError("delay probabilities must be non-negative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("delay probabilities must sum to 1");
    if (!(c.p_drop >= 0.0 && c.p_drop <= 1.0)) throw ConfigError("drop probability out of range");
    if (!(c.sigma_v >= 0.0 && c.sigma_f >= 0.0)) throw ConfigError("noise sigmas must be non-negative");
}

inline void validate(const FdiConfig& f) {
    if (!(f.p_fdi >= 0.0 && f.p_fdi <= 1.0)) throw ConfigError("FDI probability out of range");
    if (!(f.a_v_min <= f.a_v_max && f.a_f_min <= f.a_f_max)) throw ConfigError("FDI ranges out of order");
    for (std::size_t i = 0; i < f.windows.size(); ++i) {
        if (!(f.windows[i].start < f.windows[i].end)) throw ConfigError("empty attack window");
        if (i > 0 && f.windows[i].start < f.windows[i - 1].end)
            throw ConfigError("attack windows must be sorted and non-overlapping");
    }
}

inline bool window_active(const FdiConfig& f, long step) {
    if (!f.enabled) return false;
    for (const auto& w : f.windows)
        if (step >= w.start && step < w.end) return true;
    return false;
}

// Random bursts: each step outside a window opens a new one with
// probability expected_count / steps.
inline std::vector<AttackWindow> random_attack_windows(long steps, double expected_count, long length, Rng& rng) {
    std::vector<AttackWindow> out;
    if (steps <= 0 || length <= 0 || expected_count <= 0.0) return out;
    const double rate = expected_count / static_cast<double>(steps);
    for (long k = 0; k < steps; ++k) {
        if (rng.bernoulli(rate) && k + length <= steps) {
            out.push_back({k, k + length});
            k += length - 1;
        }
    }
    return out;
}

inline int sample_delay(const ChannelConfig& c, double u) {
    double acc = 0.0;
    for (int k = 0; k < max_delay; ++k) {
        acc += c.delay_pmf[static_cast<std::size_t>(k)];
        if (u < acc) return k;
    }
    return max_delay;
}

inline double delay_ms(const ChannelConfig& c, int tau) {
    return std::max(c.min_ms, c.ms_per_step * tau);
}

struct Observation {
    BusState state;
    int delay_applied = 0;
    bool dropped = false;
    bool fdi_active = false;
    double fdi_severity = 0.0;
    double measurement_error = 0.0;  // signed voltage noise, p.u.
    double a_v = 0.0;
    double a_f = 0.0;
};

// Most recent true states of one bus; at(0) is the newest.
class StateHistory {
  public:
    explicit StateHistory(const BusState& initial, std::size_t capacity = max_delay + 1)
        : buf_(std::max<std::size_t>(capacity, 1), initial) {}

    void push(const BusState& s) {
        buf_.pop_back();
        buf_.push_front(s);
    }

    const BusState& at(std::size_t lag) const { return buf_.at(std::min(lag, buf_.size() - 1)); }
    std::size_t capacity() const { return buf_.size(); }

  private:
    std::deque<BusState> buf_;
};

// One channel use. Consumes nine uniforms regardless of the outcome, so that
// toggling disturbances keeps every other random stream aligned.
inline Observation observe(const ChannelConfig& cfg, const FdiConfig& fdi, const StateHistory& history, long step,
                           Rng& rng, const Observation& last_delivered) {
    const bool drop = rng.bernoulli(cfg.p_drop);
    const int tau = sample_delay(cfg, rng.uniform());
    const double nv = rng.normal(0.0, cfg.sigma_v);
    const double nf = rng.normal(0.0, cfg.sigma_f);
    const bool fire = rng.bernoulli(fdi.p_fdi);
    const double av = rng.uniform(fdi.a_v_min, fdi.a_v_max);
    const double af = rng.uniform(fdi.a_f_min, fdi.a_f_max);

    if (drop) {
        Observation o = last_delivered;
        o.dropped = true;
        o.delay_applied = tau;
        o.fdi_active = false;
        o.fdi_severity = 0.0;
        o.measurement_error = 0.0;
        o.a_v = o.a_f = 0.0;
        return o;
    }
    Observation o;
    o.delay_applied = tau;
    o.state = history.at(static_cast<std::size_t>(tau));
    o.state.v += nv;
    o.state.freq += nf;
    o.measurement_error = nv;
    if (fire && window_active(fdi, step)) {
        o.fdi_active = true;
        o.a_v = av;
        o.a_f = af;
        o.state.v += av;
        o.state.freq += af;
        const double sv = std::max(std::abs(fdi.a_v_min), std::abs(fdi.a_v_max));
        const double sf = std::max(std::abs(fdi.a_f_min), std::abs(fdi.a_f_max));
        const double mag = 0.5 * ((sv > 0.0 ? std::abs(av) / sv : 0.0) + (sf > 0.0 ? std::abs(af) / sf : 0.0));
        o.fdi_severity = fdi.severity * mag;
    }
    return o;
}

// Trailing-window empirical drop rate.
class DropTracker {
  public:
    explicit DropTracker(std::size_t window = 100) : window_(std::max<std::size_t>(window, 1)) {}

    void record(bool dropped) {
        flags_.push_back(dropped);
        count_ += dropped ? 1 : 0;
        if (flags_.size() > window_) {
            count_ -= flags_.front() ? 1 : 0;
            flags_.pop_front();
        }
    }

    double rate() const { return flags_.empty() ? 0.0 : static_cast<double>(count_) / static_cast<double>(flags_.size()); }

  private:
    std::size_t window_;
    std::deque<bool> flags_;
    std::size_t count_ = 0;
};

// Per-bus channel: history, last delivered observation, drop statistics.
class BusChannel {
  public:
    BusChannel(const BusState& initial, std::size_t history = max_delay + 1, std::size_t loss_window = 100)
        : history_(initial, history), drops_(loss_window) {
        last_.state = initial;
    }

    void push(const BusState& s) { history_.push(s); }

    Observation observe(const ChannelConfig& cfg, const FdiConfig& fdi, long step, Rng& rng) {
        auto o = cyber::observe(cfg, fdi, history_, step, rng, last_);
        drops_.record(o.dropped);
        if (!o.dropped) last_ = o;
        return o;
    }

    const StateHistory& history() const { return history_; }
    double loss_rate() const { return drops_.rate(); }

  private:
    StateHistory history_;
    Observation last_;
    DropTracker drops_;
};

// Edge sees the corrupted observation immediately; the cloud sees the clean
// state `cloud_latency` steps late.
inline std::pair<BusState, BusState> edge_cloud_views(const StateHistory& history, const Observation& obs,
                                                      std::size_t cloud_latency = 2) {
    return {obs.state, history.at(cloud_latency)};
}

}  // namespace gridsim::cyber
