#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridsim/core/errors.hpp"
#include "gridsim/core/random.hpp"

namespace gridsim::market {

// Storage attached to a prosumer for horizon scheduling. Energies in kWh,
// powers in kW, wear in cost per kW^2 per interval.
struct StorageLink {
    double e_max = 1.0;
    double p_max = 1.0;
    double soc = 0.5;
    double soc_min = 0.0;
    double soc_max = 1.0;
    double eta_charge = 1.0;
    double eta_discharge = 1.0;
    double wear = 1.0;
    std::optional<double> terminal_soc_min;
};

// Cost c(P) = a P^2 + wear P^2 + comfort (P - comfort_ref)^2 on the net
// export P in [p_min, p_max]. The last two terms default to off.
struct ProsumerAgent {
    double a = 1.0;
    double p_min = -10.0;
    double p_max = 10.0;
    double wear = 0.0;
    double comfort = 0.0;
    double comfort_ref = 0.0;
    std::optional<StorageLink> battery;

    static ProsumerAgent with_limits(double a, double load_max, double gen_max) {
        ProsumerAgent p;
        p.a = a;
        p.p_min = -load_max;
        p.p_max = gen_max;
        return p;
    }
};

inline void validate(const StorageLink& s) {
    if (!(s.e_max > 0.0 && s.p_max >= 0.0 && s.wear > 0.0)) throw ConfigError("storage link needs positive capacity and wear");
    if (!(s.soc_min <= s.soc && s.soc <= s.soc_max)) throw ConfigError("storage link SOC outside its limits");
    if (!(s.eta_charge > 0.0 && s.eta_charge <= 1.0 && s.eta_discharge > 0.0 && s.eta_discharge <= 1.0))
        throw ConfigError("storage link efficiencies must lie in (0, 1]");
}

inline void validate(const ProsumerAgent& p) {
    if (!(p.a > 0.0)) throw ConfigError("prosumer disutility must be strictly convex (a > 0)");
    if (!(p.p_min <= p.p_max)) throw ConfigError("prosumer bounds out of order");
    if (!(p.wear >= 0.0 && p.comfort >= 0.0)) throw ConfigError("optional prosumer cost terms must be non-negative");
    if (p.battery) validate(*p.battery);
}

inline double disutility(const ProsumerAgent& p, double x) {
    const double d = x - p.comfort_ref;
    return (p.a + p.wear) * x * x + p.comfort * d * d;
}

// U = lambda P - c(P).
inline double utility(const ProsumerAgent& p, double x, double price) { return price * x - disutility(p, x); }

inline double prosumer_best_response(const ProsumerAgent& p, double price) {
    validate(p);
    const double x = (price + 2.0 * p.comfort * p.comfort_ref) / (2.0 * (p.a + p.wear + p.comfort));
    return std::clamp(x, p.p_min, p.p_max);
}

struct MpcSchedule {
    std::vector<double> export_kw;  // net export per step, production - charge + discharge
    std::vector<double> production;
    std::vector<double> charge;
    std::vector<double> discharge;
    std::vector<double> soc;  // after each step
    int iterations = 0;
    double stationarity = 0.0;
};

class MpcNotConverged : public std::runtime_error {
  public:
    MpcNotConverged(const std::string& what, MpcSchedule last) : std::runtime_error(what), last_(std::move(last)) {}
    const MpcSchedule& last_iterate() const { return last_; }

  private:
    MpcSchedule last_;
};

namespace detail {

struct HalfSpace {
    std::vector<double> g;
    double h = 0.0;  // g . z <= h
};

// Dykstra's alternating projection onto a box intersected with half-spaces.
inline std::vector<double> project(const std::vector<double>& z0, const std::vector<double>& lo, const std::vector<double>& hi,
                                   const std::vector<HalfSpace>& hs, int max_sweeps = 20000, double tol = 1e-14) {
    const std::size_t n = z0.size(), m = hs.size() + 1;
    std::vector<double> x = z0;
    std::vector<std::vector<double>> inc(m, std::vector<double>(n, 0.0));
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double change = 0.0;
        for (std::size_t s = 0; s < m; ++s) {
            std::vector<double> y(n);
            for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + inc[s][i];
            std::vector<double> px = y;
            if (s == 0) {
                for (std::size_t i = 0; i < n; ++i) px[i] = std::clamp(y[i], lo[i], hi[i]);
            } else {
                const auto& H = hs[s - 1];
                double gy = 0.0, gg = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    gy += H.g[i] * y[i];
                    gg += H.g[i] * H.g[i];
                }
                if (gy > H.h && gg > 0.0)
                    for (std::size_t i = 0; i < n; ++i) px[i] = y[i] - (gy - H.h) / gg * H.g[i];
            }
            for (std::size_t i = 0; i < n; ++i) {
                inc[s][i] = y[i] - px[i];
                change = std::max(change, std::abs(px[i] - x[i]));
                x[i] = px[i];
            }
        }
        if (change < tol) break;
    }
    return x;
}

}  // namespace detail

// Horizon schedule. Without storage the problem separates into per-step best
// responses. With storage, the charge/discharge powers are found by projected
// gradient descent on the strictly convex wear-plus-price objective subject to
// power limits and SOC bounds after every step.
inline MpcSchedule mpc_schedule(const ProsumerAgent& p, const std::vector<double>& prices, std::size_t horizon,
                                double dt_h = 1.0, int max_iter = 10000, double tol = 1e-6) {
    validate(p);
    if (horizon < 1) throw DomainError("mpc_schedule: horizon must be at least 1");
    if (prices.size() < horizon) throw DimensionError("mpc_schedule: fewer prices than the horizon");
    if (!(dt_h > 0.0)) throw DomainError("mpc_schedule: dt must be positive");
    const std::size_t N = horizon;
    MpcSchedule out;
    for (std::size_t t = 0; t < N; ++t) out.production.push_back(prosumer_best_response(p, prices[t]));
    out.charge.assign(N, 0.0);
    out.discharge.assign(N, 0.0);

    if (p.battery) {
        const auto& b = *p.battery;
        // z = [c_0..c_{N-1}, d_0..d_{N-1}]
        std::vector<double> lo(2 * N, 0.0), hi(2 * N, b.p_max);
        std::vector<detail::HalfSpace> hs;
        const double kc = b.eta_charge * dt_h / b.e_max, kd = dt_h / (b.eta_discharge * b.e_max);
        for (std::size_t t = 1; t <= N; ++t) {
            detail::HalfSpace up{std::vector<double>(2 * N, 0.0), b.soc_max - b.soc};
            for (std::size_t s = 0; s < t; ++s) {
                up.g[s] = kc;
                up.g[N + s] = -kd;
            }
            detail::HalfSpace down{up.g, b.soc - b.soc_min};
            for (double& v : down.g) v = -v;
            hs.push_back(up);
            hs.push_back(down);
            if (t == N && b.terminal_soc_min) {
                detail::HalfSpace term{down.g, b.soc - *b.terminal_soc_min};
                hs.push_back(term);
            }
        }
        // f(z) = sum w (c^2 + d^2) + lambda_t (c_t - d_t)
        auto grad = [&](const std::vector<double>& z) {
            std::vector<double> g(2 * N);
            for (std::size_t t = 0; t < N; ++t) {
                g[t] = 2.0 * b.wear * z[t] + prices[t];
                g[N + t] = 2.0 * b.wear * z[N + t] - prices[t];
            }
            return g;
        };
        const double L = 2.0 * b.wear;
        std::vector<double> z = detail::project(std::vector<double>(2 * N, 0.0), lo, hi, hs);
        bool converged = false;
        for (int it = 1; it <= max_iter; ++it) {
            const auto g = grad(z);
            std::vector<double> y(2 * N);
            for (std::size_t i = 0; i < 2 * N; ++i) y[i] = z[i] - g[i] / L;
            const auto zn = detail::project(y, lo, hi, hs);
            double res = 0.0;
            for (std::size_t i = 0; i < 2 * N; ++i) res = std::max(res, L * std::abs(zn[i] - z[i]));
            z = zn;
            out.iterations = it;
            out.stationarity = res;
            if (res <= tol) {
                converged = true;
                break;
            }
        }
        for (std::size_t t = 0; t < N; ++t) {
            out.charge[t] = z[t];
            out.discharge[t] = z[N + t];
        }
        double soc = b.soc;
        for (std::size_t t = 0; t < N; ++t) {
            soc += kc * out.charge[t] - kd * out.discharge[t];
            out.soc.push_back(soc);
        }
        for (std::size_t t = 0; t < N; ++t) out.export_kw.push_back(out.production[t] - out.charge[t] + out.discharge[t]);
        if (!converged) throw MpcNotConverged("mpc_schedule: stationarity tolerance not reached", out);
        return out;
    }
    out.export_kw = out.production;
    return out;
}

// Objective value of a storage schedule (used for oracle comparisons).
inline double mpc_objective(const ProsumerAgent& p, const std::vector<double>& prices, const MpcSchedule& s) {
    double f = 0.0;
    for (std::size_t t = 0; t < s.production.size(); ++t) {
        f += disutility(p, s.production[t]) - prices[t] * s.export_kw[t];
        if (p.battery) f += p.battery->wear * (s.charge[t] * s.charge[t] + s.discharge[t] * s.discharge[t]);
    }
    return f;
}

// lambda = intercept - slope * aggregate net export.
struct LinearPrice {
    double intercept = 2.0;
    double slope = 1.0;
    double operator()(double total) const { return intercept - slope * total; }
};

enum class UpdateMode { gauss_seidel, jacobi };

struct MoveEvent {
    int round = 0;
    std::size_t agent = 0;
    double before = 0.0;
    double after = 0.0;
    double price = 0.0;  // price the mover responded to
};

struct GameState {
    std::vector<double> strategies;
    double price = 0.0;
    int rounds = 0;
    bool converged = false;
    double residual = 0.0;  // max |best response - strategy| at the final state
};

// Price-taking best-response dynamics: each agent best-responds to the price
// implied by the current aggregate. Stops when every agent already plays its
// best response to within `tol`.
inline GameState best_response_dynamics(const std::vector<ProsumerAgent>& agents,
                                        const std::function<double(double)>& price_fn, double tol = 1e-12,
                                        int max_rounds = 10000, UpdateMode mode = UpdateMode::gauss_seidel,
                                        std::vector<double> initial = {},
                                        const std::function<void(const MoveEvent&)>& on_move = {}) {
    for (const auto& a : agents) validate(a);
    GameState st;
    st.strategies = initial.empty() ? std::vector<double>(agents.size(), 0.0) : std::move(initial);
    if (st.strategies.size() != agents.size()) throw DimensionError("one initial strategy per agent");
    for (std::size_t i = 0; i < agents.size(); ++i)
        st.strategies[i] = std::clamp(st.strategies[i], agents[i].p_min, agents[i].p_max);
    auto total = [&] {
        double s = 0.0;
        for (double x : st.strategies) s += x;
        return s;
    };
    auto residual = [&] {
        const double lam = price_fn(total());
        double r = 0.0;
        for (std::size_t i = 0; i < agents.size(); ++i)
            r = std::max(r, std::abs(prosumer_best_response(agents[i], lam) - st.strategies[i]));
        return r;
    };
    for (st.rounds = 1; st.rounds <= max_rounds; ++st.rounds) {
        const double round_price = price_fn(total());
        std::vector<double> next = st.strategies;
        for (std::size_t i = 0; i < agents.size(); ++i) {
            const double lam = mode == UpdateMode::gauss_seidel ? price_fn(total()) : round_price;
            next[i] = prosumer_best_response(agents[i], lam);
            if (on_move) on_move({st.rounds, i, st.strategies[i], next[i], lam});
            if (mode == UpdateMode::gauss_seidel) st.strategies[i] = next[i];
        }
        st.strategies = next;
        st.residual = residual();
        if (st.residual < tol) {
            st.converged = true;
            break;
        }
    }
    if (!st.converged) st.rounds = max_rounds;
    st.price = price_fn(total());
    return st;
}

struct NashCheck {
    double max_gain = -std::numeric_limits<double>::infinity();  // best utility improvement found
    std::size_t samples = 0;
};

// Samples unilateral deviations within each agent's bounds and reports the
// largest utility gain at the equilibrium price.
inline NashCheck nash_check(const std::vector<ProsumerAgent>& agents, const GameState& st, Rng& rng,
                            std::size_t samples_per_agent = 1000) {
    NashCheck out;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const double base = utility(agents[i], st.strategies[i], st.price);
        for (std::size_t k = 0; k < samples_per_agent; ++k) {
            const double x = rng.uniform(agents[i].p_min, agents[i].p_max);
            out.max_gain = std::max(out.max_gain, utility(agents[i], x, st.price) - base);
            ++out.samples;
        }
    }
    return out;
}

}  // namespace gridsim::market
