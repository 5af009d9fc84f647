#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gridsim/core/errors.hpp"
#include "gridsim/grid/network.hpp"
#include "gridsim/grid/ybus.hpp"

namespace gridsim::grid {

struct PowerFlowOptions {
    double tolerance = 1e-10;
    int max_iter = 50;
};

struct PowerFlowSolution {
    Eigen::VectorXd v_mag;
    Eigen::VectorXd v_ang;
    int iterations = 0;
    double max_mismatch = std::numeric_limits<double>::infinity();
    bool converged = false;
};

struct Injections {
    Eigen::VectorXd p;
    Eigen::VectorXd q;
};

// Complex power injected at every bus for the given voltage profile.
inline Injections power_injection(const Eigen::VectorXd& v_mag, const Eigen::VectorXd& v_ang,
                                  const AdmittanceMatrix& y) {
    const auto n = static_cast<Eigen::Index>(y.size());
    if (v_mag.size() != n || v_ang.size() != n || y.b.rows() != n || y.b.cols() != n)
        throw DimensionError("power_injection: vector lengths must equal the bus count");

    Injections s{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        double p = 0.0;
        double q = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double g = y.g(i, j);
            const double b = y.b(i, j);
            if (g == 0.0 && b == 0.0) continue;
            const double t = v_ang[i] - v_ang[j];
            const double c = std::cos(t);
            const double sn = std::sin(t);
            p += v_mag[j] * (g * c + b * sn);
            q += v_mag[j] * (g * sn - b * c);
        }
        s.p[i] = v_mag[i] * p;
        s.q[i] = v_mag[i] * q;
    }
    return s;
}

// Newton-Raphson in polar coordinates. Buses flagged in `fixed` have both
// magnitude and angle pinned (the slack, or machine internal nodes); every
// other bus is PQ with net injection (p_spec, q_spec). Starts flat.
inline PowerFlowSolution solve_newton(const AdmittanceMatrix& y, const Eigen::VectorXd& p_spec,
                                      const Eigen::VectorXd& q_spec, const std::vector<bool>& fixed,
                                      const Eigen::VectorXd& v_fixed,
                                      const Eigen::VectorXd& ang_fixed,
                                      const PowerFlowOptions& opts = {}) {
    const auto n = static_cast<Eigen::Index>(y.size());
    if (p_spec.size() != n || q_spec.size() != n || static_cast<Eigen::Index>(fixed.size()) != n ||
        v_fixed.size() != n || ang_fixed.size() != n)
        throw DimensionError("solve_newton: input sizes must equal the bus count");

    std::vector<Eigen::Index> pq;
    pq.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        if (!fixed[static_cast<std::size_t>(i)]) pq.push_back(i);
    const auto m = static_cast<Eigen::Index>(pq.size());

    PowerFlowSolution sol;
    sol.v_mag = Eigen::VectorXd::Ones(n);
    sol.v_ang = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (fixed[static_cast<std::size_t>(i)]) {
            sol.v_mag[i] = v_fixed[i];
            sol.v_ang[i] = ang_fixed[i];
        }
    }

    Eigen::VectorXd mismatch(2 * m);
    Eigen::MatrixXd jac(2 * m, 2 * m);
    for (int iter = 0;; ++iter) {
        const auto s = power_injection(sol.v_mag, sol.v_ang, y);
        double worst = 0.0;
        for (Eigen::Index k = 0; k < m; ++k) {
            const auto i = pq[static_cast<std::size_t>(k)];
            mismatch[k] = p_spec[i] - s.p[i];
            mismatch[m + k] = q_spec[i] - s.q[i];
            worst = std::max({worst, std::abs(mismatch[k]), std::abs(mismatch[m + k])});
        }
        if (!std::isfinite(worst)) worst = std::numeric_limits<double>::infinity();
        sol.max_mismatch = worst;
        sol.iterations = iter;
        if (worst <= opts.tolerance) {
            sol.converged = true;
            return sol;
        }
        if (iter >= opts.max_iter || !std::isfinite(worst)) return sol;

        for (Eigen::Index r = 0; r < m; ++r) {
            const auto i = pq[static_cast<std::size_t>(r)];
            const double vi = sol.v_mag[i];
            for (Eigen::Index c = 0; c < m; ++c) {
                const auto j = pq[static_cast<std::size_t>(c)];
                if (i == j) {
                    const double gii = y.g(i, i);
                    const double bii = y.b(i, i);
                    jac(r, c) = -s.q[i] - bii * vi * vi;
                    jac(r, m + c) = s.p[i] / vi + gii * vi;
                    jac(m + r, c) = s.p[i] - gii * vi * vi;
                    jac(m + r, m + c) = s.q[i] / vi - bii * vi;
                    continue;
                }
                const double g = y.g(i, j);
                const double b = y.b(i, j);
                if (g == 0.0 && b == 0.0) {
                    jac(r, c) = jac(r, m + c) = jac(m + r, c) = jac(m + r, m + c) = 0.0;
                    continue;
                }
                const double t = sol.v_ang[i] - sol.v_ang[j];
                const double ct = std::cos(t);
                const double st = std::sin(t);
                const double vj = sol.v_mag[j];
                jac(r, c) = vi * vj * (g * st - b * ct);
                jac(r, m + c) = vi * (g * ct + b * st);
                jac(m + r, c) = -vi * vj * (g * ct + b * st);
                jac(m + r, m + c) = vi * (g * st - b * ct);
            }
        }

        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        const auto diag = lu.matrixLU().diagonal().cwiseAbs();
        const double scale = diag.maxCoeff();
        if (!(scale > 0.0) || !std::isfinite(scale) || diag.minCoeff() <= 1e-13 * scale)
            throw SingularJacobianError("power-flow Jacobian is singular");
        const Eigen::VectorXd dx = lu.solve(mismatch);

        for (Eigen::Index k = 0; k < m; ++k) {
            const auto i = pq[static_cast<std::size_t>(k)];
            sol.v_ang[i] += dx[k];
            sol.v_mag[i] += dx[m + k];
        }
    }
}

// Net scheduled injection vectors (generation minus load) of a network.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> scheduled_injections(const NetworkModel& net) {
    const auto n = static_cast<Eigen::Index>(net.size());
    Eigen::VectorXd p(n), q(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& b = net.buses[static_cast<std::size_t>(i)];
        p[i] = b.p_gen - b.p_load;
        q[i] = b.q_gen - b.q_load;
    }
    return {p, q};
}

inline PowerFlowSolution solve_power_flow(const NetworkModel& net, const AdmittanceMatrix& y,
                                          const PowerFlowOptions& opts = {}) {
    const auto n = static_cast<Eigen::Index>(net.size());
    const auto slack = net.slack_index();
    std::vector<bool> fixed(net.size(), false);
    fixed[slack] = true;
    Eigen::VectorXd v_fixed = Eigen::VectorXd::Ones(n);
    v_fixed[static_cast<Eigen::Index>(slack)] = net.slack_voltage;
    const auto [p, q] = scheduled_injections(net);
    return solve_newton(y, p, q, fixed, v_fixed, Eigen::VectorXd::Zero(n), opts);
}

inline PowerFlowSolution solve_power_flow(const NetworkModel& net, const PowerFlowOptions& opts = {}) {
    return solve_power_flow(net, build_ybus(net.buses, net.lines), opts);
}

struct VoltageViolation {
    std::size_t bus = 0;  // 0-based index
    double magnitude = 0.0;
    double bound = 0.0;
};

inline std::vector<VoltageViolation> check_voltage_limits(const PowerFlowSolution& sol,
                                                          const std::vector<Bus>& buses) {
    if (static_cast<std::size_t>(sol.v_mag.size()) != buses.size())
        throw DimensionError("check_voltage_limits: solution and bus list differ in size");
    std::vector<VoltageViolation> out;
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const double v = sol.v_mag[static_cast<Eigen::Index>(i)];
        if (v < buses[i].v_min)
            out.push_back({i, v, buses[i].v_min});
        else if (v > buses[i].v_max)
            out.push_back({i, v, buses[i].v_max});
    }
    return out;
}

}  // namespace gridsim::grid
