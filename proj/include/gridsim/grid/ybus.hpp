#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "gridsim/core/errors.hpp"
#include "gridsim/grid/network.hpp"

namespace gridsim::grid {

// Bus admittance matrix split into conductance and susceptance parts.
struct AdmittanceMatrix {
    Eigen::MatrixXd g;
    Eigen::MatrixXd b;

    std::size_t size() const { return static_cast<std::size_t>(g.rows()); }
};

// Y[i][j] = -1/z_ij for every line, Y[i][i] = sum of incident line
// admittances. No shunt elements.
inline AdmittanceMatrix build_ybus(std::size_t n_buses, const std::vector<Line>& lines) {
    for (const auto& l : lines) validate_line(l, n_buses);
    if (!is_connected(n_buses, lines)) throw TopologyError("network is disconnected");

    const auto n = static_cast<Eigen::Index>(n_buses);
    AdmittanceMatrix y{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
    for (const auto& l : lines) {
        const std::complex<double> ys = 1.0 / std::complex<double>(l.resistance, l.reactance);
        const auto i = static_cast<Eigen::Index>(l.from_bus);
        const auto j = static_cast<Eigen::Index>(l.to_bus);
        y.g(i, i) += ys.real();
        y.b(i, i) += ys.imag();
        y.g(j, j) += ys.real();
        y.b(j, j) += ys.imag();
        y.g(i, j) -= ys.real();
        y.b(i, j) -= ys.imag();
        y.g(j, i) -= ys.real();
        y.b(j, i) -= ys.imag();
    }
    return y;
}

inline AdmittanceMatrix build_ybus(const std::vector<Bus>& buses, const std::vector<Line>& lines) {
    return build_ybus(buses.size(), lines);
}

}  // namespace gridsim::grid
