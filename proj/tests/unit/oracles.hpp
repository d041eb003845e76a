#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerical code.

#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>
#include <unsupported/Eigen/MatrixFunctions>

namespace oracle {

// Two-state rate equation dN-/dt = -plus N- + minus N0 integrated with
// Boost's Dormand-Prince stepper at tight tolerance.
inline std::array<double, 2> two_state_ode(double plus, double minus, double dt, std::array<double, 2> y,
                                           double tol = 1e-14) {
    using namespace boost::numeric::odeint;
    auto rhs = [&](const std::array<double, 2>& x, std::array<double, 2>& dx, double) {
        const double f = -plus * x[0] + minus * x[1];
        dx[0] = f;
        dx[1] = -f;
    };
    if (dt == 0.0) return y;
    const double h0 = std::min(dt, 1e-3 / std::max(plus + minus, 1e-12));
    integrate_adaptive(make_controlled(tol, tol, runge_kutta_dopri5<std::array<double, 2>>()), rhs, y, 0.0, dt, h0);
    return y;
}

// exp(G dt) via Eigen's Pade matrix exponential.
inline Eigen::Matrix2d expm_generator(double plus, double minus, double dt) {
    Eigen::Matrix2d g;
    g << -plus, minus, plus, -minus;
    return (g * dt).exp();
}

inline Eigen::Matrix2d period_matrix(double nup, double num, double kp, double km, double delta, double period) {
    return expm_generator(kp, km, period - delta) * expm_generator(nup, num, delta);
}

// Unit-sum eigenvector for the eigenvalue closest to 1.
inline Eigen::Vector2d unit_eigenvector(const Eigen::Matrix2d& m) {
    Eigen::EigenSolver<Eigen::Matrix2d> es(m);
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < 2; ++i)
        if (std::abs(es.eigenvalues()(i) - 1.0) < std::abs(es.eigenvalues()(best) - 1.0)) best = i;
    Eigen::Vector2d v = es.eigenvectors().col(best).real();
    return v / v.sum();
}

inline double log_uniform(std::mt19937_64& g, double lo, double hi) {
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(g));
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// Plain CSV of doubles with one header line.
inline std::vector<std::vector<double>> read_numeric_csv(const std::string& path, std::vector<std::string>* header = nullptr) {
    std::ifstream in(path);
    std::string line;
    std::vector<std::vector<double>> rows;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (first) {
            first = false;
            if (header) {
                std::stringstream ss(line);
                std::string cell;
                while (std::getline(ss, cell, ',')) header->push_back(cell);
            }
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(row);
    }
    return rows;
}

} // namespace oracle
