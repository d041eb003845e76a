#pragma once

// Bounded nonlinear least squares: a Levenberg-Marquardt trust-region method
// with Marquardt diagonal scaling, an active-set treatment of box bounds and
// analytic or finite-difference Jacobians, plus deterministic multi-start.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "nvcharge/errors.hpp"

namespace nvcharge::lsq {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Problem {
    std::size_t n_params = 0;
    std::size_t n_residuals = 0;
    // r(p), already divided by the per-point uncertainty when one is known.
    std::function<void(const Vector& p, Vector& r)> residuals;
    // Optional d r / d p; finite differences are used when empty.
    std::function<void(const Vector& p, Matrix& jac)> jacobian;
    Vector lower; // empty -> unbounded
    Vector upper;
};

struct Options {
    std::size_t max_iterations = 1000;
    double gtol = 1e-14;     // projected gradient, relative to cost
    double xtol = 1e-15;     // relative step length
    double ftol = 1e-15;     // relative cost reduction
    double fd_rel_step = 1e-7;
    double initial_damping = 1e-3;
    // Multiply the covariance by chi2 / (m - n). Off when residuals carry
    // absolute uncertainties.
    bool scale_covariance = true;
};

struct Result {
    Vector params;
    Vector std_errors;
    Matrix covariance;
    Vector residuals;
    double chi2 = 0.0; // sum of squared residuals
    std::size_t iterations = 0;
    bool converged = false;
    std::string message;
};

namespace detail {

inline Vector bound_or(const Vector& v, std::size_t n, double fill) {
    return v.size() == 0 ? Vector::Constant(static_cast<Eigen::Index>(n), fill) : v;
}

inline void fd_jacobian(const Problem& prob, const Vector& p, const Vector& r0, const Vector& lo, const Vector& hi,
                        double rel, Matrix& jac) {
    const auto n = static_cast<Eigen::Index>(prob.n_params);
    jac.resize(r0.size(), n);
    Vector rp(r0.size()), rm(r0.size());
    for (Eigen::Index j = 0; j < n; ++j) {
        const double h = rel * std::max(std::abs(p(j)), 1e-8);
        Vector pp = p, pm = p;
        const bool up_ok = p(j) + h <= hi(j);
        const bool dn_ok = p(j) - h >= lo(j);
        if (up_ok && dn_ok) {
            pp(j) += h;
            pm(j) -= h;
            prob.residuals(pp, rp);
            prob.residuals(pm, rm);
            jac.col(j) = (rp - rm) / (2.0 * h);
        } else if (up_ok) {
            pp(j) += h;
            prob.residuals(pp, rp);
            jac.col(j) = (rp - r0) / h;
        } else {
            pm(j) -= h;
            prob.residuals(pm, rm);
            jac.col(j) = (r0 - rm) / h;
        }
    }
}

} // namespace detail

inline void evaluate_jacobian(const Problem& prob, const Vector& p, const Vector& r, Matrix& jac,
                              const Options& opt = {}) {
    const auto n = prob.n_params;
    if (prob.jacobian) {
        jac.resize(r.size(), static_cast<Eigen::Index>(n));
        prob.jacobian(p, jac);
    } else {
        detail::fd_jacobian(prob, p, r, detail::bound_or(prob.lower, n, -std::numeric_limits<double>::infinity()),
                            detail::bound_or(prob.upper, n, std::numeric_limits<double>::infinity()),
                            opt.fd_rel_step, jac);
    }
}

// Pseudo-inverse of J^T J from an SVD of J; directions with singular values
// below 1e-12 of the largest are dropped.
inline Matrix covariance_from_jacobian(const Matrix& jac) {
    Eigen::JacobiSVD<Matrix> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector s = svd.singularValues();
    const double cutoff = s.size() ? 1e-12 * s(0) : 0.0;
    Vector inv2 = Vector::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cutoff) inv2(i) = 1.0 / (s(i) * s(i));
    return svd.matrixV() * inv2.asDiagonal() * svd.matrixV().transpose();
}

inline Result solve(const Problem& prob, const Vector& start, const Options& opt = {}) {
    const auto n = static_cast<Eigen::Index>(prob.n_params);
    const auto m = static_cast<Eigen::Index>(prob.n_residuals);
    if (start.size() != n) throw DomainError("lsq::solve: start vector has the wrong size");
    if (m < n) throw DomainError("lsq::solve: fewer residuals than parameters");

    const Vector lo = detail::bound_or(prob.lower, prob.n_params, -std::numeric_limits<double>::infinity());
    const Vector hi = detail::bound_or(prob.upper, prob.n_params, std::numeric_limits<double>::infinity());
    Vector p = start.cwiseMax(lo).cwiseMin(hi);

    Vector r(m);
    prob.residuals(p, r);
    double cost = r.squaredNorm();
    if (!std::isfinite(cost)) throw DomainError("lsq::solve: residuals are not finite at the start point");

    Matrix jac;
    evaluate_jacobian(prob, p, r, jac, opt);

    double mu = -1.0;
    double nu = 2.0;
    Result res;
    std::size_t iter = 0;
    std::size_t small_steps = 0;
    for (; iter < opt.max_iterations; ++iter) {
        const Vector grad = jac.transpose() * r;
        Matrix jtj = jac.transpose() * jac;

        // Active set: variables pinned at a bound with the gradient pushing outward.
        std::vector<Eigen::Index> free;
        for (Eigen::Index j = 0; j < n; ++j) {
            const bool at_lo = p(j) <= lo(j) && grad(j) > 0.0;
            const bool at_hi = p(j) >= hi(j) && grad(j) < 0.0;
            if (!at_lo && !at_hi) free.push_back(j);
        }
        double proj_grad = 0.0;
        for (auto j : free) proj_grad = std::max(proj_grad, std::abs(grad(j)) * std::max(std::abs(p(j)), 1.0));
        if (cost == 0.0 || proj_grad <= opt.gtol * std::max(cost, 1e-300)) {
            res.converged = true;
            res.message = cost == 0.0 ? "zero residual" : "gradient tolerance reached";
            break;
        }
        if (free.empty()) {
            res.converged = true;
            res.message = "all parameters at active bounds";
            break;
        }

        const auto k = static_cast<Eigen::Index>(free.size());
        Matrix a(k, k);
        Vector g(k), diag(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            g(i) = grad(free[static_cast<std::size_t>(i)]);
            for (Eigen::Index j = 0; j < k; ++j)
                a(i, j) = jtj(free[static_cast<std::size_t>(i)], free[static_cast<std::size_t>(j)]);
            diag(i) = std::max(a(i, i), 1e-300);
        }
        if (mu < 0.0) mu = opt.initial_damping;

        bool accepted = false;
        for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
            Matrix damped = a;
            for (Eigen::Index i = 0; i < k; ++i) damped(i, i) += mu * diag(i);
            const Vector step_free = damped.ldlt().solve(-g);
            Vector p_new = p;
            for (Eigen::Index i = 0; i < k; ++i) p_new(free[static_cast<std::size_t>(i)]) += step_free(i);
            p_new = p_new.cwiseMax(lo).cwiseMin(hi);
            const Vector step = p_new - p;

            Vector r_new(m);
            prob.residuals(p_new, r_new);
            const double cost_new = r_new.squaredNorm();
            // Predicted reduction of the Gauss-Newton model for the projected step.
            const double predicted = -(2.0 * grad.dot(step) + (jac * step).squaredNorm());
            const double rho = predicted > 0.0 ? (cost - cost_new) / predicted : -1.0;

            const double step_norm = step.norm();
            const bool tiny_step = step_norm <= opt.xtol * (p.norm() + opt.xtol);
            if (std::isfinite(cost_new) && cost_new <= cost && (rho > 0.0 || (cost_new == cost && tiny_step))) {
                const double rel_reduction = (cost - cost_new) / std::max(cost, 1e-300);
                p = p_new;
                r = r_new;
                cost = cost_new;
                evaluate_jacobian(prob, p, r, jac, opt);
                mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
                nu = 2.0;
                accepted = true;
                small_steps = (rel_reduction <= opt.ftol || tiny_step) ? small_steps + 1 : 0;
            } else {
                mu *= nu;
                nu *= 2.0;
                if (tiny_step && attempt > 10) break;
            }
        }
        if (!accepted) {
            res.converged = true;
            res.message = "no further reduction possible";
            break;
        }
        if (small_steps >= 3) {
            res.converged = true;
            res.message = "cost and step tolerances reached";
            break;
        }
    }
    if (iter >= opt.max_iterations) res.message = "iteration limit reached";

    res.params = p;
    res.residuals = r;
    res.chi2 = cost;
    res.iterations = iter;
    res.covariance = covariance_from_jacobian(jac);
    if (opt.scale_covariance && m > n) res.covariance *= cost / static_cast<double>(m - n);
    res.std_errors = res.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    return res;
}

// Runs `solve` from every start and keeps the lowest chi2 among converged
// runs, breaking ties by start order. Throws ConvergenceError with the best
// iterate when no start converges.
inline Result solve_multistart(const Problem& prob, const std::vector<Vector>& starts, const Options& opt = {}) {
    if (starts.empty()) throw DomainError("lsq::solve_multistart: no start points");
    Result best;
    bool have = false;
    Result best_any;
    bool have_any = false;
    for (const Vector& s : starts) {
        Result r;
        try {
            r = solve(prob, s, opt);
        } catch (const DomainError&) {
            continue;
        }
        if (!std::isfinite(r.chi2)) continue;
        if (!have_any || r.chi2 < best_any.chi2) {
            best_any = r;
            have_any = true;
        }
        if (r.converged && (!have || r.chi2 < best.chi2)) {
            best = std::move(r);
            have = true;
        }
    }
    if (!have) {
        std::vector<double> last;
        double rn = std::numeric_limits<double>::quiet_NaN();
        if (have_any) {
            last.assign(best_any.params.data(), best_any.params.data() + best_any.params.size());
            rn = std::sqrt(best_any.chi2);
        }
        throw ConvergenceError("least squares did not converge from any start", std::move(last), rn);
    }
    return best;
}

} // namespace nvcharge::lsq
