#pragma once

// Fits of measured population ratios against repetition rate and probe power.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "nvcharge/errors.hpp"
#include "nvcharge/fit_result.hpp"
#include "nvcharge/lsq.hpp"
#include "nvcharge/rng.hpp"

namespace nvcharge::kinetics {

struct SweepPoint {
    double x = 0.0;
    double y = 0.0;
    double y_err = std::numeric_limits<double>::quiet_NaN(); // NaN when absent
};

struct SweepFitOptions {
    std::uint64_t seed = 1;
    std::size_t random_starts = 8;
    // Ridge weight on the power-sweep coefficients B..E; selects the
    // minimum-norm member of exactly degenerate solution families.
    double ridge = 1e-10;
    lsq::Options solver{};
};

namespace detail {

inline bool all_have_errors(std::span<const SweepPoint> pts) {
    return !pts.empty() && std::all_of(pts.begin(), pts.end(), [](const SweepPoint& p) {
        return std::isfinite(p.y_err) && p.y_err > 0.0;
    });
}

inline double log_uniform(rng::CounterRng& g, double lo, double hi) {
    return std::exp(g.uniform(std::log(lo), std::log(hi)));
}

// Minimum-norm linear least squares via complete orthogonal decomposition.
inline Eigen::VectorXd min_norm_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    return a.completeOrthogonalDecomposition().solve(b);
}

} // namespace detail

// (A + 1/r) / (B + C/r)
inline double repetition_model(double rate, double a, double b, double c) {
    const double u = 1.0 / rate;
    return (a + u) / (b + c * u);
}

struct RepSweepFit {
    FitResult fit;        // parameters A, B, C
    double delta = 0.0;   // pump pulse length used to convert A, B into rates [s]
    double duv_minus_rel = 0.0;  // Gamma_DUV- / gamma_eff- = A / delta
    double duv_plus_rel = 0.0;   // Gamma_DUV+ / gamma_eff- = B / delta
    double gamma_plus_rel = 0.0; // gamma_eff+ / gamma_eff- = C
    double duv_minus_rel_err = 0.0;
    double duv_plus_rel_err = 0.0;
    double gamma_plus_rel_err = 0.0;
    std::size_t excluded_zero_rate = 0;
    // Mean ratio at r = 0 (pump off) next to the model limit 1/C.
    std::optional<double> zero_rate_mean;
    double off_limit = 0.0;
};

// Least-squares fit of ratio(r) = (A + 1/r)/(B + C/r) with A, B, C >= 0.
// Points at r = 0 are excluded from the fit and only compared with the
// r -> 0 limit 1/C. Starts: the linearized solution of
// A r - B y r - C y = -1, then log-uniform random starts.
inline RepSweepFit fit_repetition_sweep(std::span<const SweepPoint> data, double delta,
                                        const SweepFitOptions& options = {}) {
    if (!(delta > 0.0)) throw DomainError("fit_repetition_sweep: delta must be > 0");
    std::vector<SweepPoint> pts;
    double zero_sum = 0.0;
    std::size_t zero_count = 0;
    for (const auto& p : data) {
        if (!(p.x >= 0.0) || !std::isfinite(p.y)) throw DomainError("fit_repetition_sweep: invalid data point");
        if (p.x == 0.0) {
            zero_sum += p.y;
            ++zero_count;
        } else {
            pts.push_back(p);
        }
    }
    std::vector<double> rates;
    for (const auto& p : pts) rates.push_back(p.x);
    std::sort(rates.begin(), rates.end());
    const auto distinct = static_cast<std::size_t>(std::unique(rates.begin(), rates.end()) - rates.begin());
    if (pts.size() < 3 || distinct < 3)
        throw DomainError("fit_repetition_sweep: need at least 3 points at 3 distinct nonzero rates");

    const bool weighted = detail::all_have_errors(pts);
    const auto m = static_cast<Eigen::Index>(pts.size());

    lsq::Problem prob;
    prob.n_params = 3;
    prob.n_residuals = pts.size();
    prob.lower = Eigen::Vector3d::Zero();
    prob.residuals = [&](const lsq::Vector& p, lsq::Vector& r) {
        r.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto& pt = pts[static_cast<std::size_t>(i)];
            const double w = weighted ? 1.0 / pt.y_err : 1.0;
            r(i) = w * (repetition_model(pt.x, p(0), p(1), p(2)) - pt.y);
        }
    };
    prob.jacobian = [&](const lsq::Vector& p, lsq::Matrix& jac) {
        jac.resize(m, 3);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto& pt = pts[static_cast<std::size_t>(i)];
            const double w = weighted ? 1.0 / pt.y_err : 1.0;
            const double u = 1.0 / pt.x;
            const double den = p(1) + p(2) * u;
            const double f = (p(0) + u) / den;
            jac(i, 0) = w / den;
            jac(i, 1) = -w * f / den;
            jac(i, 2) = -w * f * u / den;
        }
    };

    std::vector<lsq::Vector> starts;
    {
        Eigen::MatrixXd a(m, 3);
        Eigen::VectorXd b(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto& pt = pts[static_cast<std::size_t>(i)];
            a(i, 0) = pt.x;
            a(i, 1) = -pt.y * pt.x;
            a(i, 2) = -pt.y;
            b(i) = -1.0;
        }
        starts.push_back(detail::min_norm_solve(a, b).cwiseMax(0.0));
    }
    rng::CounterRng g(options.seed, 0x5EEDu);
    for (std::size_t s = 0; s < options.random_starts; ++s) {
        lsq::Vector v(3);
        v << detail::log_uniform(g, 1e-8, 1.0), detail::log_uniform(g, 1e-6, 10.0), detail::log_uniform(g, 1e-3, 1e3);
        starts.push_back(v);
    }

    lsq::Options sopt = options.solver;
    sopt.scale_covariance = false;
    lsq::Result best = lsq::solve_multistart(prob, starts, sopt);
    const double dof = static_cast<double>(pts.size()) - 3.0;
    if (!weighted && dof > 0.0) {
        best.covariance *= best.chi2 / dof;
        best.std_errors = best.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    }
    double rss = 0.0;
    for (const auto& pt : pts) {
        const double d = repetition_model(pt.x, best.params(0), best.params(1), best.params(2)) - pt.y;
        rss += d * d;
    }

    RepSweepFit out;
    out.fit = make_fit_result({"A", "B", "C"}, best, starts.size(), pts.size(), rss);
    out.delta = delta;
    out.duv_minus_rel = best.params(0) / delta;
    out.duv_plus_rel = best.params(1) / delta;
    out.gamma_plus_rel = best.params(2);
    out.duv_minus_rel_err = best.std_errors(0) / delta;
    out.duv_plus_rel_err = best.std_errors(1) / delta;
    out.gamma_plus_rel_err = best.std_errors(2);
    out.excluded_zero_rate = zero_count;
    if (zero_count) out.zero_rate_mean = zero_sum / static_cast<double>(zero_count);
    out.off_limit = best.params(2) > 0.0 ? 1.0 / best.params(2) : std::numeric_limits<double>::infinity();
    return out;
}

// (A + B p + C p^2) / (1 + D p + E p^2)
inline double power_model(double p, std::span<const double> c) {
    return (c[0] + c[1] * p + c[2] * p * p) / (1.0 + c[3] * p + c[4] * p * p);
}

// Least-squares fit of the rational power model with all five coefficients
// bounded below by zero and a small ridge on B..E.
inline FitResult fit_power_sweep(std::span<const SweepPoint> data, const SweepFitOptions& options = {}) {
    if (data.size() < 5) throw DomainError("fit_power_sweep: need at least 5 points");
    for (const auto& p : data)
        if (!(p.x >= 0.0) || !std::isfinite(p.y)) throw DomainError("fit_power_sweep: invalid data point");

    const bool weighted = detail::all_have_errors(data);
    const auto m = static_cast<Eigen::Index>(data.size());
    const double ridge = std::sqrt(std::max(options.ridge, 0.0));
    const bool use_ridge = ridge > 0.0;

    lsq::Problem prob;
    prob.n_params = 5;
    prob.n_residuals = data.size() + (use_ridge ? 4 : 0);
    prob.lower = lsq::Vector::Zero(5);
    prob.residuals = [&](const lsq::Vector& c, lsq::Vector& r) {
        r.resize(static_cast<Eigen::Index>(prob.n_residuals));
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto& pt = data[static_cast<std::size_t>(i)];
            const double w = weighted ? 1.0 / pt.y_err : 1.0;
            r(i) = w * (power_model(pt.x, std::span<const double>(c.data(), 5)) - pt.y);
        }
        if (use_ridge)
            for (Eigen::Index j = 0; j < 4; ++j) r(m + j) = ridge * c(j + 1);
    };
    prob.jacobian = [&](const lsq::Vector& c, lsq::Matrix& jac) {
        jac.setZero(static_cast<Eigen::Index>(prob.n_residuals), 5);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto& pt = data[static_cast<std::size_t>(i)];
            const double w = weighted ? 1.0 / pt.y_err : 1.0;
            const double p = pt.x;
            const double den = 1.0 + c(3) * p + c(4) * p * p;
            const double f = (c(0) + c(1) * p + c(2) * p * p) / den;
            jac(i, 0) = w / den;
            jac(i, 1) = w * p / den;
            jac(i, 2) = w * p * p / den;
            jac(i, 3) = -w * f * p / den;
            jac(i, 4) = -w * f * p * p / den;
        }
        if (use_ridge)
            for (Eigen::Index j = 0; j < 4; ++j) jac(m + j, j + 1) = ridge;
    };

    std::vector<lsq::Vector> starts;
    {
        // y (1 + D p + E p^2) = A + B p + C p^2, solved for the minimum-norm coefficients
        Eigen::MatrixXd a(m, 5);
        Eigen::VectorXd b(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto& pt = data[static_cast<std::size_t>(i)];
            const double p = pt.x;
            a.row(i) << 1.0, p, p * p, -pt.y * p, -pt.y * p * p;
            b(i) = pt.y;
        }
        starts.push_back(detail::min_norm_solve(a, b).cwiseMax(0.0));
    }
    double pmax = 0.0, ymax = 0.0;
    for (const auto& pt : data) {
        pmax = std::max(pmax, pt.x);
        ymax = std::max(ymax, std::abs(pt.y));
    }
    pmax = std::max(pmax, 1e-12);
    ymax = std::max(ymax, 1e-12);
    rng::CounterRng g(options.seed, 0xB0B0u);
    for (std::size_t s = 0; s < options.random_starts; ++s) {
        lsq::Vector v(5);
        v << detail::log_uniform(g, 1e-4, 1.0) * ymax, detail::log_uniform(g, 1e-4, 1.0) * ymax / pmax,
            detail::log_uniform(g, 1e-4, 1.0) * ymax / (pmax * pmax), detail::log_uniform(g, 1e-4, 1.0) / pmax,
            detail::log_uniform(g, 1e-4, 1.0) / (pmax * pmax);
        starts.push_back(v);
    }

    lsq::Options sopt = options.solver;
    sopt.scale_covariance = false;
    lsq::Result best = lsq::solve_multistart(prob, starts, sopt);
    double rss = 0.0, wrss = 0.0;
    for (const auto& pt : data) {
        const double d = power_model(pt.x, std::span<const double>(best.params.data(), 5)) - pt.y;
        rss += d * d;
        wrss += weighted ? d * d / (pt.y_err * pt.y_err) : d * d;
    }
    // Uncertainties from the data rows only.
    lsq::Matrix jac;
    lsq::evaluate_jacobian(prob, best.params, best.residuals, jac);
    best.covariance = lsq::covariance_from_jacobian(jac.topRows(m));
    const double dof = static_cast<double>(data.size()) - 5.0;
    if (!weighted && dof > 0.0) best.covariance *= wrss / dof;
    best.std_errors = best.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    best.chi2 = wrss;
    return make_fit_result({"A", "B", "C", "D", "E"}, best, starts.size(), data.size(), rss);
}

} // namespace nvcharge::kinetics
