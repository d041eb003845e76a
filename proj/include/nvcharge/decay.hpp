#pragma once

// Photon arrival histograms and multi-exponential PL recovery fits.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "nvcharge/errors.hpp"
#include "nvcharge/fit_result.hpp"
#include "nvcharge/lsq.hpp"

namespace nvcharge::spectra {

struct Histogram {
    double window = 0.0; // [s]
    std::vector<double> counts;
    std::size_t discarded = 0; // arrivals at or beyond the window

    double bin_width() const { return window / static_cast<double>(counts.size()); }
    std::vector<double> centers() const {
        std::vector<double> c(counts.size());
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = (static_cast<double>(i) + 0.5) * window / static_cast<double>(c.size());
        return c;
    }
};

inline Histogram bin_arrivals(std::span<const double> arrivals, double window, std::size_t n_bins) {
    if (n_bins < 1) throw DomainError("bin_arrivals: need at least one bin");
    if (!(window > 0.0) || !std::isfinite(window)) throw DomainError("bin_arrivals: window must be positive");
    Histogram h;
    h.window = window;
    h.counts.assign(n_bins, 0.0);
    const double scale = static_cast<double>(n_bins) / window;
    for (double t : arrivals) {
        if (!(t >= 0.0)) throw DomainError("bin_arrivals: arrival times must be >= 0");
        if (t >= window) {
            ++h.discarded;
            continue;
        }
        const auto k = std::min(static_cast<std::size_t>(t * scale), n_bins - 1);
        h.counts[k] += 1.0;
    }
    return h;
}

// a0 (1 - sum_j a_j exp(-t / tau_j)); components with tau <= 0 are ignored.
inline double multi_exp_model(double t, double a0, std::span<const double> a, std::span<const double> tau) {
    double s = 1.0;
    for (std::size_t j = 0; j < a.size(); ++j)
        if (tau[j] > 0.0) s -= a[j] * std::exp(-t / tau[j]);
    return a0 * s;
}

enum class DecayWeighting { Poisson, Uniform };

struct TripleExpOptions {
    DecayWeighting weighting = DecayWeighting::Poisson;
    // 0: choose 1, 2 or 3 components by BIC; otherwise force that many.
    std::size_t components = 0;
    std::size_t seed_grid = 7; // log-spaced tau seeds per start set
    lsq::Options solver{};
};

struct TripleExpFit {
    double a0 = 0.0;
    std::array<double, 3> a{};   // inactive components: 0
    std::array<double, 3> tau{}; // ascending over the active ones; inactive: 0
    double a0_err = 0.0;
    std::array<double, 3> a_err{};
    std::array<double, 3> tau_err{};
    std::size_t n_active = 0;
    bool ill_conditioned = false; // two active taus within 10%
    double bic = 0.0;
    std::array<double, 3> bic_by_components{};
    FitResult fit; // names a0, a1.., ln_tau1..
    std::vector<std::string> warnings;
};

namespace detail {

struct ExpFitCandidate {
    lsq::Result result;
    std::size_t starts = 0;
    bool ok = false;
};

inline ExpFitCandidate fit_k_exponentials(std::span<const double> y, std::span<const double> t, std::size_t k,
                                          const TripleExpOptions& opt) {
    const auto m = static_cast<Eigen::Index>(y.size());
    std::vector<double> w(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        w[i] = opt.weighting == DecayWeighting::Poisson ? 1.0 / std::sqrt(std::max(y[i], 1.0)) : 1.0;

    const double dt_min = t.front() > 0.0 ? t.front() : (t.size() > 1 ? t[1] - t[0] : 1.0);
    const double t_max = t.back();
    const std::size_t n = 1 + 2 * k;
    lsq::Problem prob;
    prob.n_params = n;
    prob.n_residuals = y.size();
    prob.lower = lsq::Vector::Constant(static_cast<Eigen::Index>(n), 0.0);
    prob.upper = lsq::Vector::Constant(static_cast<Eigen::Index>(n), std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < k; ++j) {
        prob.lower(static_cast<Eigen::Index>(1 + k + j)) = std::log(0.1 * dt_min);
        prob.upper(static_cast<Eigen::Index>(1 + k + j)) = std::log(100.0 * t_max);
    }
    prob.residuals = [&, k](const lsq::Vector& p, lsq::Vector& r) {
        r.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            double s = 1.0;
            for (std::size_t j = 0; j < k; ++j)
                s -= p(static_cast<Eigen::Index>(1 + j)) * std::exp(-t[ii] / std::exp(p(static_cast<Eigen::Index>(1 + k + j))));
            r(i) = w[ii] * (p(0) * s - y[ii]);
        }
    };
    prob.jacobian = [&, k](const lsq::Vector& p, lsq::Matrix& jac) {
        jac.resize(m, static_cast<Eigen::Index>(1 + 2 * k));
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            double s = 1.0;
            for (std::size_t j = 0; j < k; ++j) {
                const auto ja = static_cast<Eigen::Index>(1 + j);
                const auto jt = static_cast<Eigen::Index>(1 + k + j);
                const double tau = std::exp(p(jt));
                const double e = std::exp(-t[ii] / tau);
                s -= p(ja) * e;
                jac(i, ja) = -w[ii] * p(0) * e;
                // d/d ln(tau) of -a e^{-t/tau} = -a e^{-t/tau} t / tau
                jac(i, jt) = -w[ii] * p(0) * p(ja) * e * t[ii] / tau;
            }
            jac(i, 0) = w[ii] * s;
        }
    };

    // Tau seeds: every k-subset of a log-spaced grid; amplitudes from a
    // linear least-squares solve with the taus held fixed.
    const std::size_t g = std::max<std::size_t>(opt.seed_grid, k);
    std::vector<double> grid(g);
    const double lo = std::log(2.0 * dt_min), hi = std::log(0.5 * t_max);
    for (std::size_t i = 0; i < g; ++i)
        grid[i] = g > 1 ? lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(g - 1) : 0.5 * (lo + hi);
    std::vector<lsq::Vector> starts;
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    for (;;) {
        Eigen::MatrixXd a(m, static_cast<Eigen::Index>(1 + k));
        Eigen::VectorXd b(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            a(i, 0) = w[ii];
            for (std::size_t j = 0; j < k; ++j)
                a(i, static_cast<Eigen::Index>(1 + j)) = -w[ii] * std::exp(-t[ii] / std::exp(grid[idx[j]]));
            b(i) = w[ii] * y[ii];
        }
        const Eigen::VectorXd c = a.completeOrthogonalDecomposition().solve(b);
        lsq::Vector s(static_cast<Eigen::Index>(n));
        s(0) = std::max(c(0), 1e-12);
        for (std::size_t j = 0; j < k; ++j) {
            s(static_cast<Eigen::Index>(1 + j)) = std::max(c(static_cast<Eigen::Index>(1 + j)) / s(0), 1e-3);
            s(static_cast<Eigen::Index>(1 + k + j)) = grid[idx[j]];
        }
        starts.push_back(s);
        // next k-subset in lexicographic order
        std::size_t pos = k;
        while (pos > 0 && idx[pos - 1] == g - k + pos - 1) --pos;
        if (pos == 0) break;
        ++idx[pos - 1];
        for (std::size_t j = pos; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }

    ExpFitCandidate out;
    out.starts = starts.size();
    lsq::Options sopt = opt.solver;
    sopt.scale_covariance = opt.weighting == DecayWeighting::Uniform;
    try {
        out.result = lsq::solve_multistart(prob, starts, sopt);
        out.ok = true;
    } catch (const ConvergenceError&) {
        out.ok = false;
    }
    return out;
}

inline double bic_value(double chi2, std::size_t n_params, std::size_t n, DecayWeighting wt) {
    const double dn = static_cast<double>(n);
    const double fit_term = wt == DecayWeighting::Poisson ? chi2 : dn * std::log(std::max(chi2 / dn, 1e-300));
    return fit_term + static_cast<double>(n_params) * std::log(dn);
}

} // namespace detail

// Fits I(t) = a0 (1 - sum_j a_j exp(-t/tau_j)) with a0, a_j >= 0 to binned
// counts at bin centres. Each component count is fitted from every pair or
// triple of log-spaced tau seeds; the count with the lowest BIC is reported
// unless forced.
inline TripleExpFit fit_triple_exponential(std::span<const double> counts, std::span<const double> t_centers,
                                           const TripleExpOptions& opt = {}) {
    if (counts.size() != t_centers.size()) throw DomainError("fit_triple_exponential: counts and times differ in length");
    if (counts.size() < 30) throw DomainError("fit_triple_exponential: need at least 30 bins");
    for (std::size_t i = 0; i < t_centers.size(); ++i) {
        if (!(t_centers[i] >= 0.0) || !std::isfinite(counts[i])) throw DomainError("fit_triple_exponential: invalid bin");
        if (i && !(t_centers[i] > t_centers[i - 1])) throw DomainError("fit_triple_exponential: times must increase");
    }
    const double t_first = t_centers.front() > 0.0 ? t_centers.front() : t_centers[1];
    if (t_centers.back() / t_first <= 100.0)
        throw DomainError("fit_triple_exponential: bins must span more than two decades in time");
    if (opt.components > 3) throw DomainError("fit_triple_exponential: at most 3 components");

    TripleExpFit out;
    out.bic_by_components.fill(std::numeric_limits<double>::infinity());
    detail::ExpFitCandidate chosen;
    std::size_t chosen_k = 0;
    const std::size_t k_lo = opt.components ? opt.components : 1;
    const std::size_t k_hi = opt.components ? opt.components : 3;
    std::size_t total_starts = 0;
    for (std::size_t k = k_lo; k <= k_hi; ++k) {
        auto cand = detail::fit_k_exponentials(counts, t_centers, k, opt);
        total_starts += cand.starts;
        if (!cand.ok) {
            out.warnings.push_back(std::to_string(k) + "-component fit did not converge");
            continue;
        }
        const double bic = detail::bic_value(cand.result.chi2, 1 + 2 * k, counts.size(), opt.weighting);
        out.bic_by_components[k - 1] = bic;
        if (chosen_k == 0 || bic < out.bic) {
            out.bic = bic;
            chosen = std::move(cand);
            chosen_k = k;
        }
    }
    if (chosen_k == 0) throw ConvergenceError("fit_triple_exponential: no model converged", {}, std::numeric_limits<double>::quiet_NaN());

    // Reorder components by ascending tau, in the parameter vector too.
    const std::size_t k = chosen_k;
    std::vector<std::size_t> order(k);
    for (std::size_t j = 0; j < k; ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return chosen.result.params(static_cast<Eigen::Index>(1 + k + x)) <
               chosen.result.params(static_cast<Eigen::Index>(1 + k + y));
    });
    Eigen::VectorXi perm(static_cast<Eigen::Index>(1 + 2 * k));
    perm(0) = 0;
    for (std::size_t j = 0; j < k; ++j) {
        perm(static_cast<Eigen::Index>(1 + j)) = static_cast<int>(1 + order[j]);
        perm(static_cast<Eigen::Index>(1 + k + j)) = static_cast<int>(1 + k + order[j]);
    }
    lsq::Result sorted = chosen.result;
    for (Eigen::Index i = 0; i < perm.size(); ++i) {
        sorted.params(i) = chosen.result.params(perm(i));
        sorted.std_errors(i) = chosen.result.std_errors(perm(i));
        for (Eigen::Index j = 0; j < perm.size(); ++j) sorted.covariance(i, j) = chosen.result.covariance(perm(i), perm(j));
    }

    const auto& p = sorted.params;
    const auto& se = sorted.std_errors;
    out.a0 = p(0);
    out.a0_err = se(0);
    out.n_active = k;
    for (std::size_t j = 0; j < k; ++j) {
        const double tau = std::exp(p(static_cast<Eigen::Index>(1 + k + j)));
        out.a[j] = p(static_cast<Eigen::Index>(1 + j));
        out.a_err[j] = se(static_cast<Eigen::Index>(1 + j));
        out.tau[j] = tau;
        out.tau_err[j] = tau * se(static_cast<Eigen::Index>(1 + k + j));
        if (j && tau < 1.1 * out.tau[j - 1]) out.ill_conditioned = true;
    }
    if (out.ill_conditioned) out.warnings.push_back("time constants within 10% of each other");

    std::vector<std::string> names{"a0"};
    for (std::size_t j = 0; j < k; ++j) names.push_back("a" + std::to_string(j + 1));
    for (std::size_t j = 0; j < k; ++j) names.push_back("ln_tau" + std::to_string(j + 1));
    double rss = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double dlt = multi_exp_model(t_centers[i], out.a0, out.a, out.tau) - counts[i];
        rss += dlt * dlt;
    }
    out.fit = make_fit_result(std::move(names), sorted, total_starts, counts.size(), rss);
    return out;
}

} // namespace nvcharge::spectra
