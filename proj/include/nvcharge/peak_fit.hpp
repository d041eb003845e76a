#pragma once

// Zero-phonon-line fits: one Voigt on a b0/(lambda - b1) background, and one
// or more Voigts on a linear background for ZPL integration.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nvcharge/errors.hpp"
#include "nvcharge/fit_result.hpp"
#include "nvcharge/lineshape.hpp"
#include "nvcharge/lsq.hpp"
#include "nvcharge/spectrum.hpp"

namespace nvcharge::spectra {

inline constexpr Window kSiV0Window{938.0, 950.0};

struct VoigtBackgroundFit {
    double amplitude = 0.0; // counts nm (area of the peak)
    double center = 0.0;
    double sigma = 0.0;
    double gamma = 0.0;
    double b0 = 0.0;
    double b1 = 0.0;
    bool pole_constrained = false; // result of the retry with b1 bounded below the window
    FitResult fit;                 // names amplitude, center, sigma, gamma, b0, b1
};

inline double voigt_background_model(double x, const double* p) {
    return p[0] * voigt(x - p[1], p[2], p[3]) + p[4] / (x - p[5]);
}

namespace detail {

struct WindowData {
    std::vector<double> x, y;
};

inline WindowData window_data(const SpectrumTrace& t, Window w, std::size_t min_points, const char* who) {
    t.validate();
    require_covers(t, w, who);
    const auto [first, last] = window_range(t.wavelengths, w);
    if (last - first < min_points)
        throw DomainError(std::string(who) + ": need at least " + std::to_string(min_points) + " points in the window");
    WindowData d;
    d.x.assign(t.wavelengths.begin() + static_cast<std::ptrdiff_t>(first), t.wavelengths.begin() + static_cast<std::ptrdiff_t>(last));
    d.y.assign(t.counts.begin() + static_cast<std::ptrdiff_t>(first), t.counts.begin() + static_cast<std::ptrdiff_t>(last));
    return d;
}

inline double min_spacing(const std::vector<double>& x) {
    double h = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < x.size(); ++i) h = std::min(h, x[i] - x[i - 1]);
    return h;
}

// Full width at half maximum of y (above `base`) around index `peak`, by
// linear interpolation of the half-height crossings.
inline double crossing_fwhm(const std::vector<double>& x, const std::vector<double>& y, std::size_t peak,
                            const std::vector<double>& base) {
    const double half = 0.5 * (y[peak] - base[peak]);
    std::size_t l = peak, r = peak;
    while (l > 0 && y[l] - base[l] > half) --l;
    while (r + 1 < y.size() && y[r] - base[r] > half) ++r;
    auto cross = [&](std::size_t a, std::size_t b) {
        const double ya = y[a] - base[a] - half, yb = y[b] - base[b] - half;
        if (ya == yb) return x[a];
        return x[a] + (x[b] - x[a]) * ya / (ya - yb);
    };
    const double xl = l < peak ? cross(l, l + 1) : x[peak];
    const double xr = r > peak ? cross(r - 1, r) : x[peak];
    return std::max(xr - xl, 2.0 * min_spacing(x));
}

} // namespace detail

struct VoigtFitOptions {
    lsq::Options solver{};
    // Gap kept between the background pole and the window's lower edge, in
    // units of the grid spacing.
    double pole_margin_px = 1.0;
};

// Least squares fit of a V(lambda - center; sigma, gamma) + b0 / (lambda - b1)
// on the window. A fit that puts the pole at or above the window start is
// repeated with b1 bounded below it; if that bound ends up active the fit is
// rejected. So is a fit whose peak centre sits on a window edge, which is how
// the retry usually fails when the data really have a pole above the window.
inline VoigtBackgroundFit fit_voigt_background(const SpectrumTrace& trace, Window window = kSiV0Window,
                                               const VoigtFitOptions& opt = {}) {
    const auto d = detail::window_data(trace, window, 20, "fit_voigt_background");
    const auto m = static_cast<Eigen::Index>(d.x.size());
    const double h = detail::min_spacing(d.x);
    const double lo = d.x.front(), hi = d.x.back(), width = hi - lo;
    const double pole_cap = lo - opt.pole_margin_px * h;

    // Background guess through the two window ends.
    const double y_lo = d.y.front(), y_hi = d.y.back();
    double b1 = lo - width;
    if (y_lo > y_hi && y_hi > 0.0) b1 = std::min((y_lo * lo - y_hi * hi) / (y_lo - y_hi), lo - 0.25 * width);
    double b0 = y_hi * (hi - b1);
    std::vector<double> base(d.x.size());
    for (std::size_t i = 0; i < base.size(); ++i) base[i] = b0 / (d.x[i] - b1);
    std::size_t peak = 0;
    for (std::size_t i = 1; i < d.y.size(); ++i)
        if (d.y[i] - base[i] > d.y[peak] - base[peak]) peak = i;
    const double fwhm = detail::crossing_fwhm(d.x, d.y, peak, base);
    const double height = std::max(d.y[peak] - base[peak], 1e-12);

    lsq::Problem prob;
    prob.n_params = 6;
    prob.n_residuals = d.x.size();
    prob.residuals = [&](const lsq::Vector& p, lsq::Vector& r) {
        r.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            r(i) = voigt_background_model(d.x[k], p.data()) - d.y[k];
        }
    };
    const double inf = std::numeric_limits<double>::infinity();
    prob.lower = (lsq::Vector(6) << 0.0, lo, 1e-3 * h, 0.0, -inf, -inf).finished();
    prob.upper = (lsq::Vector(6) << inf, hi, width, width, inf, inf).finished();

    std::vector<lsq::Vector> starts;
    for (double frac : {0.5, 0.2, 0.8}) {
        // Split the observed width between the Gaussian and Lorentzian parts.
        const double sigma0 = std::max(frac * fwhm / 2.3548, 2e-3 * h);
        const double gamma0 = (1.0 - frac) * fwhm / 2.0;
        lsq::Vector s(6);
        s << height / voigt(0.0, sigma0, gamma0), d.x[peak], sigma0, gamma0, b0, b1;
        starts.push_back(s);
    }

    lsq::Result best = lsq::solve_multistart(prob, starts, opt.solver);
    bool constrained = false;
    if (!(best.params(5) < pole_cap)) {
        prob.upper(5) = pole_cap;
        for (auto& s : starts) s(5) = std::min(s(5), pole_cap - width);
        best = lsq::solve_multistart(prob, starts, opt.solver);
        constrained = true;
        if (best.params(5) >= pole_cap - 1e-9 * width) {
            throw ConvergenceError("fit_voigt_background: background pole pinned at the window edge",
                                   std::vector<double>(best.params.data(), best.params.data() + 6),
                                   std::sqrt(best.chi2));
        }
    }
    if (best.params(1) <= lo + 1e-9 * width || best.params(1) >= hi - 1e-9 * width) {
        throw ConvergenceError("fit_voigt_background: peak centre pinned at the window edge",
                               std::vector<double>(best.params.data(), best.params.data() + 6), std::sqrt(best.chi2));
    }
    VoigtBackgroundFit out;
    out.amplitude = best.params(0);
    out.center = best.params(1);
    out.sigma = best.params(2);
    out.gamma = best.params(3);
    out.b0 = best.params(4);
    out.b1 = best.params(5);
    out.pole_constrained = constrained;
    out.fit = make_fit_result({"amplitude", "center", "sigma", "gamma", "b0", "b1"}, best, starts.size(), d.x.size(),
                              best.chi2);
    return out;
}

struct ZplPeak {
    double area = 0.0;
    double center = 0.0;
    double sigma = 0.0;
    double gamma = 0.0;
};

struct ZplIntegration {
    std::vector<ZplPeak> peaks;
    double c0 = 0.0; // background value at the window centre
    double c1 = 0.0; // background slope [counts / nm]
    double area = 0.0; // summed area of all peaks
    FitResult fit;     // area_k, center_k, sigma_k, gamma_k ..., c0, c1
};

struct ZplOptions {
    std::vector<double> center_guesses; // empty: single peak at the maximum
    lsq::Options solver{};
};

// sum_k area_k V(lambda - center_k; sigma_k, gamma_k) + c0 + c1 (lambda - mid)
inline double zpl_model(double x, const std::vector<double>& p, std::size_t n_peaks, double mid) {
    double s = p[4 * n_peaks] + p[4 * n_peaks + 1] * (x - mid);
    for (std::size_t k = 0; k < n_peaks; ++k) s += p[4 * k] * voigt(x - p[4 * k + 1], p[4 * k + 2], p[4 * k + 3]);
    return s;
}

// Voigt fit(s) on a linear background; the ZPL intensity is the fitted area.
inline ZplIntegration integrate_zpl(const SpectrumTrace& trace, Window window, const ZplOptions& opt = {}) {
    const auto d = detail::window_data(trace, window, 20, "integrate_zpl");
    const auto m = static_cast<Eigen::Index>(d.x.size());
    const double h = detail::min_spacing(d.x);
    const double lo = d.x.front(), hi = d.x.back(), width = hi - lo, mid = 0.5 * (lo + hi);

    const double slope0 = (d.y.back() - d.y.front()) / width;
    std::vector<double> base(d.x.size());
    for (std::size_t i = 0; i < base.size(); ++i) base[i] = d.y.front() + slope0 * (d.x[i] - lo);
    std::size_t peak = 0;
    for (std::size_t i = 1; i < d.y.size(); ++i)
        if (d.y[i] - base[i] > d.y[peak] - base[peak]) peak = i;

    std::vector<double> centers = opt.center_guesses;
    if (centers.empty()) centers.push_back(d.x[peak]);
    for (double c : centers)
        if (!window.contains(c)) throw DomainError("integrate_zpl: center guess outside the window");
    const std::size_t np = centers.size();
    double fwhm = detail::crossing_fwhm(d.x, d.y, peak, base);
    if (np > 1) {
        double min_gap = width;
        for (std::size_t a = 0; a < np; ++a)
            for (std::size_t b = a + 1; b < np; ++b) min_gap = std::min(min_gap, std::abs(centers[a] - centers[b]));
        fwhm = std::min(fwhm, std::max(min_gap, 2.0 * h));
    }

    const std::size_t n = 4 * np + 2;
    lsq::Problem prob;
    prob.n_params = n;
    prob.n_residuals = d.x.size();
    prob.residuals = [&](const lsq::Vector& p, lsq::Vector& r) {
        const std::vector<double> pv(p.data(), p.data() + p.size());
        r.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            r(i) = zpl_model(d.x[k], pv, np, mid) - d.y[k];
        }
    };
    const double inf = std::numeric_limits<double>::infinity();
    prob.lower = lsq::Vector::Constant(static_cast<Eigen::Index>(n), -inf);
    prob.upper = lsq::Vector::Constant(static_cast<Eigen::Index>(n), inf);
    for (std::size_t k = 0; k < np; ++k) {
        const auto j = static_cast<Eigen::Index>(4 * k);
        prob.lower(j) = 0.0;
        prob.lower(j + 1) = lo;
        prob.upper(j + 1) = hi;
        prob.lower(j + 2) = 1e-3 * h;
        prob.upper(j + 2) = width;
        prob.lower(j + 3) = 0.0;
        prob.upper(j + 3) = width;
    }

    auto height_at = [&](double c) {
        std::size_t best_i = 0;
        for (std::size_t i = 1; i < d.x.size(); ++i)
            if (std::abs(d.x[i] - c) < std::abs(d.x[best_i] - c)) best_i = i;
        return std::max(d.y[best_i] - base[best_i], 1e-12);
    };
    std::vector<lsq::Vector> starts;
    for (double frac : {0.5, 0.2, 0.8}) {
        const double sigma0 = std::max(frac * fwhm / 2.3548, 2e-3 * h);
        const double gamma0 = (1.0 - frac) * fwhm / 2.0;
        lsq::Vector s(static_cast<Eigen::Index>(n));
        for (std::size_t k = 0; k < np; ++k) {
            const auto j = static_cast<Eigen::Index>(4 * k);
            s(j) = height_at(centers[k]) / voigt(0.0, sigma0, gamma0) / static_cast<double>(np);
            s(j + 1) = centers[k];
            s(j + 2) = sigma0;
            s(j + 3) = gamma0;
        }
        s(static_cast<Eigen::Index>(4 * np)) = d.y.front() + slope0 * (mid - lo);
        s(static_cast<Eigen::Index>(4 * np + 1)) = slope0;
        starts.push_back(s);
    }
    const lsq::Result best = lsq::solve_multistart(prob, starts, opt.solver);

    ZplIntegration out;
    std::vector<std::string> names;
    for (std::size_t k = 0; k < np; ++k) {
        const auto j = static_cast<Eigen::Index>(4 * k);
        out.peaks.push_back({best.params(j), best.params(j + 1), best.params(j + 2), best.params(j + 3)});
        out.area += best.params(j);
        const std::string sfx = np > 1 ? "_" + std::to_string(k) : "";
        for (const char* nm : {"area", "center", "sigma", "gamma"}) names.push_back(nm + sfx);
    }
    names.push_back("c0");
    names.push_back("c1");
    out.c0 = best.params(static_cast<Eigen::Index>(4 * np));
    out.c1 = best.params(static_cast<Eigen::Index>(4 * np + 1));
    out.fit = make_fit_result(std::move(names), best, starts.size(), d.x.size(), best.chi2);
    return out;
}

} // namespace nvcharge::spectra
