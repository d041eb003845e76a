#pragma once

// Area-normalised Gaussian, Lorentzian and Voigt profiles.
//
// The Voigt profile is Re w(z) / (sigma sqrt(2 pi)) with
// z = (x + i gamma) / (sigma sqrt 2), w the Faddeeva function. w is evaluated
// with Weideman's rational expansion (48 terms, relative error a few 1e-9 in
// the upper half plane) and, for |z| >= 15, with the Laplace continued
// fraction, which is accurate to rounding there.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>

#include "nvcharge/errors.hpp"

namespace nvcharge::spectra {

namespace detail {

inline constexpr int kWeidemanN = 48;

struct WeidemanTable {
    double L = 0.0;
    std::array<double, kWeidemanN> a{};
};

inline const WeidemanTable& weideman_table() {
    static const WeidemanTable table = [] {
        WeidemanTable t;
        constexpr int n = kWeidemanN;
        constexpr int m = 2 * n;
        t.L = std::sqrt(n / std::numbers::sqrt2);
        // f(k) on the mapped grid, k = 0 .. m-1 (f is even in k).
        std::array<double, m> f{};
        for (int k = 0; k < m; ++k) {
            const double theta = k * std::numbers::pi / m;
            const double tt = t.L * std::tan(theta / 2.0);
            f[static_cast<std::size_t>(k)] = std::exp(-tt * tt) * (t.L * t.L + tt * tt);
        }
        // Real DFT of the symmetric, zero-padded sequence of length 2m.
        for (int j = 1; j <= n; ++j) {
            long double s = f[0];
            for (int k = 1; k < m; ++k)
                s += 2.0L * f[static_cast<std::size_t>(k)] * std::cos(static_cast<long double>(std::numbers::pi) * k * j / m);
            t.a[static_cast<std::size_t>(j - 1)] = static_cast<double>(s / (2 * m));
        }
        return t;
    }();
    return table;
}

inline std::complex<double> faddeeva_weideman(std::complex<double> z) {
    const auto& t = weideman_table();
    const std::complex<double> iz(-z.imag(), z.real());
    const std::complex<double> lmiz = t.L - iz;
    const std::complex<double> zz = (t.L + iz) / lmiz;
    std::complex<double> p = 0.0;
    for (int k = kWeidemanN - 1; k >= 0; --k) p = p * zz + t.a[static_cast<std::size_t>(k)];
    return 2.0 * p / (lmiz * lmiz) + (1.0 / std::sqrt(std::numbers::pi)) / lmiz;
}

inline std::complex<double> faddeeva_continued_fraction(std::complex<double> z) {
    std::complex<double> r = z;
    for (int k = 40; k >= 1; --k) r = z - (0.5 * k) / r;
    return std::complex<double>(0.0, 1.0 / std::sqrt(std::numbers::pi)) / r;
}

} // namespace detail

// Faddeeva function w(z) = exp(-z^2) erfc(-i z).
inline std::complex<double> faddeeva(std::complex<double> z) {
    if (z.imag() < 0.0) {
        // w(z) = 2 exp(-z^2) - w(-z)
        return 2.0 * std::exp(-z * z) - faddeeva(-z);
    }
    if (std::abs(z) >= 15.0) return detail::faddeeva_continued_fraction(z);
    return detail::faddeeva_weideman(z);
}

inline double gaussian(double x, double sigma) {
    if (!(sigma > 0.0)) throw DomainError("gaussian: sigma must be > 0");
    const double u = x / sigma;
    return std::exp(-0.5 * u * u) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

// gamma is the half width at half maximum.
inline double lorentzian(double x, double gamma) {
    if (!(gamma > 0.0)) throw DomainError("lorentzian: gamma must be > 0");
    return gamma / (std::numbers::pi * (x * x + gamma * gamma));
}

inline double voigt(double x, double sigma, double gamma) {
    if (!(sigma >= 0.0) || !(gamma >= 0.0) || (sigma == 0.0 && gamma == 0.0))
        throw DomainError("voigt: need sigma >= 0, gamma >= 0, not both zero");
    if (gamma == 0.0) return gaussian(x, sigma);
    if (sigma == 0.0) return lorentzian(x, gamma);
    const double s = sigma * std::numbers::sqrt2;
    return faddeeva({x / s, gamma / s}).real() / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

} // namespace nvcharge::spectra
