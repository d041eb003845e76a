#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nvcharge/errors.hpp"

namespace nvcharge::spectra {

struct SpectrumTrace {
    std::vector<double> wavelengths; // nm, strictly increasing
    std::vector<double> counts;
    std::map<std::string, std::string> metadata;

    std::size_t size() const { return wavelengths.size(); }

    void validate() const {
        if (wavelengths.size() != counts.size()) throw DomainError("SpectrumTrace: wavelengths and counts differ in length");
        if (wavelengths.size() < 2) throw DomainError("SpectrumTrace: need at least 2 points");
        for (std::size_t i = 0; i < wavelengths.size(); ++i) {
            if (!std::isfinite(wavelengths[i]) || !std::isfinite(counts[i]))
                throw DomainError("SpectrumTrace: non-finite value at index " + std::to_string(i));
            if (i && !(wavelengths[i] > wavelengths[i - 1]))
                throw DomainError("SpectrumTrace: wavelengths not strictly increasing at index " + std::to_string(i));
        }
    }
};

struct Window {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double x) const { return x >= lo && x <= hi; }
    double width() const { return hi - lo; }
};

// Index range [first, last) of grid points inside the closed window.
inline std::pair<std::size_t, std::size_t> window_range(const std::vector<double>& grid, Window w) {
    std::size_t first = 0;
    while (first < grid.size() && grid[first] < w.lo) ++first;
    std::size_t last = first;
    while (last < grid.size() && grid[last] <= w.hi) ++last;
    return {first, last};
}

// Trapezoidal rule on the native grid over the points inside the window.
// No interpolation at the window edges, so the result depends only on the
// samples and stays reproducible.
inline double trapz(const std::vector<double>& x, const std::vector<double>& y, Window w) {
    const auto [first, last] = window_range(x, w);
    double s = 0.0;
    for (std::size_t i = first + 1; i < last; ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
    return s;
}

inline double trapz(const SpectrumTrace& t, Window w) { return trapz(t.wavelengths, t.counts, w); }

// Per-point trapezoid weights over the window (sum = covered width).
inline std::vector<double> trapz_weights(const std::vector<double>& x, Window w) {
    std::vector<double> wt(x.size(), 0.0);
    const auto [first, last] = window_range(x, w);
    for (std::size_t i = first + 1; i < last; ++i) {
        const double h = 0.5 * (x[i] - x[i - 1]);
        wt[i - 1] += h;
        wt[i] += h;
    }
    return wt;
}

inline bool same_grid(const SpectrumTrace& a, const SpectrumTrace& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.wavelengths[i] != b.wavelengths[i]) return false;
    return true;
}

inline void require_covers(const SpectrumTrace& t, Window w, const char* what) {
    if (t.wavelengths.front() > w.lo || t.wavelengths.back() < w.hi)
        throw DomainError(std::string(what) + ": grid does not cover the window [" + std::to_string(w.lo) + ", " +
                          std::to_string(w.hi) + "] nm");
}

} // namespace nvcharge::spectra
