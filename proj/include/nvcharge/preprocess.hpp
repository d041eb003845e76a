#pragma once

// Cosmic-ray removal and offset handling for CCD spectra.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "nvcharge/errors.hpp"
#include "nvcharge/spectrum.hpp"

namespace nvcharge::spectra {

struct DespikeOptions {
    // 30 neighbours plus the centre pixel; must be odd so the window is centred.
    std::size_t window_px = 31;
    double threshold_sigmas = 1.5;
};

struct DespikeResult {
    SpectrumTrace trace;
    std::vector<std::size_t> replaced; // indices that were interpolated
};

namespace detail {

inline double median_of(std::vector<double>& v) {
    const std::size_t n = v.size();
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (n % 2) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

} // namespace detail

// Flags points whose distance from the rolling median exceeds
// threshold * (sample std of the window without the centre point) and
// replaces them by linear interpolation between the nearest unflagged
// neighbours. Near the ends the window is shifted inward rather than
// truncated. One pass; flags are decided on the input before any replacement.
inline DespikeResult despike(const SpectrumTrace& in, const DespikeOptions& opt = {}) {
    in.validate();
    const std::size_t w = opt.window_px;
    if (w < 3 || w % 2 == 0) throw DomainError("despike: window must be odd and >= 3");
    if (!(opt.threshold_sigmas > 0.0)) throw DomainError("despike: threshold must be > 0");
    const std::size_t n = in.size();
    if (n < w) throw DomainError("despike: trace shorter than the window");

    const auto& y = in.counts;
    const std::size_t half = w / 2;
    std::vector<char> bad(n, 0);
    std::vector<double> buf;
    buf.reserve(w);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t start = std::min(i >= half ? i - half : 0, n - w);
        buf.assign(y.begin() + static_cast<std::ptrdiff_t>(start), y.begin() + static_cast<std::ptrdiff_t>(start + w));
        const double med = detail::median_of(buf);
        double mean = 0.0;
        for (std::size_t k = start; k < start + w; ++k)
            if (k != i) mean += y[k];
        mean /= static_cast<double>(w - 1);
        double ss = 0.0;
        for (std::size_t k = start; k < start + w; ++k)
            if (k != i) ss += (y[k] - mean) * (y[k] - mean);
        const double sd = std::sqrt(ss / static_cast<double>(w - 2));
        if (std::abs(y[i] - med) > opt.threshold_sigmas * sd) bad[i] = 1;
    }

    DespikeResult out{in, {}};
    const auto& x = in.wavelengths;
    for (std::size_t i = 0; i < n; ++i) {
        if (!bad[i]) continue;
        out.replaced.push_back(i);
        std::ptrdiff_t l = static_cast<std::ptrdiff_t>(i) - 1;
        while (l >= 0 && bad[static_cast<std::size_t>(l)]) --l;
        std::size_t r = i + 1;
        while (r < n && bad[r]) ++r;
        if (l < 0 && r >= n) throw DomainError("despike: every point was flagged");
        if (l < 0) {
            out.trace.counts[i] = y[r];
        } else if (r >= n) {
            out.trace.counts[i] = y[static_cast<std::size_t>(l)];
        } else {
            const auto li = static_cast<std::size_t>(l);
            const double f = (x[i] - x[li]) / (x[r] - x[li]);
            out.trace.counts[i] = y[li] + f * (y[r] - y[li]);
        }
    }
    return out;
}

inline SpectrumTrace subtract_offset(SpectrumTrace t, double dark_level) {
    for (double& c : t.counts) c -= dark_level;
    return t;
}

// Median of the counts inside a window known to carry no signal.
inline double estimate_offset(const SpectrumTrace& t, Window signal_free) {
    const auto [first, last] = window_range(t.wavelengths, signal_free);
    if (first >= last) throw DomainError("estimate_offset: no samples in the signal-free window");
    std::vector<double> v(t.counts.begin() + static_cast<std::ptrdiff_t>(first),
                          t.counts.begin() + static_cast<std::ptrdiff_t>(last));
    return detail::median_of(v);
}

} // namespace nvcharge::spectra
