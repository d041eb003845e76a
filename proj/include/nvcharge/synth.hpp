#pragma once

// Forward models with controlled noise: spectra, NV basis stand-ins,
// photon arrival streams, decay histograms and sweep tables.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nvcharge/decay.hpp"
#include "nvcharge/decomposition.hpp"
#include "nvcharge/errors.hpp"
#include "nvcharge/lineshape.hpp"
#include "nvcharge/rng.hpp"
#include "nvcharge/spectrum.hpp"
#include "nvcharge/sweep_fit.hpp"

namespace nvcharge::synth {

using spectra::SpectrumTrace;

inline std::string fmt17(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

enum class Profile { Gaussian, Lorentzian, Voigt };

struct LineComponent {
    Profile profile = Profile::Gaussian;
    double center = 0.0; // nm
    double sigma = 0.0;  // nm, Gaussian std (Gaussian, Voigt)
    double gamma = 0.0;  // nm, Lorentzian HWHM (Lorentzian, Voigt)
    double area = 0.0;   // counts nm

    double operator()(double x) const {
        switch (profile) {
        case Profile::Gaussian:
            return area * spectra::gaussian(x - center, sigma);
        case Profile::Lorentzian:
            return area * spectra::lorentzian(x - center, gamma);
        case Profile::Voigt:
            break;
        }
        return area * spectra::voigt(x - center, sigma, gamma);
    }
};

enum class BackgroundKind { None, Constant, Linear, Rational };

struct Background {
    BackgroundKind kind = BackgroundKind::None;
    double c0 = 0.0; // Constant, Linear: c0 + c1 * lambda
    double c1 = 0.0;
    double b0 = 0.0; // Rational: b0 / (lambda - b1)
    double b1 = 0.0;

    double operator()(double x) const {
        switch (kind) {
        case BackgroundKind::None:
            return 0.0;
        case BackgroundKind::Constant:
            return c0;
        case BackgroundKind::Linear:
            return c0 + c1 * x;
        case BackgroundKind::Rational:
            break;
        }
        return b0 / (x - b1);
    }
};

// Smooth switch-on multiplying the line components: 0 below `start`, a cubic
// smoothstep over `width`, 1 above. width <= 0 disables it.
struct Taper {
    double start = 0.0;
    double width = 0.0;

    double operator()(double x) const {
        if (!(width > 0.0)) return 1.0;
        const double u = (x - start) / width;
        if (u <= 0.0) return 0.0;
        if (u >= 1.0) return 1.0;
        return u * u * (3.0 - 2.0 * u);
    }
};

struct LineshapeModel {
    std::vector<LineComponent> components;
    Background background;
    Taper taper;

    void validate() const {
        for (const auto& c : components) {
            if (!(c.area >= 0.0)) throw DomainError("LineshapeModel: component areas must be >= 0");
            const bool ok = c.profile == Profile::Gaussian     ? c.sigma > 0.0
                            : c.profile == Profile::Lorentzian ? c.gamma > 0.0
                                                               : (c.sigma >= 0.0 && c.gamma >= 0.0 && c.sigma + c.gamma > 0.0);
            if (!ok) throw DomainError("LineshapeModel: invalid component width");
        }
    }

    double operator()(double x) const {
        double s = 0.0;
        for (const auto& c : components) s += c(x);
        return taper(x) * s + background(x);
    }
};

struct NoiseModel {
    double gaussian_sigma = 0.0; // counts
    bool poisson = false;
    double spike_rate = 0.0;     // mean number of spikes per trace
    bool exact_spike_count = false; // use round(spike_rate) spikes instead of a Poisson draw
    double spike_min = 0.0;
    double spike_max = 0.0;
    std::uint64_t seed = 1;

    void validate() const {
        if (!(gaussian_sigma >= 0.0) || !(spike_rate >= 0.0) || !(spike_min >= 0.0) || !(spike_max >= spike_min))
            throw DomainError("NoiseModel: parameters must be non-negative with spike_min <= spike_max");
    }
};

// Independent streams per noise source so e.g. adding spikes leaves the
// Gaussian draws unchanged.
inline constexpr std::uint64_t kStreamPoisson = 1;
inline constexpr std::uint64_t kStreamGaussian = 2;
inline constexpr std::uint64_t kStreamSpikes = 3;
inline constexpr std::uint64_t kStreamArrivals = 4;
inline constexpr std::uint64_t kStreamHistogram = 5;
inline constexpr std::uint64_t kStreamSweep = 6;

struct SynthSpectrum {
    SpectrumTrace trace;
    std::vector<double> clean;
    std::vector<std::size_t> spike_indices; // ascending
    std::vector<double> spike_amplitudes;
};

inline std::vector<double> uniform_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi > lo)) throw DomainError("uniform_grid: need lo < hi and step > 0");
    const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + step * static_cast<double>(i);
    return g;
}

// Adds noise in a fixed order: Poisson resampling of the clean curve, then
// Gaussian read noise, then spikes at distinct indices.
inline SynthSpectrum add_noise(std::vector<double> grid, std::vector<double> clean, const NoiseModel& noise) {
    noise.validate();
    SynthSpectrum out;
    out.trace.wavelengths = std::move(grid);
    out.trace.counts = clean;
    out.clean = std::move(clean);
    const std::size_t n = out.clean.size();
    if (noise.poisson) {
        rng::CounterRng g(noise.seed, kStreamPoisson);
        for (std::size_t i = 0; i < n; ++i) out.trace.counts[i] = static_cast<double>(g.poisson(std::max(out.clean[i], 0.0)));
    }
    if (noise.gaussian_sigma > 0.0) {
        rng::CounterRng g(noise.seed, kStreamGaussian);
        for (std::size_t i = 0; i < n; ++i) out.trace.counts[i] += noise.gaussian_sigma * g.normal();
    }
    if (noise.spike_rate > 0.0) {
        rng::CounterRng g(noise.seed, kStreamSpikes);
        std::size_t k = noise.exact_spike_count ? static_cast<std::size_t>(std::llround(noise.spike_rate))
                                                : static_cast<std::size_t>(g.poisson(noise.spike_rate));
        k = std::min(k, n);
        std::vector<char> used(n, 0);
        std::vector<std::pair<std::size_t, double>> spikes;
        while (spikes.size() < k) {
            const auto idx = static_cast<std::size_t>(g.uniform() * static_cast<double>(n));
            if (idx >= n || used[idx]) continue;
            used[idx] = 1;
            spikes.emplace_back(idx, g.uniform(noise.spike_min, noise.spike_max));
        }
        std::sort(spikes.begin(), spikes.end());
        for (const auto& [idx, amp] : spikes) {
            out.trace.counts[idx] += amp;
            out.spike_indices.push_back(idx);
            out.spike_amplitudes.push_back(amp);
        }
    }
    auto& md = out.trace.metadata;
    md["noise.gaussian_sigma"] = fmt17(noise.gaussian_sigma);
    md["noise.poisson"] = noise.poisson ? "true" : "false";
    md["noise.seed"] = std::to_string(noise.seed);
    std::string idx;
    for (std::size_t i = 0; i < out.spike_indices.size(); ++i) idx += (i ? " " : "") + std::to_string(out.spike_indices[i]);
    md["truth.spike_indices"] = idx;
    return out;
}

inline SynthSpectrum generate_spectrum(const LineshapeModel& model, const std::vector<double>& grid, const NoiseModel& noise) {
    model.validate();
    if (grid.size() < 2) throw DomainError("generate_spectrum: need at least 2 grid points");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw DomainError("generate_spectrum: grid must be strictly increasing");
    if (model.background.kind == BackgroundKind::Rational && model.background.b1 >= grid.front() &&
        model.background.b1 <= grid.back())
        throw DomainError("generate_spectrum: background pole lies inside the grid");
    std::vector<double> clean(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) clean[i] = model(grid[i]);
    return add_noise(grid, std::move(clean), noise);
}

// Parametric stand-ins for the measured NV basis spectra: a ZPL plus a broad
// phonon sideband built from Gaussians given by peak height. The NV- shape is
// switched on above 600 nm so it has no support where the basis extraction
// minimises.
inline LineComponent gaussian_peak(double center, double sigma, double height) {
    return {Profile::Gaussian, center, sigma, 0.0, height * sigma * std::sqrt(2.0 * std::numbers::pi)};
}

inline LineshapeModel nv_zero_model() {
    LineshapeModel m;
    m.components = {gaussian_peak(575.0, 1.5, 0.25), gaussian_peak(605.0, 18.0, 1.0), gaussian_peak(640.0, 25.0, 0.8),
                    gaussian_peak(690.0, 35.0, 0.35)};
    return m;
}

inline LineshapeModel nv_minus_model() {
    LineshapeModel m;
    m.components = {gaussian_peak(637.0, 2.0, 0.3), gaussian_peak(665.0, 22.0, 1.0), gaussian_peak(700.0, 30.0, 0.9),
                    gaussian_peak(750.0, 40.0, 0.4)};
    m.taper = {600.0, 25.0};
    return m;
}

inline std::vector<double> nv_default_grid() { return uniform_grid(500.0, 900.0, 0.1); }

// Noiseless stand-in bases on `grid`, each scaled to unit area over the window.
inline spectra::BasisPair nv_basis(const std::vector<double>& grid, spectra::Window normalize = spectra::kNormalizeWindow) {
    const NoiseModel none{};
    spectra::BasisPair b;
    bool ok0 = false, ok1 = false;
    b.basis_zero = spectra::normalized_to_window(generate_spectrum(nv_zero_model(), grid, none).trace, normalize, &ok0);
    b.basis_minus = spectra::normalized_to_window(generate_spectrum(nv_minus_model(), grid, none).trace, normalize, &ok1);
    if (!ok0 || !ok1) throw DomainError("nv_basis: grid does not cover the normalisation window");
    b.basis_zero.metadata = {{"basis", "nv_zero"}};
    b.basis_minus.metadata = {{"basis", "nv_minus"}};
    b.normalize_window = normalize;
    return b;
}

inline SynthSpectrum generate_nv_mixture(const spectra::BasisPair& basis, double a, double b, const NoiseModel& noise) {
    if (!(a >= 0.0) || !(b >= 0.0)) throw DomainError("generate_nv_mixture: weights must be >= 0");
    if (!spectra::same_grid(basis.basis_zero, basis.basis_minus)) throw DomainError("generate_nv_mixture: bases differ in grid");
    std::vector<double> clean(basis.basis_zero.size());
    for (std::size_t i = 0; i < clean.size(); ++i)
        clean[i] = a * basis.basis_zero.counts[i] + b * basis.basis_minus.counts[i];
    SynthSpectrum s = add_noise(basis.basis_zero.wavelengths, std::move(clean), noise);
    s.trace.metadata["truth.a"] = fmt17(a);
    s.trace.metadata["truth.b"] = fmt17(b);
    return s;
}

// Piecewise-linear intensity curve [counts/s]; constant beyond its ends.
struct RateCurve {
    std::vector<double> t;
    std::vector<double> rate;

    void validate() const {
        if (t.empty() || t.size() != rate.size()) throw DomainError("RateCurve: need matching, non-empty t and rate");
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (!(rate[i] >= 0.0) || !std::isfinite(rate[i])) throw DomainError("RateCurve: rates must be finite and >= 0");
            if (i && !(t[i] > t[i - 1])) throw DomainError("RateCurve: times must increase");
        }
    }

    double operator()(double x) const {
        if (x <= t.front()) return rate.front();
        if (x >= t.back()) return rate.back();
        const auto it = std::upper_bound(t.begin(), t.end(), x);
        const auto k = static_cast<std::size_t>(it - t.begin());
        const double f = (x - t[k - 1]) / (t[k] - t[k - 1]);
        return rate[k - 1] + f * (rate[k] - rate[k - 1]);
    }

    double integral(double t0, double t1) const {
        // exact for the piecewise-linear curve: integrate over knot-aligned pieces
        std::vector<double> knots{t0};
        for (double x : t)
            if (x > t0 && x < t1) knots.push_back(x);
        knots.push_back(t1);
        double s = 0.0;
        for (std::size_t i = 1; i < knots.size(); ++i)
            s += 0.5 * (knots[i] - knots[i - 1]) * ((*this)(knots[i]) + (*this)(knots[i - 1]));
        return s;
    }
};

struct ArrivalProcess {
    RateCurve rate_curve;
    double window = 0.0; // s
    std::uint64_t seed = 1;
};

struct ArrivalStream {
    std::vector<double> times;
    double expected_count = 0.0;
};

// Inhomogeneous Poisson process on [0, window) by thinning a homogeneous
// process at the curve's maximum rate.
inline ArrivalStream generate_arrivals(const ArrivalProcess& proc) {
    proc.rate_curve.validate();
    if (!(proc.window > 0.0)) throw DomainError("generate_arrivals: window must be > 0");
    ArrivalStream out;
    out.expected_count = proc.rate_curve.integral(0.0, proc.window);
    const double rmax = *std::max_element(proc.rate_curve.rate.begin(), proc.rate_curve.rate.end());
    if (!(rmax > 0.0)) return out;
    rng::CounterRng g(proc.seed, kStreamArrivals);
    double t = 0.0;
    for (;;) {
        t += g.exponential(rmax);
        if (t >= proc.window) break;
        if (g.uniform() * rmax < proc.rate_curve(t)) out.times.push_back(t);
    }
    return out;
}

struct DecayTruth {
    double a0 = 1.0;
    std::array<double, 3> a{};
    std::array<double, 3> tau{}; // <= 0 marks an unused component
};

struct SynthHistogram {
    std::vector<double> t_centers;
    std::vector<double> counts;
    std::vector<double> expected;
    DecayTruth truth;
    double counts_scale = 0.0;
};

// Poisson counts with mean counts_scale * I(t) at bin centres. An infinite
// counts_scale returns I(t) itself (the noiseless limit of counts / scale).
inline SynthHistogram generate_decay_histogram(const DecayTruth& truth, double window, std::size_t n_bins,
                                               double counts_scale, std::uint64_t seed) {
    if (!(truth.a0 > 0.0)) throw DomainError("generate_decay_histogram: a0 must be > 0");
    if (!(counts_scale > 0.0)) throw DomainError("generate_decay_histogram: counts scale must be > 0");
    if (n_bins < 1 || !(window > 0.0)) throw DomainError("generate_decay_histogram: need window > 0 and n_bins >= 1");
    spectra::Histogram h;
    h.window = window;
    h.counts.assign(n_bins, 0.0);
    SynthHistogram out;
    out.t_centers = h.centers();
    out.truth = truth;
    out.counts_scale = counts_scale;
    const bool noiseless = std::isinf(counts_scale);
    rng::CounterRng g(seed, kStreamHistogram);
    for (double t : out.t_centers) {
        const double model = spectra::multi_exp_model(t, truth.a0, truth.a, truth.tau);
        if (!(model >= 0.0)) throw DomainError("generate_decay_histogram: model curve is negative");
        if (noiseless) {
            out.expected.push_back(model);
            out.counts.push_back(model);
        } else {
            out.expected.push_back(counts_scale * model);
            out.counts.push_back(static_cast<double>(g.poisson(counts_scale * model)));
        }
    }
    return out;
}

// Sweep tables with relative Gaussian noise; y_err carries the noise level.
// The noise scale is floored at 1% of the largest |y| so zero-valued points
// still get a finite uncertainty.
inline double sweep_noise_scale(double y, double y_max) { return std::max(std::abs(y), 1e-2 * y_max); }

inline std::vector<kinetics::SweepPoint> generate_rep_sweep(double a, double b, double c, const std::vector<double>& rates,
                                                            double rel_noise, std::uint64_t seed) {
    rng::CounterRng g(seed, kStreamSweep);
    std::vector<kinetics::SweepPoint> pts;
    double y_max = 0.0;
    for (double r : rates) {
        if (!(r > 0.0)) throw DomainError("generate_rep_sweep: rates must be > 0");
        y_max = std::max(y_max, std::abs(kinetics::repetition_model(r, a, b, c)));
    }
    for (double r : rates) {
        const double y = kinetics::repetition_model(r, a, b, c);
        const double err = rel_noise * sweep_noise_scale(y, y_max);
        pts.push_back({r, rel_noise > 0.0 ? y + err * g.normal() : y,
                       rel_noise > 0.0 ? err : std::numeric_limits<double>::quiet_NaN()});
    }
    return pts;
}

inline std::vector<kinetics::SweepPoint> generate_power_sweep(std::span<const double> coeffs, const std::vector<double>& powers,
                                                              double rel_noise, std::uint64_t seed) {
    if (coeffs.size() != 5) throw DomainError("generate_power_sweep: need 5 coefficients");
    rng::CounterRng g(seed, kStreamSweep);
    std::vector<kinetics::SweepPoint> pts;
    double y_max = 0.0;
    for (double p : powers) {
        if (!(p >= 0.0)) throw DomainError("generate_power_sweep: powers must be >= 0");
        y_max = std::max(y_max, std::abs(kinetics::power_model(p, coeffs)));
    }
    for (double p : powers) {
        const double y = kinetics::power_model(p, coeffs);
        const double err = rel_noise * sweep_noise_scale(y, y_max);
        pts.push_back({p, rel_noise > 0.0 ? y + err * g.normal() : y,
                       rel_noise > 0.0 ? err : std::numeric_limits<double>::quiet_NaN()});
    }
    return pts;
}

} // namespace nvcharge::synth
