#pragma once

// Two-basis decomposition of NV photoluminescence into NV0 and NV- parts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "nvcharge/errors.hpp"
#include "nvcharge/rng.hpp"
#include "nvcharge/spectrum.hpp"

namespace nvcharge::spectra {

inline constexpr Window kMinimizeWindow{500.0, 600.0};
inline constexpr Window kNormalizeWindow{500.0, 900.0};

// NV- to NV0 PL brightness per centre: literature value and the value
// estimated from repetition-rate difference spectra.
inline constexpr double kBrightnessLiterature = 2.5;
inline constexpr double kBrightnessMeasured = 1.8;

struct BasisPair {
    SpectrumTrace basis_zero;
    SpectrumTrace basis_minus;
    Window normalize_window = kNormalizeWindow;
};

enum class Objective { L1, L2 };

struct BasisExtraction {
    BasisPair basis;
    double a_star = 0.0;
    // False when total - a* pure_zero has (numerically) zero integral over
    // the normalisation window; basis_minus is then left unscaled.
    bool minus_normalized = true;
};

// Minimiser of sum_i w_i |t_i - a z_i|: the weighted median of t_i / z_i with
// weights w_i |z_i|. Exact; lower median on ties.
inline double l1_scale(const std::vector<double>& t, const std::vector<double>& z, const std::vector<double>& w) {
    struct Item {
        double ratio;
        double weight;
    };
    std::vector<Item> items;
    double total = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double wz = w[i] * std::abs(z[i]);
        if (wz > 0.0) {
            items.push_back({t[i] / z[i], wz});
            total += wz;
        }
    }
    if (items.empty()) throw DomainError("extract_basis: NV0 spectrum is zero on the minimisation window");
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.ratio < b.ratio; });
    double acc = 0.0;
    for (const auto& it : items) {
        acc += it.weight;
        if (acc >= 0.5 * total) return it.ratio;
    }
    return items.back().ratio;
}

inline double l2_scale(const std::vector<double>& t, const std::vector<double>& z, const std::vector<double>& w) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        num += w[i] * t[i] * z[i];
        den += w[i] * z[i] * z[i];
    }
    if (!(den > 0.0)) throw DomainError("extract_basis: NV0 spectrum is zero on the minimisation window");
    return num / den;
}

inline SpectrumTrace normalized_to_window(SpectrumTrace t, Window w, bool* ok = nullptr) {
    const double area = trapz(t, w);
    double scale = 0.0;
    for (double c : t.counts) scale = std::max(scale, std::abs(c));
    const bool good = std::isfinite(area) && std::abs(area) > 1e-12 * scale * w.width() && area != 0.0;
    if (ok) *ok = good;
    if (good)
        for (double& c : t.counts) c /= area;
    return t;
}

// basis_minus = total - a* pure_zero where a* minimises the chosen norm of
// that difference over `minimize`; both bases are then scaled to unit
// trapezoidal area over `normalize`.
inline BasisExtraction extract_basis(const SpectrumTrace& pure_zero, const SpectrumTrace& total,
                                     Window minimize = kMinimizeWindow, Window normalize = kNormalizeWindow,
                                     Objective objective = Objective::L1) {
    pure_zero.validate();
    total.validate();
    if (!same_grid(pure_zero, total)) throw DomainError("extract_basis: traces must share a wavelength grid");
    require_covers(total, minimize, "extract_basis");
    require_covers(total, normalize, "extract_basis");

    const auto w = trapz_weights(total.wavelengths, minimize);
    const double a = objective == Objective::L1 ? l1_scale(total.counts, pure_zero.counts, w)
                                                : l2_scale(total.counts, pure_zero.counts, w);
    BasisExtraction out;
    out.a_star = a;
    SpectrumTrace minus = total;
    for (std::size_t i = 0; i < minus.size(); ++i) minus.counts[i] = total.counts[i] - a * pure_zero.counts[i];
    bool zero_ok = false;
    out.basis.basis_zero = normalized_to_window(pure_zero, normalize, &zero_ok);
    if (!zero_ok) throw DomainError("extract_basis: NV0 spectrum has zero area over the normalisation window");
    out.basis.basis_minus = normalized_to_window(std::move(minus), normalize, &out.minus_normalized);
    out.basis.normalize_window = normalize;
    return out;
}

struct DecompositionResult {
    double a = 0.0;
    double b = 0.0;
    double residual_rms = 0.0;
    double intensity_ratio = 0.0; // b / a, +inf when a = 0 < b
};

// Non-negative least squares for trace ~ a basis_zero + b basis_minus over
// the basis normalisation window (plain sum over grid points).
inline DecompositionResult decompose(const SpectrumTrace& trace, const BasisPair& basis) {
    if (!same_grid(trace, basis.basis_zero) || !same_grid(trace, basis.basis_minus))
        throw DomainError("decompose: trace and bases must share a wavelength grid");
    const auto [first, last] = window_range(trace.wavelengths, basis.normalize_window);
    if (last - first < 2) throw DomainError("decompose: fewer than 2 points in the normalisation window");

    double zz = 0.0, mm = 0.0, zm = 0.0, tz = 0.0, tm = 0.0, tt = 0.0;
    for (std::size_t i = first; i < last; ++i) {
        const double z = basis.basis_zero.counts[i], m = basis.basis_minus.counts[i], t = trace.counts[i];
        zz += z * z;
        mm += m * m;
        zm += z * m;
        tz += t * z;
        tm += t * m;
        tt += t * t;
    }
    if (!(zz > 0.0) || !(mm > 0.0)) throw ConditioningError("decompose: a basis spectrum is zero on the window");
    const double det = zz * mm - zm * zm;
    if (det <= 1e-10 * zz * mm) throw ConditioningError("decompose: basis spectra are (nearly) collinear");

    // Unconstrained optimum, then the two faces of the non-negative quadrant.
    double a = (tz * mm - tm * zm) / det;
    double b = (tm * zz - tz * zm) / det;
    if (a < 0.0 || b < 0.0) {
        const double a_only = std::max(tz / zz, 0.0);
        const double b_only = std::max(tm / mm, 0.0);
        const double cost_a = tt - 2.0 * a_only * tz + a_only * a_only * zz;
        const double cost_b = tt - 2.0 * b_only * tm + b_only * b_only * mm;
        if (cost_a <= cost_b) {
            a = a_only;
            b = 0.0;
        } else {
            a = 0.0;
            b = b_only;
        }
    }
    DecompositionResult r;
    r.a = a;
    r.b = b;
    double ss = 0.0;
    for (std::size_t i = first; i < last; ++i) {
        const double d = trace.counts[i] - a * basis.basis_zero.counts[i] - b * basis.basis_minus.counts[i];
        ss += d * d;
    }
    r.residual_rms = std::sqrt(ss / static_cast<double>(last - first));
    r.intensity_ratio = a > 0.0 ? b / a : (b > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    return r;
}

struct NoiseStudyRow {
    double sigma = 0.0;
    double b = 0.0;
    double mean_abs_error = 0.0;
    double std_abs_error = 0.0;
    std::size_t trials = 0;
};

// Monte Carlo of decompose on (1-b) basis_zero + b basis_minus plus white
// Gaussian noise. sigma is relative to the mean basis level over the
// normalisation window (1 / window width for unit-area bases). Trial k of
// cell (i, j) draws from derive_seed(seed, i, j, k), so cells are independent
// of evaluation order.
inline std::vector<NoiseStudyRow> noise_robustness_study(const BasisPair& basis, const std::vector<double>& sigmas,
                                                         const std::vector<double>& b_values, std::size_t trials,
                                                         std::uint64_t seed) {
    if (trials < 10) throw DomainError("noise_robustness_study: need at least 10 trials");
    if (!same_grid(basis.basis_zero, basis.basis_minus)) throw DomainError("noise_robustness_study: bases differ in grid");
    const double level = 1.0 / basis.normalize_window.width();
    std::vector<NoiseStudyRow> rows;
    SpectrumTrace mix = basis.basis_zero;
    std::vector<double> errs(trials);
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        if (!(sigmas[i] >= 0.0)) throw DomainError("noise_robustness_study: sigma must be >= 0");
        for (std::size_t j = 0; j < b_values.size(); ++j) {
            const double b = b_values[j];
            if (!(b >= 0.0 && b <= 1.0)) throw DomainError("noise_robustness_study: b must lie in [0, 1]");
            for (std::size_t k = 0; k < trials; ++k) {
                rng::CounterRng g(rng::derive_seed(seed, i, j, k));
                for (std::size_t p = 0; p < mix.size(); ++p) {
                    mix.counts[p] = (1.0 - b) * basis.basis_zero.counts[p] + b * basis.basis_minus.counts[p] +
                                    sigmas[i] * level * g.normal();
                }
                errs[k] = std::abs(decompose(mix, basis).b - b);
            }
            NoiseStudyRow row;
            row.sigma = sigmas[i];
            row.b = b;
            row.trials = trials;
            row.mean_abs_error = std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(trials);
            double ss = 0.0;
            for (double e : errs) ss += (e - row.mean_abs_error) * (e - row.mean_abs_error);
            row.std_abs_error = std::sqrt(ss / static_cast<double>(trials - 1));
            rows.push_back(row);
        }
    }
    return rows;
}

inline double intensity_to_population_ratio(double intensity_ratio, double brightness_factor = kBrightnessLiterature) {
    if (!(brightness_factor > 0.0)) throw DomainError("intensity_to_population_ratio: brightness factor must be > 0");
    return intensity_ratio / brightness_factor;
}

struct IntrinsicRatioOptions {
    // Pairs with |delta a| below this fraction of the reference a + b are skipped.
    double min_relative_delta = 1e-6;
    // Relative spread (std / mean) above which the pairwise constants are
    // flagged as inconsistent with a conserved two-state population.
    double spread_threshold = 0.05;
};

struct IntrinsicRatioEstimate {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double std_dev = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> pair_constants;
    std::vector<std::size_t> skipped; // indices into `others`
    bool consistent = false;
    std::vector<std::string> warnings;
};

// For each spectrum, -(b_i - b_ref)/(a_i - a_ref): the drop in NV- weight
// per unit gain in NV0 weight relative to the pump-off reference.
inline IntrinsicRatioEstimate estimate_intrinsic_ratio(const DecompositionResult& reference,
                                                       const std::vector<DecompositionResult>& others,
                                                       const IntrinsicRatioOptions& opt = {}) {
    if (others.empty()) throw DomainError("estimate_intrinsic_ratio: need at least one non-reference spectrum");
    IntrinsicRatioEstimate out;
    const double scale = std::max(reference.a + reference.b, 1e-300);
    for (std::size_t i = 0; i < others.size(); ++i) {
        const double da = others[i].a - reference.a;
        const double db = others[i].b - reference.b;
        if (std::abs(da) <= opt.min_relative_delta * scale) {
            out.skipped.push_back(i);
            out.warnings.push_back("spectrum " + std::to_string(i) + ": NV0 weight unchanged, pair skipped");
            continue;
        }
        out.pair_constants.push_back(-db / da);
    }
    const auto n = out.pair_constants.size();
    if (n == 0) {
        out.warnings.push_back("no usable pairs");
        return out;
    }
    out.mean = std::accumulate(out.pair_constants.begin(), out.pair_constants.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double c : out.pair_constants) ss += (c - out.mean) * (c - out.mean);
    out.std_dev = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    out.consistent = out.std_dev <= opt.spread_threshold * std::abs(out.mean);
    if (!out.consistent) out.warnings.push_back("pairwise constants spread beyond threshold; population may not be conserved");
    return out;
}

} // namespace nvcharge::spectra
