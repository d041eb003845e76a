#pragma once

// Two-state (NV- / NV0) charge kinetics under a pulsed pump and a CW probe.
//
// The reduced model is dN/dt = G(t) N with N = (N_minus, N_zero) and
//
//     G = [ -plus   minus ]
//         [  plus  -minus ]
//
// where `plus` converts NV- -> NV0 and `minus` converts NV0 -> NV-. Rates are
// piecewise constant: (nu+, nu-) for 0 <= t mod T < delta (pump on) and
// (kappa+, kappa-) for the rest of the period.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "nvcharge/errors.hpp"

namespace nvcharge::kinetics {

struct RateSet {
    double nu_plus = 0.0;     // NV- -> NV0 while the pump is on [1/s]
    double nu_minus = 0.0;    // NV0 -> NV- while the pump is on [1/s]
    double kappa_plus = 0.0;  // NV- -> NV0 while the pump is off [1/s]
    double kappa_minus = 0.0; // NV0 -> NV- while the pump is off [1/s]

    double nu() const { return nu_plus + nu_minus; }
    double kappa() const { return kappa_plus + kappa_minus; }

    void validate() const {
        for (double r : {nu_plus, nu_minus, kappa_plus, kappa_minus}) {
            if (!(r >= 0.0) || !std::isfinite(r))
                throw DomainError("RateSet: rates must be finite and non-negative");
        }
    }
};

struct PulseSchedule {
    double delta = 0.0;  // pump pulse length [s]
    double period = 0.0; // repetition period [s]

    void validate() const {
        if (!(delta > 0.0) || !(period > delta) || !std::isfinite(period))
            throw DomainError("PulseSchedule: require 0 < delta < period");
    }
};

struct PopulationPair {
    double n_minus = 1.0;
    double n_zero = 0.0;

    double total() const { return n_minus + n_zero; }
};

// Rates split into probe-driven (gamma_eff) and pump-driven (duv) parts.
struct EffectiveRates {
    double gamma_eff_plus = 0.0;
    double gamma_eff_minus = 0.0;
    double duv_plus = 0.0;
    double duv_minus = 0.0;

    void validate() const {
        for (double r : {gamma_eff_plus, gamma_eff_minus, duv_plus, duv_minus}) {
            if (!(r >= 0.0) || !std::isfinite(r))
                throw DomainError("EffectiveRates: rates must be finite and non-negative");
        }
    }
};

// Column-stochastic 2x2 matrix acting on (N_minus, N_zero).
struct Propagator2x2 {
    double m00 = 1.0, m01 = 0.0;
    double m10 = 0.0, m11 = 1.0;

    static Propagator2x2 identity() { return {}; }

    PopulationPair apply(const PopulationPair& n) const {
        return {m00 * n.n_minus + m01 * n.n_zero, m10 * n.n_minus + m11 * n.n_zero};
    }

    Propagator2x2 operator*(const Propagator2x2& rhs) const {
        return {m00 * rhs.m00 + m01 * rhs.m10, m00 * rhs.m01 + m01 * rhs.m11,
                m10 * rhs.m00 + m11 * rhs.m10, m10 * rhs.m01 + m11 * rhs.m11};
    }

    Eigen::Matrix2d matrix() const {
        Eigen::Matrix2d m;
        m << m00, m01, m10, m11;
        return m;
    }
};

// exp(G dt) for constant rates. Off-diagonals are formed with expm1 and the
// diagonals as their complements, so every column sums to one.
inline Propagator2x2 propagator(double plus_rate, double minus_rate, double dt) {
    if (!(plus_rate >= 0.0) || !(minus_rate >= 0.0) || !(dt >= 0.0))
        throw DomainError("propagator: rates and dt must be non-negative");
    const double total = plus_rate + minus_rate;
    if (total == 0.0 || dt == 0.0) return Propagator2x2::identity();
    if (std::isinf(dt)) {
        const double fm = minus_rate / total, fp = plus_rate / total;
        return {fm, fm, fp, fp};
    }
    const double decay = -std::expm1(-total * dt); // 1 - exp(-total dt)
    const double m10 = plus_rate / total * decay;
    const double m01 = minus_rate / total * decay;
    return {1.0 - m10, m01, m10, 1.0 - m01};
}

// Pump-off propagator applied after the pump-on propagator.
inline Propagator2x2 full_period_operator(const RateSet& rates, const PulseSchedule& sched) {
    rates.validate();
    sched.validate();
    return propagator(rates.kappa_plus, rates.kappa_minus, sched.period - sched.delta) *
           propagator(rates.nu_plus, rates.nu_minus, sched.delta);
}

// Non-unit eigenvalue of the full-period operator; the distance to the
// quasi-equilibrium orbit contracts by this factor each period.
inline double second_eigenvalue(const RateSet& rates, const PulseSchedule& sched) {
    rates.validate();
    sched.validate();
    return std::exp(-rates.nu() * sched.delta - rates.kappa() * (sched.period - sched.delta));
}

namespace detail {

inline void require_unique_equilibrium(const RateSet& rates) {
    if (rates.nu() == 0.0 && rates.kappa() == 0.0)
        throw DomainError("quasi_equilibrium: all rates are zero, equilibrium is not unique");
}

inline PopulationPair normalized(double a, double b) {
    const double s = a + b;
    return {a / s, b / s};
}

} // namespace detail

// Closed-form start-of-pulse fixed point. The textbook expression is scaled by
// exp(-kappa T) and rewritten with expm1, which removes the zeroth-order
// cancellation. Degenerates (both components vanish) when nu = 0 or kappa = 0.
inline PopulationPair quasi_equilibrium_closed_form(const RateSet& rates, const PulseSchedule& sched) {
    rates.validate();
    sched.validate();
    detail::require_unique_equilibrium(rates);
    const double nu = rates.nu(), kappa = rates.kappa();
    const double off = sched.period - sched.delta;
    const double e1m = std::expm1(-nu * sched.delta - kappa * off);
    const double e2m = std::expm1(-kappa * off);
    const double cross = rates.nu_plus * rates.kappa_minus - rates.nu_minus * rates.kappa_plus;
    const double x = e1m * kappa * rates.nu_minus + e2m * cross;
    const double y = e1m * kappa * rates.nu_plus - e2m * cross;
    if (x == 0.0 && y == 0.0)
        throw DomainError("quasi_equilibrium_closed_form: degenerate (nu = 0 or kappa = 0)");
    return detail::normalized(x, y);
}

// Fixed point of the full-period operator from a general eigen-decomposition.
inline PopulationPair quasi_equilibrium_eigen(const RateSet& rates, const PulseSchedule& sched) {
    detail::require_unique_equilibrium(rates);
    const Eigen::Matrix2d m = full_period_operator(rates, sched).matrix();
    Eigen::EigenSolver<Eigen::Matrix2d> es(m);
    const auto values = es.eigenvalues();
    const Eigen::Index k = std::abs(values(0) - 1.0) <= std::abs(values(1) - 1.0) ? 0 : 1;
    const Eigen::Vector2d v = es.eigenvectors().col(k).real();
    return detail::normalized(v(0), v(1));
}

// Start-of-pulse quasi-equilibrium N*, normalized to unit total. Uses the
// closed form and checks it against the eigen route; falls back to the eigen
// route where the closed form degenerates.
inline PopulationPair quasi_equilibrium(const RateSet& rates, const PulseSchedule& sched) {
    const PopulationPair numeric = quasi_equilibrium_eigen(rates, sched);
    const bool degenerate = rates.nu() == 0.0 || rates.kappa() == 0.0;
    if (degenerate) return numeric;
    const PopulationPair closed = quasi_equilibrium_closed_form(rates, sched);
    const double gap = 1.0 - second_eigenvalue(rates, sched);
    const double tol = 1e-8 + 1e-13 / std::max(gap, 1e-300);
    if (std::abs(closed.n_minus - numeric.n_minus) > tol)
        throw std::logic_error("quasi_equilibrium: closed form and eigenvector disagree");
    return closed;
}

// State right after the pump pulse, the other extremum of the orbit.
inline PopulationPair post_pulse_state(const RateSet& rates, const PulseSchedule& sched) {
    return propagator(rates.nu_plus, rates.nu_minus, sched.delta).apply(quasi_equilibrium(rates, sched));
}

// Mean of the two orbit extrema, N* and P_nu(delta) N*, as a ratio N-/N0.
inline double average_ratio_extrema(const RateSet& rates, const PulseSchedule& sched) {
    const PopulationPair start = quasi_equilibrium(rates, sched);
    const PopulationPair after = propagator(rates.nu_plus, rates.nu_minus, sched.delta).apply(start);
    const double den = start.n_zero + after.n_zero;
    if (!(den > 0.0)) throw DomainError("average_ratio: NV0 population vanishes, ratio is unbounded");
    return (start.n_minus + after.n_minus) / den;
}

// Closed-form extrema-average ratio <N->/<N0>. Evaluated with the exponentials
// scaled by exp(-nu delta - kappa T); cross-checked against the propagator
// route, which also covers the nu = 0 case where the closed form is 0/0.
inline double average_ratio_exact(const RateSet& rates, const PulseSchedule& sched) {
    rates.validate();
    sched.validate();
    detail::require_unique_equilibrium(rates);
    const double nu = rates.nu(), kappa = rates.kappa();
    const double np = rates.nu_plus, nm = rates.nu_minus;
    const double kp = rates.kappa_plus, km = rates.kappa_minus;
    const double off = sched.period - sched.delta;
    const double x = std::expm1(-nu * sched.delta) - std::expm1(-kappa * off);
    const double y = std::expm1(-nu * sched.delta - kappa * off);
    const double cross = nm * kp - np * km;
    const double num = x * cross + y * (np * km + nm * (kp + 2.0 * km));
    const double den = -x * cross + y * (nm * kp + np * (2.0 * kp + km));
    const double via_extrema = average_ratio_extrema(rates, sched);
    if (num == 0.0 && den == 0.0) return via_extrema;
    if (den == 0.0) throw DomainError("average_ratio_exact: NV0 population vanishes");
    const double closed = num / den;
    if (std::abs(closed - via_extrema) > 1e-6 * std::abs(via_extrema) + 1e-300)
        throw std::logic_error("average_ratio_exact: closed form and extrema route disagree");
    return closed;
}

// Population integrated over [t0, t0 + dt] under constant rates, starting from n.
inline PopulationPair window_integral(double plus_rate, double minus_rate, double dt, const PopulationPair& n) {
    const double total = plus_rate + minus_rate;
    if (total == 0.0) return {n.n_minus * dt, n.n_zero * dt};
    const double s = n.total();
    const double eq_minus = s * minus_rate / total;
    const double transient = -std::expm1(-total * dt) / total;
    const double dev = n.n_minus - eq_minus;
    const double int_minus = eq_minus * dt + dev * transient;
    return {int_minus, s * dt - int_minus};
}

// True time-averaged ratio over one quasi-equilibrium period.
inline double average_ratio_integral(const RateSet& rates, const PulseSchedule& sched) {
    const PopulationPair start = quasi_equilibrium(rates, sched);
    const PopulationPair after = propagator(rates.nu_plus, rates.nu_minus, sched.delta).apply(start);
    const PopulationPair on = window_integral(rates.nu_plus, rates.nu_minus, sched.delta, start);
    const PopulationPair off =
        window_integral(rates.kappa_plus, rates.kappa_minus, sched.period - sched.delta, after);
    const double den = on.n_zero + off.n_zero;
    if (!(den > 0.0)) throw DomainError("average_ratio_integral: NV0 population vanishes");
    return (on.n_minus + off.n_minus) / den;
}

// (duv- delta + gamma- T) / (duv+ delta + gamma+ T)
inline double average_ratio_linearized(const EffectiveRates& eff, const PulseSchedule& sched) {
    eff.validate();
    sched.validate();
    const double num = eff.duv_minus * sched.delta + eff.gamma_eff_minus * sched.period;
    const double den = eff.duv_plus * sched.delta + eff.gamma_eff_plus * sched.period;
    if (!(den > 0.0)) throw DomainError("average_ratio_linearized: denominator is zero");
    return num / den;
}

inline RateSet effective_to_window_rates(const EffectiveRates& eff) {
    eff.validate();
    return {eff.gamma_eff_plus + eff.duv_plus, eff.gamma_eff_minus + eff.duv_minus, eff.gamma_eff_plus,
            eff.gamma_eff_minus};
}

// Pulses whose start time k*T lies in [on, off) fire; all others are skipped
// and the probe-only rates apply for the whole period.
struct PumpWindow {
    double on = -std::numeric_limits<double>::infinity();
    double off = std::numeric_limits<double>::infinity();

    bool fires(double pulse_start) const { return pulse_start >= on && pulse_start < off; }
};

// Piecewise-analytic evolution sampled at t_grid (ascending, >= 0). The initial
// state is taken at t = 0.
inline std::vector<PopulationPair> simulate_time_trace(const RateSet& rates, const PulseSchedule& sched,
                                                       const PopulationPair& init, std::span<const double> t_grid,
                                                       const PumpWindow& window = {}) {
    rates.validate();
    sched.validate();
    if (init.n_minus < 0.0 || init.n_zero < 0.0) throw DomainError("simulate_time_trace: negative initial state");
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (!(t_grid[i] >= 0.0)) throw DomainError("simulate_time_trace: times must be >= 0");
        if (i > 0 && t_grid[i] < t_grid[i - 1]) throw DomainError("simulate_time_trace: time grid is not sorted");
    }

    const double period = sched.period;
    std::vector<PopulationPair> out;
    out.reserve(t_grid.size());

    PopulationPair state = init;
    double t = 0.0;
    long long k = 0;          // current period index
    bool in_pulse = window.fires(0.0);
    double boundary = in_pulse ? sched.delta : period;

    auto step = [&](double dt) {
        if (dt <= 0.0) return;
        state = in_pulse ? propagator(rates.nu_plus, rates.nu_minus, dt).apply(state)
                         : propagator(rates.kappa_plus, rates.kappa_minus, dt).apply(state);
    };

    for (double target : t_grid) {
        while (boundary <= target) {
            step(boundary - t);
            t = boundary;
            if (in_pulse) {
                in_pulse = false;
                boundary = static_cast<double>(k + 1) * period;
            } else {
                ++k;
                const double start = static_cast<double>(k) * period;
                in_pulse = window.fires(start);
                boundary = in_pulse ? start + sched.delta : static_cast<double>(k + 1) * period;
            }
        }
        step(target - t);
        t = target;
        out.push_back(state);
    }
    return out;
}

enum class EdgePolicy {
    valid,   // emit only fully covered windows
    reflect, // pad the start by reflection so output length equals input length
};

struct RollingAverage {
    std::vector<double> values;
    // Input index of the last sample in the first output window. Output i
    // averages input samples [i + offset - width + 1, i + offset].
    std::size_t offset = 0;
    std::size_t width = 0;
};

// Trailing boxcar average spanning one period of a uniformly sampled trace.
inline RollingAverage rolling_period_average(std::span<const double> values, double dt, double period,
                                             EdgePolicy policy = EdgePolicy::valid) {
    if (!(dt > 0.0) || !(period > 0.0)) throw DomainError("rolling_period_average: dt and period must be > 0");
    const auto width = static_cast<std::size_t>(std::llround(period / dt));
    if (width < 1) throw DomainError("rolling_period_average: window shorter than one sample");
    if (width > values.size()) throw DomainError("rolling_period_average: window longer than trace");

    RollingAverage out;
    out.width = width;
    const std::size_t n = values.size();
    auto sample = [&](long long i) -> double {
        // reflection about index 0 (without repeating the edge sample)
        if (i < 0) i = -i;
        return values[static_cast<std::size_t>(std::min<long long>(i, static_cast<long long>(n) - 1))];
    };
    const long long first = policy == EdgePolicy::valid ? static_cast<long long>(width) - 1 : 0;
    out.offset = static_cast<std::size_t>(first);
    out.values.reserve(n - static_cast<std::size_t>(first));
    for (long long end = first; end < static_cast<long long>(n); ++end) {
        long double sum = 0.0L;
        for (long long j = end - static_cast<long long>(width) + 1; j <= end; ++j) sum += sample(j);
        out.values.push_back(static_cast<double>(sum / static_cast<long double>(width)));
    }
    return out;
}

} // namespace nvcharge::kinetics
