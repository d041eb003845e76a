#pragma once

// Explicit Runge-Kutta integrators for small fixed-size systems.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

#include "nvcharge/errors.hpp"

namespace nvcharge::ode {

template <std::size_t N>
using State = std::array<double, N>;

template <std::size_t N>
struct AdaptiveOptions {
    double rtol = 1e-8;
    State<N> atol{};
    // A proposed step is rejected if any component drops below -negative_slack[i].
    bool reject_negative = true;
    State<N> negative_slack{};
    double h_min = 0.0; // 0 -> 1e-14 * (span of the call)
    std::size_t max_steps = 50'000'000;
};

struct StepStats {
    std::size_t accepted = 0;
    std::size_t rejected_error = 0;
    std::size_t rejected_negative = 0;
};

namespace detail {

template <std::size_t N>
State<N> axpy(const State<N>& y, double h, std::initializer_list<std::pair<double, const State<N>*>> terms) {
    State<N> out = y;
    for (const auto& [c, k] : terms) {
        if (c == 0.0) continue;
        for (std::size_t i = 0; i < N; ++i) out[i] += h * c * (*k)[i];
    }
    return out;
}

} // namespace detail

// Dormand-Prince 5(4) with FSAL and standard step-size control. Integrates a
// smooth system from t0 to t1; `h` is the initial trial step on entry (<= 0 to
// pick one) and the last accepted proposal on exit, so consecutive calls over
// adjacent segments keep their step history. `on_step(t, y)` sees every
// accepted step.
template <std::size_t N, class Rhs, class OnStep>
State<N> integrate_dopri5(Rhs&& f, double t0, double t1, State<N> y, const AdaptiveOptions<N>& opt, double& h,
                          StepStats& stats, OnStep&& on_step) {
    if (t1 <= t0) return y;
    const double span = t1 - t0;
    const double h_min = opt.h_min > 0.0 ? opt.h_min : 1e-14 * std::max(span, std::abs(t1));

    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // b - b_hat
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;

    State<N> k1 = f(t0, y);
    if (!(h > 0.0)) {
        double d0 = 0.0, d1 = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sc = opt.atol[i] + opt.rtol * std::abs(y[i]);
            d0 = std::max(d0, std::abs(y[i]) / sc);
            d1 = std::max(d1, std::abs(k1[i]) / sc);
        }
        h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
    }
    h = std::min(h, span);

    double t = t0;
    std::size_t steps = 0;
    while (t < t1) {
        if (++steps > opt.max_steps) throw IntegrationError("dopri5: step budget exhausted", t);
        bool last = false;
        double hs = h;
        if (t + hs >= t1 || t1 - (t + hs) < h_min) {
            hs = t1 - t;
            last = true;
        }

        const State<N> k2 = f(t + c2 * hs, detail::axpy<N>(y, hs, {{a21, &k1}}));
        const State<N> k3 = f(t + c3 * hs, detail::axpy<N>(y, hs, {{a31, &k1}, {a32, &k2}}));
        const State<N> k4 = f(t + c4 * hs, detail::axpy<N>(y, hs, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
        const State<N> k5 =
            f(t + c5 * hs, detail::axpy<N>(y, hs, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
        const State<N> k6 =
            f(t + hs, detail::axpy<N>(y, hs, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
        const State<N> y_new =
            detail::axpy<N>(y, hs, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
        const double t_new = last ? t1 : t + hs;
        const State<N> k7 = f(t_new, y_new);

        double err = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double ei = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sc = opt.atol[i] + opt.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
            err += (ei / sc) * (ei / sc);
        }
        err = std::sqrt(err / static_cast<double>(N));
        if (!std::isfinite(err)) err = 1e10;

        bool negative = false;
        if (opt.reject_negative) {
            for (std::size_t i = 0; i < N; ++i) negative = negative || y_new[i] < -opt.negative_slack[i];
        }

        if (err <= 1.0 && !negative) {
            t = t_new;
            y = y_new;
            k1 = k7;
            ++stats.accepted;
            on_step(t, y);
            const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            if (!last) h = hs * fac;
            else h = std::max(h, hs * fac);
        } else {
            if (negative) {
                ++stats.rejected_negative;
                h = 0.5 * hs;
            } else {
                ++stats.rejected_error;
                h = hs * std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
            }
            if (h < h_min) throw IntegrationError("dopri5: step size underflow", t);
        }
    }
    return y;
}

template <std::size_t N, class Rhs>
State<N> integrate_dopri5(Rhs&& f, double t0, double t1, State<N> y, const AdaptiveOptions<N>& opt, double& h,
                          StepStats& stats) {
    return integrate_dopri5<N>(std::forward<Rhs>(f), t0, t1, y, opt, h, stats, [](double, const State<N>&) {});
}

// Classical fourth-order Runge-Kutta with `steps` equal steps.
template <std::size_t N, class Rhs>
State<N> integrate_rk4(Rhs&& f, double t0, double t1, State<N> y, std::size_t steps) {
    if (t1 <= t0 || steps == 0) return y;
    const double h = (t1 - t0) / static_cast<double>(steps);
    for (std::size_t s = 0; s < steps; ++s) {
        const double t = t0 + static_cast<double>(s) * h;
        const State<N> k1 = f(t, y);
        const State<N> k2 = f(t + 0.5 * h, detail::axpy<N>(y, h, {{0.5, &k1}}));
        const State<N> k3 = f(t + 0.5 * h, detail::axpy<N>(y, h, {{0.5, &k2}}));
        const State<N> k4 = f(t + h, detail::axpy<N>(y, h, {{1.0, &k3}}));
        y = detail::axpy<N>(y, h, {{1.0 / 6, &k1}, {1.0 / 3, &k2}, {1.0 / 3, &k3}, {1.0 / 6, &k4}});
    }
    return y;
}

} // namespace nvcharge::ode
