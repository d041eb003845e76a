#pragma once

// Six-species charge model: NV-, NV0, N+, N0 defects exchanging free electrons
// (n) and holes (p), driven by probe photo-ionization and pump-generated
// electron-hole pairs.
//
//   dNV-/dt = -g- NV- + g0 NV0 + K0e n NV0 - K-h p NV-
//   dNV0/dt = -dNV-/dt
//   dN+/dt  =  gn N0 - Kne n N+ + Knh p N0
//   dN0/dt  = -dN+/dt
//   dn/dt   =  g- NV- - K0e n NV0 + gn N0 - Kne n N+ + G(t) - Keh n p
//   dp/dt   =  g0 NV0 - K-h p NV- - Knh p N0 + G(t) - Keh n p
//
// Total NV, total N and the net charge p - n - NV- + N+ are conserved.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "nvcharge/errors.hpp"
#include "nvcharge/kinetics.hpp"
#include "nvcharge/ode.hpp"

namespace nvcharge::kinetics {

// Rectangular generation pulses of height `amplitude` [cm^-3 s^-1] on
// [start + k*period, start + k*period + delta) for pulses allowed by `window`.
struct PulseTrain {
    double amplitude = 0.0;
    double delta = 0.0;
    double period = 0.0;
    double start = 0.0;
    PumpWindow window{};

    bool enabled() const { return amplitude > 0.0 && delta > 0.0 && period > 0.0; }

    double at(double t) const {
        if (!enabled() || t < start) return 0.0;
        const double k = std::floor((t - start) / period);
        const double pulse_start = start + k * period;
        return (t - pulse_start < delta && window.fires(pulse_start)) ? amplitude : 0.0;
    }

    // Pulse edges in the open interval (t0, t1).
    std::vector<double> edges(double t0, double t1) const {
        std::vector<double> out;
        if (!enabled()) return out;
        auto k = static_cast<long long>(std::floor((t0 - start) / period));
        if (k < 0) k = 0;
        for (;; ++k) {
            const double s = start + static_cast<double>(k) * period;
            if (s >= t1) break;
            if (!window.fires(s)) continue;
            for (double e : {s, s + delta})
                if (e > t0 && e < t1) out.push_back(e);
        }
        return out;
    }
};

struct FullModelParams {
    double gamma_minus = 0.0; // NV- photo-ionization [1/s]
    double gamma_zero = 0.0;  // NV0 -> NV- + h [1/s]
    double gamma_n = 0.0;     // N0 photo-ionization [1/s]
    double K0_e = 0.0;        // e capture by NV0 [cm^3/s]
    double Kminus_h = 0.0;    // h capture by NV- [cm^3/s]
    double Kn_e = 0.0;        // e capture by N+ [cm^3/s]
    double Kn_h = 0.0;        // h capture by N0 [cm^3/s]
    double K_eh = 0.0;        // e-h recombination [cm^3/s]
    PulseTrain duv{};

    void validate() const {
        for (double v : {gamma_minus, gamma_zero, gamma_n, K0_e, Kminus_h, Kn_e, Kn_h, K_eh, duv.amplitude}) {
            if (!(v >= 0.0) || !std::isfinite(v))
                throw DomainError("FullModelParams: coefficients must be finite and non-negative");
        }
        if (duv.amplitude > 0.0 && !(duv.delta > 0.0 && duv.period > duv.delta))
            throw DomainError("FullModelParams: pulse train requires 0 < delta < period");
    }
};

struct FullModelState {
    double N_nvm = 0.0;
    double N_nv0 = 0.0;
    double N_np = 0.0;
    double N_n0 = 0.0;
    double n_e = 0.0;
    double n_h = 0.0;

    double nv_total() const { return N_nvm + N_nv0; }
    double n_total() const { return N_np + N_n0; }
    double net_charge() const { return n_h - n_e - N_nvm + N_np; }

    std::array<double, 6> to_array() const { return {N_nvm, N_nv0, N_np, N_n0, n_e, n_h}; }
    static FullModelState from_array(const std::array<double, 6>& a) { return {a[0], a[1], a[2], a[3], a[4], a[5]}; }

    void validate() const {
        for (double v : to_array()) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("FullModelState: densities must be >= 0");
        }
    }
};

// Right-hand side for a given pump generation rate g [cm^-3 s^-1].
inline std::array<double, 6> full_model_rhs(const FullModelParams& p, double g, const std::array<double, 6>& y) {
    const double nvm = y[0], nv0 = y[1], np = y[2], n0 = y[3], n = y[4], h = y[5];
    const double nv_flow = -p.gamma_minus * nvm + p.gamma_zero * nv0 + p.K0_e * n * nv0 - p.Kminus_h * h * nvm;
    const double n_flow = p.gamma_n * n0 - p.Kn_e * n * np + p.Kn_h * h * n0;
    const double recomb = p.K_eh * n * h;
    const double dn = p.gamma_minus * nvm - p.K0_e * n * nv0 + p.gamma_n * n0 - p.Kn_e * n * np + g - recomb;
    const double dh = p.gamma_zero * nv0 - p.Kminus_h * h * nvm - p.Kn_h * h * n0 + g - recomb;
    return {nv_flow, -nv_flow, n_flow, -n_flow, dn, dh};
}

struct FullModelOptions {
    double tol = 1e-8;
    // Output times inside [t_start, t_end]. Empty -> every accepted step.
    std::vector<double> t_out{};
    std::size_t max_steps = 50'000'000;
};

struct FullModelTrajectory {
    std::vector<double> t;
    std::vector<FullModelState> states;
    ode::StepStats stats{};
};

namespace detail {

inline std::vector<double> breakpoints(const PulseTrain& duv, double t0, double t1, const std::vector<double>& t_out) {
    std::vector<double> bp = duv.edges(t0, t1);
    for (double t : t_out)
        if (t > t0 && t < t1) bp.push_back(t);
    bp.push_back(t1);
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
    return bp;
}

inline void check_output_grid(const std::vector<double>& t_out, double t0, double t1) {
    for (std::size_t i = 0; i < t_out.size(); ++i) {
        if (t_out[i] < t0 || t_out[i] > t1) throw DomainError("full model: output time outside the span");
        if (i > 0 && t_out[i] < t_out[i - 1]) throw DomainError("full model: output times not sorted");
    }
}

// Absolute tolerances per component group: NV and N populations scale with
// their totals, carriers with the larger of the two totals times 1e-6.
template <std::size_t N>
void fill_tolerances(ode::AdaptiveOptions<N>& o, double tol, const std::array<double, N>& scale) {
    o.rtol = tol;
    for (std::size_t i = 0; i < N; ++i) {
        o.atol[i] = tol * std::max(scale[i], 1e-300);
        o.negative_slack[i] = 1e-3 * o.atol[i];
    }
}

// Drives an integrator across smooth segments, recording at output times or
// at every accepted step.
template <std::size_t N, class Rhs>
void run_segments(Rhs&& rhs, const PulseTrain& duv, std::array<double, N> y, double t0, double t1,
                  const ode::AdaptiveOptions<N>& opt, const std::vector<double>& t_out, ode::StepStats& stats,
                  std::vector<double>& t_rec, std::vector<std::array<double, N>>& y_rec) {
    const bool every_step = t_out.empty();
    std::size_t next_out = 0;
    auto record_outputs = [&](double t, const std::array<double, N>& state) {
        while (next_out < t_out.size() && t_out[next_out] <= t) {
            t_rec.push_back(t_out[next_out]);
            y_rec.push_back(state);
            ++next_out;
        }
    };
    if (every_step) {
        t_rec.push_back(t0);
        y_rec.push_back(y);
    } else {
        record_outputs(t0, y);
    }
    double h = 0.0;
    double t = t0;
    for (double b : breakpoints(duv, t0, t1, t_out)) {
        // sample the segment midpoint so the rhs sees the pulse level of this segment
        const double mid_level = duv.at(0.5 * (t + b));
        auto seg_rhs = [&](double tt, const std::array<double, N>& yy) { return rhs(tt, yy, mid_level); };
        if (every_step) {
            y = ode::integrate_dopri5<N>(seg_rhs, t, b, y, opt, h, stats, [&](double tt, const std::array<double, N>& yy) {
                t_rec.push_back(tt);
                y_rec.push_back(yy);
            });
        } else {
            y = ode::integrate_dopri5<N>(seg_rhs, t, b, y, opt, h, stats);
            record_outputs(b, y);
        }
        t = b;
    }
}

} // namespace detail

// Adaptive Dormand-Prince integration. Pulse edges and output times are step
// boundaries, so the pump discontinuity never falls inside a step. Steps that
// would drive any density negative are rejected and retried smaller.
inline FullModelTrajectory integrate_full_model(const FullModelParams& params, const FullModelState& init,
                                                double t_start, double t_end, const FullModelOptions& options = {}) {
    params.validate();
    init.validate();
    if (!(options.tol > 0.0)) throw DomainError("integrate_full_model: tol must be > 0");
    if (!(t_end >= t_start)) throw DomainError("integrate_full_model: t_end < t_start");
    detail::check_output_grid(options.t_out, t_start, t_end);

    const double nv = init.nv_total(), nn = init.n_total();
    const double carrier = std::max(1e-6 * std::max(nv, nn), std::max(init.n_e, init.n_h));
    ode::AdaptiveOptions<6> opt;
    opt.max_steps = options.max_steps;
    detail::fill_tolerances<6>(opt, options.tol, {nv, nv, nn, nn, carrier, carrier});

    auto rhs = [&params](double, const std::array<double, 6>& y, double level) {
        return full_model_rhs(params, level, y);
    };

    FullModelTrajectory out;
    std::vector<std::array<double, 6>> raw;
    detail::run_segments<6>(rhs, params.duv, init.to_array(), t_start, t_end, opt, options.t_out, out.stats, out.t, raw);
    out.states.reserve(raw.size());
    for (const auto& a : raw) out.states.push_back(FullModelState::from_array(a));
    return out;
}

// Fixed-step RK4 reference integration; each smooth segment between pulse
// edges and output times is split into ceil(len / h) equal steps.
inline FullModelTrajectory integrate_full_model_fixed_step(const FullModelParams& params, const FullModelState& init,
                                                           double t_start, double t_end, double h,
                                                           const std::vector<double>& t_out) {
    params.validate();
    init.validate();
    if (!(h > 0.0)) throw DomainError("integrate_full_model_fixed_step: h must be > 0");
    detail::check_output_grid(t_out, t_start, t_end);

    FullModelTrajectory out;
    std::size_t next_out = 0;
    auto y = init.to_array();
    auto record = [&](double t) {
        while (next_out < t_out.size() && t_out[next_out] <= t) {
            out.t.push_back(t_out[next_out++]);
            out.states.push_back(FullModelState::from_array(y));
        }
    };
    record(t_start);
    double t = t_start;
    for (double b : detail::breakpoints(params.duv, t_start, t_end, t_out)) {
        const double level = params.duv.at(0.5 * (t + b));
        auto rhs = [&](double, const std::array<double, 6>& yy) { return full_model_rhs(params, level, yy); };
        const auto steps = static_cast<std::size_t>(std::ceil((b - t) / h));
        y = ode::integrate_rk4<6>(rhs, t, b, y, std::max<std::size_t>(steps, 1));
        out.stats.accepted += steps;
        t = b;
        record(t);
    }
    return out;
}

// Sparse-NV reduction: carriers follow the N-only subsystem (no NV feedback)
// and drive the two-state NV model through the time-dependent rates
//   plus(t)  = gamma_minus + Kminus_h p(t)
//   minus(t) = gamma_zero  + K0_e n(t).
// States are reported in the same layout as the full model.
inline FullModelTrajectory integrate_reduced_model(const FullModelParams& params, const FullModelState& init,
                                                   double t_start, double t_end,
                                                   const FullModelOptions& options = {}) {
    params.validate();
    init.validate();
    if (!(options.tol > 0.0)) throw DomainError("integrate_reduced_model: tol must be > 0");
    detail::check_output_grid(options.t_out, t_start, t_end);

    const double nv = init.nv_total(), nn = init.n_total();
    const double carrier = std::max(1e-6 * std::max(nv, nn), std::max(init.n_e, init.n_h));
    ode::AdaptiveOptions<6> opt;
    opt.max_steps = options.max_steps;
    detail::fill_tolerances<6>(opt, options.tol, {nv, nv, nn, nn, carrier, carrier});

    auto rhs = [&params](double, const std::array<double, 6>& y, double g) {
        const double nvm = y[0], nv0 = y[1], np = y[2], n0 = y[3], n = y[4], h = y[5];
        const double plus = params.gamma_minus + params.Kminus_h * h;
        const double minus = params.gamma_zero + params.K0_e * n;
        const double nv_flow = -plus * nvm + minus * nv0;
        const double n_flow = params.gamma_n * n0 - params.Kn_e * n * np + params.Kn_h * h * n0;
        const double recomb = params.K_eh * n * h;
        const double dn = params.gamma_n * n0 - params.Kn_e * n * np + g - recomb;
        const double dh = -params.Kn_h * h * n0 + g - recomb;
        return std::array<double, 6>{nv_flow, -nv_flow, n_flow, -n_flow, dn, dh};
    };

    FullModelTrajectory out;
    std::vector<std::array<double, 6>> raw;
    detail::run_segments<6>(rhs, params.duv, init.to_array(), t_start, t_end, opt, options.t_out, out.stats, out.t, raw);
    out.states.reserve(raw.size());
    for (const auto& a : raw) out.states.push_back(FullModelState::from_array(a));
    return out;
}

} // namespace nvcharge::kinetics
