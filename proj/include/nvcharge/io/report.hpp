#pragma once

// JSON views of fit results and other outputs.

#include <string>
#include <vector>

#include "nvcharge/decay.hpp"
#include "nvcharge/decomposition.hpp"
#include "nvcharge/fit_result.hpp"
#include "nvcharge/io/json.hpp"
#include "nvcharge/kinetics.hpp"
#include "nvcharge/peak_fit.hpp"
#include "nvcharge/sweep_fit.hpp"

namespace nvcharge::io {

inline Json to_json(const FitResult& f) {
    Json params = Json::object();
    for (std::size_t i = 0; i < f.names.size(); ++i) params[f.names[i]] = {{"value", f.values[i]}, {"error", f.std_errors[i]}};
    Json cov = Json::array();
    for (Eigen::Index r = 0; r < f.covariance.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < f.covariance.cols(); ++c) row.push_back(f.covariance(r, c));
        cov.push_back(row);
    }
    return {{"parameters", params},
            {"parameter_order", f.names},
            {"covariance", cov},
            {"chi2", f.chi2},
            {"residual_rms", f.residual_rms},
            {"n_points", f.n_points},
            {"iterations", f.iterations},
            {"starts", f.starts},
            {"converged", f.converged},
            {"message", f.message}};
}

inline Json to_json(const kinetics::RepSweepFit& r) {
    Json j = to_json(r.fit);
    j["delta_s"] = r.delta;
    j["derived"] = {{"duv_minus_over_gamma_eff_minus", {{"value", r.duv_minus_rel}, {"error", r.duv_minus_rel_err}}},
                    {"duv_plus_over_gamma_eff_minus", {{"value", r.duv_plus_rel}, {"error", r.duv_plus_rel_err}}},
                    {"gamma_eff_plus_over_gamma_eff_minus", {{"value", r.gamma_plus_rel}, {"error", r.gamma_plus_rel_err}}}};
    j["zero_rate"] = {{"excluded_points", r.excluded_zero_rate},
                      {"model_limit", r.off_limit},
                      {"measured_mean", r.zero_rate_mean ? Json(*r.zero_rate_mean) : Json(nullptr)}};
    return j;
}

inline Json to_json(const spectra::VoigtBackgroundFit& v) {
    Json j = to_json(v.fit);
    j["pole_constrained"] = v.pole_constrained;
    j["zpl_intensity"] = v.amplitude;
    return j;
}

inline Json to_json(const spectra::ZplIntegration& z) {
    Json j = to_json(z.fit);
    Json peaks = Json::array();
    for (const auto& p : z.peaks) peaks.push_back({{"area", p.area}, {"center", p.center}, {"sigma", p.sigma}, {"gamma", p.gamma}});
    j["peaks"] = peaks;
    j["area"] = z.area;
    j["background"] = {{"c0", z.c0}, {"c1", z.c1}};
    return j;
}

inline Json to_json(const spectra::TripleExpFit& t) {
    Json j = to_json(t.fit);
    Json comps = Json::array();
    for (std::size_t k = 0; k < t.n_active; ++k)
        comps.push_back({{"a", {{"value", t.a[k]}, {"error", t.a_err[k]}}}, {"tau_s", {{"value", t.tau[k]}, {"error", t.tau_err[k]}}}});
    j["a0"] = {{"value", t.a0}, {"error", t.a0_err}};
    j["components"] = comps;
    j["n_active"] = t.n_active;
    j["ill_conditioned"] = t.ill_conditioned;
    j["bic"] = t.bic;
    j["bic_by_components"] = t.bic_by_components;
    j["warnings"] = t.warnings;
    return j;
}

inline Json to_json(const spectra::DecompositionResult& d) {
    return {{"a", d.a}, {"b", d.b}, {"residual_rms", d.residual_rms}, {"intensity_ratio", d.intensity_ratio}};
}

inline Json to_json(const spectra::IntrinsicRatioEstimate& e) {
    return {{"mean", e.mean},         {"std_dev", e.std_dev},       {"pair_constants", e.pair_constants},
            {"skipped", e.skipped},   {"consistent", e.consistent}, {"warnings", e.warnings}};
}

inline Json to_json(const kinetics::PopulationPair& p) { return {{"n_minus", p.n_minus}, {"n_zero", p.n_zero}}; }

} // namespace nvcharge::io
