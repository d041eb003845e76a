// nvcharge command-line front end: simulate, fit, calc, synth.
//
// Every subcommand reads an optional JSON config (--config); command-line
// flags are written into that config before it is validated, so a flag
// always wins over the file. Outputs go to --out-dir via temp+rename, and
// each run writes a canonical JSON report that records input hashes, the
// seed and the hashes of the files it wrote.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nvcharge/nvcharge.hpp"

namespace fs = std::filesystem;
using namespace nvcharge;
using io::ConfigView;
using io::Json;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kConfig = 2, kParse = 3, kConvergence = 4, kIo = 5, kDomain = 6 };

// ---- config overrides --------------------------------------------------

void set_path(Json& root, const std::string& dotted, Json value) {
    Json* node = &root;
    std::size_t start = 0;
    for (;;) {
        const auto dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object()) *node = Json::object();
        if (dot == std::string::npos) {
            (*node)[key] = std::move(value);
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

struct Overrides {
    Json values = Json::object();

    void number(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_option_function<double>(flag, [this, key](double v) { set_path(values, key, v); }, help);
    }
    void integer(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_option_function<std::uint64_t>(flag, [this, key](std::uint64_t v) { set_path(values, key, v); }, help);
    }
    void text(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_option_function<std::string>(flag, [this, key](const std::string& v) { set_path(values, key, v); }, help);
    }
    void numbers(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_option_function<std::vector<double>>(flag, [this, key](const std::vector<double>& v) { set_path(values, key, v); }, help)
            ->delimiter(',');
    }
    void texts(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_option_function<std::vector<std::string>>(flag, [this, key](const std::vector<std::string>& v) { set_path(values, key, v); }, help)
            ->delimiter(',');
    }
    void flag(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_flag_function(flag, [this, key](std::int64_t n) { set_path(values, key, n > 0); }, help);
    }
};

void merge_into(Json& base, const Json& patch) {
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object())
            merge_into(base[it.key()], it.value());
        else
            base[it.key()] = it.value();
    }
}

// ---- run context -------------------------------------------------------

struct Context {
    fs::path out_dir;
    bool out_dir_given = false;
    std::uint64_t seed = 1;
    Json config = Json::object();
    Json inputs = Json::object();
    Json outputs = Json::object();

    ConfigView cfg() const { return ConfigView(config); }

    void write(const std::string& name, const std::string& content) {
        io::write_file_atomic(out_dir / name, content);
        outputs[name] = io::content_hash(content);
    }

    io::Dataset load(const std::string& label, const std::string& path, io::DatasetKind kind) {
        io::Dataset d;
        try {
            d = io::load_dataset(path, kind);
        } catch (const ParseError& e) {
            throw ParseError(path + ": " + e.what(), 0, e.issue());
        }
        inputs[label] = {{"path", path}, {"hash", d.content_hash}};
        return d;
    }

    // Report with provenance; written to <name>.json and echoed on stdout.
    void finish(const std::string& command, const std::string& name, Json result, bool write_file = true) {
        Json report = {{"command", command},
                       {"result", std::move(result)},
                       {"provenance", {{"seed", seed}, {"inputs", inputs}, {"config", config}, {"outputs", outputs}}}};
        report["report_hash"] = io::report_hash(report);
        const std::string text = io::canonical_dump(report) + "\n";
        if (write_file) io::write_file_atomic(out_dir / (name + ".json"), text);
        std::cout << text;
    }
};

kinetics::PulseSchedule read_schedule(const ConfigView& c) {
    kinetics::PulseSchedule s{c.positive("delta"), c.positive("period")};
    if (!(s.delta < s.period)) throw ConfigError(c.child_path("delta"), "must be smaller than period");
    return s;
}

struct RatesConfig {
    kinetics::RateSet rates;
    std::optional<kinetics::EffectiveRates> effective;
};

// "rates" gives window rates directly, "effective" gives probe/pump parts.
// With rate_units = "1/period" all rates are multiplied by 1/period.
RatesConfig read_rates(const ConfigView& c, double period) {
    const std::string units = c.string_or("rate_units", "1/s");
    double scale = 1.0;
    if (units == "1/period") scale = 1.0 / period;
    else if (units != "1/s") throw ConfigError(c.child_path("rate_units"), "expected \"1/s\" or \"1/period\"");
    RatesConfig out;
    if (c.has("rates")) {
        const auto r = c.at("rates");
        out.rates = {scale * r.non_negative_or("nu_plus", 0), scale * r.non_negative_or("nu_minus", 0),
                     scale * r.non_negative_or("kappa_plus", 0), scale * r.non_negative_or("kappa_minus", 0)};
    } else if (c.has("effective")) {
        const auto e = c.at("effective");
        kinetics::EffectiveRates eff{scale * e.non_negative_or("gamma_eff_plus", 0), scale * e.non_negative_or("gamma_eff_minus", 0),
                                     scale * e.non_negative_or("duv_plus", 0), scale * e.non_negative_or("duv_minus", 0)};
        out.effective = eff;
        out.rates = kinetics::effective_to_window_rates(eff);
    } else {
        throw ConfigError(c.child_path("rates"), "missing required field (or give \"effective\")");
    }
    if (!out.effective && out.rates.nu_plus >= out.rates.kappa_plus && out.rates.nu_minus >= out.rates.kappa_minus)
        out.effective = kinetics::EffectiveRates{out.rates.kappa_plus, out.rates.kappa_minus,
                                                 out.rates.nu_plus - out.rates.kappa_plus, out.rates.nu_minus - out.rates.kappa_minus};
    return out;
}

Json rates_json(const kinetics::RateSet& r) {
    return {{"nu_plus", r.nu_plus}, {"nu_minus", r.nu_minus}, {"kappa_plus", r.kappa_plus}, {"kappa_minus", r.kappa_minus}};
}

// ---- simulate ----------------------------------------------------------

kinetics::FullModelParams read_full_params(const ConfigView& c) {
    kinetics::FullModelParams p;
    p.gamma_minus = c.non_negative_or("gamma_minus", 0.0);
    p.gamma_zero = c.non_negative_or("gamma_zero", 0.0);
    p.gamma_n = c.non_negative_or("gamma_n", 0.0);
    p.K0_e = c.non_negative_or("K0_e", 0.0);
    p.Kminus_h = c.non_negative_or("Kminus_h", 0.0);
    p.Kn_e = c.non_negative_or("Kn_e", 0.0);
    p.Kn_h = c.non_negative_or("Kn_h", 0.0);
    p.K_eh = c.non_negative_or("K_eh", 0.0);
    if (c.has("pulse")) {
        const auto q = c.at("pulse");
        p.duv.amplitude = q.non_negative("amplitude");
        p.duv.delta = q.positive("delta");
        p.duv.period = q.positive("period");
        p.duv.start = q.number_or("start", 0.0);
        if (!(p.duv.delta < p.duv.period)) throw ConfigError(q.child_path("delta"), "must be smaller than period");
    }
    return p;
}

void cmd_simulate(Context& ctx) {
    const auto c = ctx.cfg();
    const auto sched = read_schedule(c.at("schedule"));
    const auto rc = read_rates(c, sched.period);
    const double t_end = c.positive("t_end");
    const auto spp = c.uint_or("samples_per_period", 200);
    if (spp < 2) throw ConfigError("samples_per_period", "must be >= 2");

    kinetics::PumpWindow pump;
    if (c.has("pump")) {
        const auto p = c.at("pump");
        pump.on = p.number_or("on", pump.on);
        pump.off = p.number_or("off", pump.off);
    }

    kinetics::PopulationPair init{1.0, 0.0};
    std::string init_kind = "given";
    if (c.has("initial")) {
        const auto i = c.at("initial");
        if (i.raw().is_string()) {
            if (i.raw().get<std::string>() != "quasi_equilibrium") throw ConfigError("initial", "expected an object or \"quasi_equilibrium\"");
            init = kinetics::quasi_equilibrium(rc.rates, sched);
            init_kind = "quasi_equilibrium";
        } else {
            init = {i.non_negative("n_minus"), i.non_negative("n_zero")};
        }
    }

    const double dt = sched.period / static_cast<double>(spp);
    const auto n = static_cast<std::size_t>(std::llround(t_end / dt));
    std::vector<double> t(n + 1);
    for (std::size_t i = 0; i <= n; ++i) t[i] = static_cast<double>(i) * dt;
    const auto trace = kinetics::simulate_time_trace(rc.rates, sched, init, t, pump);
    std::vector<double> nm(trace.size()), nz(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
        nm[i] = trace[i].n_minus;
        nz[i] = trace[i].n_zero;
    }
    ctx.write("trajectory.csv", io::write_columns_csv({"t", "n_minus", "n_zero"}, {t, nm, nz}));

    Json result;
    result["rates"] = rates_json(rc.rates);
    result["schedule"] = {{"delta", sched.delta}, {"period", sched.period}};
    result["initial"] = {{"kind", init_kind}, {"state", io::to_json(init)}};
    result["final_state"] = io::to_json(trace.back());
    result["samples"] = t.size();

    const double periods = c.has("rolling_average") ? c.at("rolling_average").positive("periods") : 1.0;
    const std::string edge = c.has("rolling_average") ? c.at("rolling_average").string_or("edge", "valid") : "valid";
    if (edge != "valid" && edge != "reflect") throw ConfigError("rolling_average.edge", "expected \"valid\" or \"reflect\"");
    const auto policy = edge == "valid" ? kinetics::EdgePolicy::valid : kinetics::EdgePolicy::reflect;
    const auto ra_m = kinetics::rolling_period_average(nm, dt, periods * sched.period, policy);
    const auto ra_z = kinetics::rolling_period_average(nz, dt, periods * sched.period, policy);
    std::vector<double> ra_t(ra_m.values.size());
    for (std::size_t i = 0; i < ra_t.size(); ++i) ra_t[i] = t[i + ra_m.offset];
    ctx.write("rolling_average.csv", io::write_columns_csv({"t", "n_minus_avg", "n_zero_avg"}, {ra_t, ra_m.values, ra_z.values}));
    result["rolling_average"] = {{"window_samples", ra_m.width}, {"edge", edge}, {"points", ra_t.size()}};

    if (rc.rates.nu() > 0.0 || rc.rates.kappa() > 0.0) {
        const auto qe = kinetics::quasi_equilibrium(rc.rates, sched);
        Json qj = {{"n_star", io::to_json(qe)},
                   {"post_pulse", io::to_json(kinetics::post_pulse_state(rc.rates, sched))},
                   {"second_eigenvalue", kinetics::second_eigenvalue(rc.rates, sched)}};
        try {
            const double exact = kinetics::average_ratio_exact(rc.rates, sched);
            qj["average_ratio_exact"] = exact;
            qj["average_ratio_integral"] = kinetics::average_ratio_integral(rc.rates, sched);
            if (rc.effective) {
                const double lin = kinetics::average_ratio_linearized(*rc.effective, sched);
                qj["average_ratio_linearized"] = lin;
                qj["linearized_relative_deviation"] = std::abs(lin - exact) / std::abs(exact);
            }
        } catch (const DomainError& e) {
            qj["average_ratio_note"] = e.what();
        }
        result["quasi_equilibrium"] = qj;
    }

    if (c.has("full_model")) {
        const auto f = c.at("full_model");
        const auto params = read_full_params(f);
        const auto i = f.at("initial");
        kinetics::FullModelState s0{i.non_negative("N_nvm"), i.non_negative("N_nv0"), i.non_negative("N_np"),
                                    i.non_negative("N_n0"),  i.non_negative_or("n_e", 0), i.non_negative_or("n_h", 0)};
        const double f_end = f.positive("t_end");
        kinetics::FullModelOptions opt;
        opt.tol = f.number_or("tol", 1e-8);
        if (!(opt.tol > 0.0)) throw ConfigError("full_model.tol", "must be > 0");
        const auto n_out = f.uint_or("n_out", 1000);
        if (n_out < 1) throw ConfigError("full_model.n_out", "must be >= 1");
        for (std::uint64_t k = 0; k <= n_out; ++k) opt.t_out.push_back(f_end * static_cast<double>(k) / static_cast<double>(n_out));
        const auto traj = kinetics::integrate_full_model(params, s0, 0.0, f_end, opt);
        std::vector<std::vector<double>> cols(7);
        double d_nv = 0.0, d_n = 0.0, d_q = 0.0;
        for (std::size_t k = 0; k < traj.t.size(); ++k) {
            const auto& s = traj.states[k];
            cols[0].push_back(traj.t[k]);
            const auto a = s.to_array();
            for (std::size_t j = 0; j < 6; ++j) cols[j + 1].push_back(a[j]);
            d_nv = std::max(d_nv, std::abs(s.nv_total() - s0.nv_total()));
            d_n = std::max(d_n, std::abs(s.n_total() - s0.n_total()));
            d_q = std::max(d_q, std::abs(s.net_charge() - s0.net_charge()));
        }
        ctx.write("full_trajectory.csv", io::write_columns_csv({"t", "N_nvm", "N_nv0", "N_np", "N_n0", "n_e", "n_h"}, cols));
        result["full_model"] = {{"steps_accepted", traj.stats.accepted},
                                {"steps_rejected_error", traj.stats.rejected_error},
                                {"steps_rejected_negative", traj.stats.rejected_negative},
                                {"max_abs_drift", {{"nv_total", d_nv}, {"n_total", d_n}, {"net_charge", d_q}}},
                                {"final_nv_minus_fraction", traj.states.back().N_nvm / traj.states.back().nv_total()}};
    }

    if (c.boolean_or("svg", false)) {
        io::PlotSpec spec{"two-state populations", "t [s]", "population fraction"};
        ctx.write("trajectory.svg", io::svg_line_plot({{"NV-", t, nm}, {"NV- rolling average", ra_t, ra_m.values}}, spec));
    }
    ctx.finish("simulate", "simulate_report", result);
}

// ---- fit ---------------------------------------------------------------

spectra::Window read_window(const ConfigView& c, const std::string& key, spectra::Window fallback) {
    if (!c.has(key)) return fallback;
    const auto v = c.numbers(key);
    if (v.size() != 2 || !(v[0] < v[1])) throw ConfigError(c.child_path(key), "expected [lo, hi] with lo < hi");
    return {v[0], v[1]};
}

spectra::BasisPair read_basis(Context& ctx, const ConfigView& c, const spectra::SpectrumTrace& like, Json& result) {
    const auto norm = read_window(c, "normalize_window", spectra::kNormalizeWindow);
    if (c.has("basis_zero") || c.has("basis_minus")) {
        spectra::BasisPair b;
        b.basis_zero = ctx.load("basis_zero", c.string("basis_zero"), io::DatasetKind::Spectrum).spectrum();
        b.basis_minus = ctx.load("basis_minus", c.string("basis_minus"), io::DatasetKind::Spectrum).spectrum();
        b.normalize_window = norm;
        result["basis"] = "files";
        return b;
    }
    if (c.has("pure_zero") || c.has("total")) {
        const auto z = ctx.load("pure_zero", c.string("pure_zero"), io::DatasetKind::Spectrum).spectrum();
        const auto t = ctx.load("total", c.string("total"), io::DatasetKind::Spectrum).spectrum();
        const std::string obj = c.string_or("objective", "l1");
        if (obj != "l1" && obj != "l2") throw ConfigError("objective", "expected \"l1\" or \"l2\"");
        const auto ex = spectra::extract_basis(z, t, read_window(c, "minimize_window", spectra::kMinimizeWindow), norm,
                                               obj == "l1" ? spectra::Objective::L1 : spectra::Objective::L2);
        result["basis"] = "extracted";
        result["basis_extraction"] = {{"a_star", ex.a_star}, {"objective", obj}, {"minus_normalized", ex.minus_normalized}};
        return ex.basis;
    }
    result["basis"] = "builtin_stand_in";
    return synth::nv_basis(like.wavelengths, norm);
}

spectra::SpectrumTrace preprocess(const ConfigView& c, spectra::SpectrumTrace s) {
    if (c.has("offset")) s = spectra::subtract_offset(std::move(s), c.number("offset"));
    if (c.boolean_or("despike", false)) s = spectra::despike(std::move(s)).trace;
    return s;
}

void cmd_fit(Context& ctx, const std::string& kind) {
    const auto c = ctx.cfg();
    Json result;
    result["kind"] = kind;
    if (kind == "decompose") {
        const auto trace = preprocess(c, ctx.load("input", c.string("input"), io::DatasetKind::Spectrum).spectrum());
        const auto basis = read_basis(ctx, c, trace, result);
        const auto d = spectra::decompose(trace, basis);
        const double brightness = c.number_or("brightness", spectra::kBrightnessLiterature);
        result["decomposition"] = io::to_json(d);
        result["brightness_factor"] = brightness;
        result["population_ratio"] = spectra::intensity_to_population_ratio(d.intensity_ratio, brightness);
    } else if (kind == "rep-sweep") {
        const auto data = ctx.load("input", c.string("input"), io::DatasetKind::Sweep).sweep();
        kinetics::SweepFitOptions opt;
        opt.seed = ctx.seed;
        opt.random_starts = c.uint_or("n_starts", 8);
        result.update(io::to_json(kinetics::fit_repetition_sweep(data, c.positive("delta"), opt)));
    } else if (kind == "power-sweep") {
        const auto data = ctx.load("input", c.string("input"), io::DatasetKind::Sweep).sweep();
        kinetics::SweepFitOptions opt;
        opt.seed = ctx.seed;
        opt.random_starts = c.uint_or("n_starts", 8);
        opt.ridge = c.non_negative_or("ridge", opt.ridge);
        result.update(io::to_json(kinetics::fit_power_sweep(data, opt)));
    } else if (kind == "voigt") {
        const auto trace = preprocess(c, ctx.load("input", c.string("input"), io::DatasetKind::Spectrum).spectrum());
        const std::string bg = c.string_or("background", "rational");
        if (bg == "rational") {
            result.update(io::to_json(spectra::fit_voigt_background(trace, read_window(c, "window", spectra::kSiV0Window))));
        } else if (bg == "linear") {
            spectra::ZplOptions opt;
            if (c.has("centers")) opt.center_guesses = c.numbers("centers");
            result.update(io::to_json(spectra::integrate_zpl(trace, read_window(c, "window", spectra::kSiV0Window), opt)));
        } else {
            throw ConfigError("background", "expected \"rational\" or \"linear\"");
        }
    } else if (kind == "triexp") {
        std::vector<double> counts, centers;
        if (c.has("arrivals")) {
            auto arr = ctx.load("arrivals", c.string("arrivals"), io::DatasetKind::Arrivals).arrivals();
            // optional folding: time since the most recent pulse reference
            if (c.has("fold_period")) {
                const double period = c.positive("fold_period"), offset = c.number_or("fold_offset", 0.0);
                std::vector<double> folded;
                for (double t : arr) {
                    if (t < offset) continue;
                    folded.push_back(std::fmod(t - offset, period));
                }
                std::sort(folded.begin(), folded.end());
                arr = std::move(folded);
                result["folding"] = {{"period_s", period}, {"offset_s", offset}};
            }
            const auto h = spectra::bin_arrivals(arr, c.positive("arrival_window"), c.uint_or("bins", 1000));
            counts = h.counts;
            centers = h.centers();
            result["binning"] = {{"window_s", h.window}, {"bins", h.counts.size()}, {"bin_width_s", h.bin_width()}, {"discarded", h.discarded}};
        } else {
            const auto h = ctx.load("input", c.string("input"), io::DatasetKind::Histogram).histogram();
            counts = h.counts;
            centers = h.t_centers;
        }
        spectra::TripleExpOptions opt;
        opt.components = c.uint_or("components", 0);
        const std::string w = c.string_or("weighting", "poisson");
        if (w != "poisson" && w != "uniform") throw ConfigError("weighting", "expected \"poisson\" or \"uniform\"");
        opt.weighting = w == "poisson" ? spectra::DecayWeighting::Poisson : spectra::DecayWeighting::Uniform;
        result.update(io::to_json(spectra::fit_triple_exponential(counts, centers, opt)));
    } else if (kind == "intrinsic-ratio") {
        const auto ref = preprocess(c, ctx.load("reference", c.string("reference"), io::DatasetKind::Spectrum).spectrum());
        const auto basis = read_basis(ctx, c, ref, result);
        const auto ref_d = spectra::decompose(ref, basis);
        std::vector<spectra::DecompositionResult> others;
        Json per = Json::array();
        const auto paths = c.at("inputs");
        if (!paths.raw().is_array() || paths.raw().empty()) throw ConfigError("inputs", "expected a non-empty list of spectrum paths");
        for (std::size_t i = 0; i < paths.raw().size(); ++i) {
            if (!paths.raw()[i].is_string()) throw ConfigError("inputs[" + std::to_string(i) + "]", "expected a path");
            const auto s = preprocess(c, ctx.load("inputs[" + std::to_string(i) + "]", paths.raw()[i].get<std::string>(),
                                                   io::DatasetKind::Spectrum).spectrum());
            others.push_back(spectra::decompose(s, basis));
            per.push_back(io::to_json(others.back()));
        }
        spectra::IntrinsicRatioOptions opt;
        opt.spread_threshold = c.number_or("spread_threshold", opt.spread_threshold);
        result["reference"] = io::to_json(ref_d);
        result["decompositions"] = per;
        result["estimate"] = io::to_json(spectra::estimate_intrinsic_ratio(ref_d, others, opt));
    } else {
        throw ConfigError("fit", "unknown kind " + kind);
    }
    ctx.finish("fit " + kind, "fit_" + kind, result);
}

// ---- calc --------------------------------------------------------------

optics::Polarization read_polarization(const ConfigView& c) {
    const std::string p = c.string_or("polarization", "unpolarized");
    if (p == "s") return optics::Polarization::S;
    if (p == "p") return optics::Polarization::P;
    if (p == "unpolarized") return optics::Polarization::Unpolarized;
    throw ConfigError("polarization", "expected s, p or unpolarized");
}

optics::StackResult stack_from_indices(const std::vector<double>& idx, double angle, optics::Polarization pol) {
    if (idx.size() < 1) throw ConfigError("indices", "need at least one refractive index");
    std::vector<optics::InterfaceSpec> ifs;
    for (std::size_t i = 0; i + 1 < idx.size(); ++i) ifs.push_back({idx[i], idx[i + 1], angle, pol});
    return optics::stack_transmission(ifs);
}

optics::BeamSpot read_spot(const ConfigView& c) {
    if (c.has("major_mm") || c.has("minor_mm")) return {c.positive("major_mm"), c.positive("minor_mm")};
    return optics::BeamSpot::circle(c.number_or("diameter_mm", 1.0));
}

struct Labeled {
    std::vector<std::pair<std::string, std::string>> lines;
    void add(const std::string& label, double v, const std::string& unit) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6g", v);
        lines.emplace_back(label, std::string(buf) + (unit.empty() ? "" : " " + unit));
    }
    void note(const std::string& label, const std::string& text) { lines.emplace_back(label, text); }
    void print() const {
        std::size_t w = 0;
        for (const auto& l : lines) w = std::max(w, l.first.size());
        for (const auto& [k, v] : lines) std::cout << k << std::string(w - k.size() + 2, ' ') << v << "\n";
    }
};

void cmd_calc(Context& ctx, const std::string& kind) {
    const auto c = ctx.cfg();
    Json r;
    Labeled out;
    const double wl = c.number_or("wavelength_nm", 224.8);
    if (kind == "photon-energy") {
        const double e = optics::photon_energy(wl);
        r = {{"wavelength_nm", wl}, {"photon_energy_j", e}, {"photon_energy_ev", e / optics::kElementaryCharge}};
        out.add("wavelength", wl, "nm");
        out.add("photon energy", e, "J");
        out.add("photon energy", e / optics::kElementaryCharge, "eV");
    } else if (kind == "photons") {
        optics::PulseEnergetics p{c.non_negative_or("energy_uj", 3.0) * 1e-6, wl, c.number_or("pulse_us", 100.0) * 1e-6};
        const double n = optics::photons_per_pulse(p);
        r = {{"pulse_energy_j", p.pulse_energy}, {"wavelength_nm", wl}, {"pulse_length_s", p.pulse_length}, {"photons_per_pulse", n}};
        out.add("pulse energy", p.pulse_energy * 1e6, "uJ");
        out.add("photons per pulse", n, "");
    } else if (kind == "snell") {
        const double n1 = c.number_or("n1", 1.0), n2 = c.number_or("n2", 1.55), a = c.number_or("angle_deg", 50.0);
        const auto s = optics::snell(n1, n2, a);
        r = {{"n1", n1}, {"n2", n2}, {"angle_deg", a}, {"total_internal_reflection", s.total_internal_reflection}};
        if (s.total_internal_reflection) {
            r["refraction_angle_deg"] = nullptr;
            out.note("result", "total internal reflection (no transmitted beam)");
        } else {
            r["refraction_angle_deg"] = s.theta_t_deg;
            out.add("refraction angle", s.theta_t_deg, "deg");
        }
    } else if (kind == "fresnel") {
        optics::InterfaceSpec s{c.number_or("n1", 1.0), c.number_or("n2", 1.55), c.number_or("angle_deg", 50.0), read_polarization(c)};
        const double R = optics::fresnel_reflectance(s);
        const auto tir = optics::snell(s.n_incident, s.n_transmitted, s.incidence_angle).total_internal_reflection;
        r = {{"n1", s.n_incident}, {"n2", s.n_transmitted}, {"angle_deg", s.incidence_angle},
             {"polarization", c.string_or("polarization", "unpolarized")}, {"reflectance", R}, {"total_internal_reflection", tir}};
        out.add("reflectance", R, "");
        if (tir) out.note("note", "total internal reflection");
    } else if (kind == "stack") {
        const auto idx = c.has("indices") ? c.numbers("indices") : std::vector<double>{1.0, 1.55, 1.0, 2.717};
        const auto s = stack_from_indices(idx, c.number_or("angle_deg", 50.0), read_polarization(c));
        r = {{"indices", idx}, {"transmission", s.transmission}, {"reflectances", s.reflectances}, {"incidence_angles_deg", s.incidence_angles}};
        if (s.tir_at) r["diagnostic"] = s.diagnostic;
        for (std::size_t i = 0; i < s.reflectances.size(); ++i) out.add("R[" + std::to_string(i) + "]", s.reflectances[i], "");
        out.add("transmission", s.transmission, "");
        if (s.tir_at) out.note("diagnostic", s.diagnostic);
    } else if (kind == "flux") {
        const double count = c.has("count") ? c.non_negative("count")
                                            : optics::photons_per_pulse({c.non_negative_or("energy_uj", 3.0) * 1e-6, wl, 1e-4});
        const double trans = c.number_or("transmission", 1.0);
        if (!(trans >= 0.0 && trans <= 1.0)) throw ConfigError("transmission", "must lie in [0, 1]");
        const auto spot = read_spot(c);
        const auto f = optics::photon_flux(count * trans, spot);
        r = {{"photons", count}, {"transmission", trans}, {"spot_area_mm2", spot.area_mm2()},
             {"flux_per_a2", f.per_angstrom2}, {"flux_per_cm2", f.per_cm2}};
        out.add("flux", f.per_angstrom2, "photons/A^2");
        out.add("flux", f.per_cm2, "photons/cm^2");
    } else if (kind == "ionization") {
        const auto p = optics::ionization_probability(c.non_negative_or("cross_section_a2", 0.1), c.non_negative_or("flux_a2", 0.03));
        r = {{"probability", p.probability}, {"beyond_linear_regime", p.beyond_linear_regime}};
        out.add("ionization probability", p.probability, "");
        if (p.beyond_linear_regime) out.note("warning", "sigma*I > 0.1, the linear estimate is unreliable");
    } else if (kind == "exciton") {
        optics::AbsorptionSpec a{c.non_negative_or("alpha_cm", 44.0), c.non_negative_or("areal_cm2", 3e14)};
        const double z = c.non_negative_or("depth_um", 0.0);
        r = {{"alpha_cm", a.alpha}, {"areal_cm2", a.photon_areal_density}, {"depth_um", z},
             {"density_cm3", optics::exciton_density(a, z)}, {"surface_density_cm3", a.surface_density()}};
        out.add("n(z)", optics::exciton_density(a, z), "cm^-3");
        out.add("n(0)", a.surface_density(), "cm^-3");
    } else if (kind == "boltzmann") {
        const double dE = c.number_or("splitting_mev", 6.8), T = c.number_or("temperature_k", 10.0), g = c.number_or("degeneracy", 1.0);
        const double ratio = optics::boltzmann_population_ratio(dE, T, g);
        r = {{"splitting_mev", dE}, {"temperature_k", T}, {"degeneracy_ratio", g}, {"ratio", ratio}};
        out.add("upper/lower population", ratio, "");
    } else if (kind == "dosimetry") {
        optics::PulseEnergetics p{c.non_negative_or("energy_uj", 3.0) * 1e-6, wl, c.number_or("pulse_us", 100.0) * 1e-6};
        const double photons = optics::photons_per_pulse(p);
        const auto idx = c.has("indices") ? c.numbers("indices") : std::vector<double>{1.0, 1.55, 1.0, 2.717};
        const auto pol = read_polarization(c);
        const auto stack = stack_from_indices(idx, c.number_or("angle_deg", 50.0), pol);
        const auto spot = read_spot(c);
        const auto f0 = optics::photon_flux(photons, spot);
        const auto f1 = optics::photon_flux(photons * stack.transmission, spot);
        const auto ion = optics::ionization_probability(c.non_negative_or("cross_section_a2", 0.1), f1.per_angstrom2);
        optics::AbsorptionSpec abs{c.non_negative_or("alpha_cm", 44.0), f1.per_cm2};
        r = {{"photon_energy_j", optics::photon_energy(wl)},
             {"photons_per_pulse", photons},
             {"stack_transmission", stack.transmission},
             {"reflectances", stack.reflectances},
             {"incidence_angles_deg", stack.incidence_angles},
             {"flux_before_losses_per_a2", f0.per_angstrom2},
             {"flux_per_a2", f1.per_angstrom2},
             {"flux_per_cm2", f1.per_cm2},
             {"ionization_probability", ion.probability},
             {"exciton_surface_density_cm3", abs.surface_density()}};
        out.add("photon energy", optics::photon_energy(wl), "J");
        out.add("photons per pulse", photons, "");
        out.add("stack transmission", stack.transmission, "");
        out.add("flux (no losses)", f0.per_angstrom2, "photons/A^2");
        out.add("flux (after stack)", f1.per_angstrom2, "photons/A^2");
        out.add("ionization probability", ion.probability, "");
        out.add("n(0)", abs.surface_density(), "cm^-3");
        if (stack.tir_at) out.note("diagnostic", stack.diagnostic);
    } else {
        throw ConfigError("calc", "unknown kind " + kind);
    }
    out.print();
    ctx.finish("calc " + kind, "calc_" + kind, r, ctx.out_dir_given);
}

// ---- synth -------------------------------------------------------------

synth::NoiseModel read_noise(const ConfigView& c, std::uint64_t seed) {
    synth::NoiseModel n;
    n.seed = seed;
    if (!c.has("noise")) return n;
    const auto z = c.at("noise");
    n.gaussian_sigma = z.non_negative_or("gaussian_sigma", 0.0);
    n.poisson = z.boolean_or("poisson", false);
    n.spike_rate = z.non_negative_or("spike_rate", 0.0);
    n.exact_spike_count = z.boolean_or("exact_spike_count", false);
    n.spike_min = z.non_negative_or("spike_min", 0.0);
    n.spike_max = z.non_negative_or("spike_max", n.spike_min);
    return n;
}

std::vector<double> read_grid(const ConfigView& c, double lo, double hi, double step) {
    if (!c.has("grid")) return synth::uniform_grid(lo, hi, step);
    const auto g = c.at("grid");
    return synth::uniform_grid(g.number_or("lo", lo), g.number_or("hi", hi), g.number_or("step", step));
}

synth::LineshapeModel read_lineshape(const ConfigView& c) {
    synth::LineshapeModel m;
    if (!c.has("components")) {
        m.components = {{synth::Profile::Voigt, 946.0, 0.1, 0.15, 20.0}};
        m.background = {synth::BackgroundKind::Rational, 0, 0, 500.0, 930.0};
        return m;
    }
    const auto comps = c.at("components");
    if (!comps.raw().is_array()) throw ConfigError("components", "expected a list");
    for (std::size_t i = 0; i < comps.raw().size(); ++i) {
        const ConfigView v(comps.raw()[i], "components[" + std::to_string(i) + "]");
        const std::string prof = v.string_or("profile", "gaussian");
        synth::LineComponent lc;
        if (prof == "gaussian") lc.profile = synth::Profile::Gaussian;
        else if (prof == "lorentzian") lc.profile = synth::Profile::Lorentzian;
        else if (prof == "voigt") lc.profile = synth::Profile::Voigt;
        else throw ConfigError(v.child_path("profile"), "expected gaussian, lorentzian or voigt");
        lc.center = v.number("center");
        lc.sigma = v.non_negative_or("sigma", 0.0);
        lc.gamma = v.non_negative_or("gamma", 0.0);
        lc.area = v.non_negative("area");
        m.components.push_back(lc);
    }
    if (c.has("background")) {
        const auto b = c.at("background");
        const std::string k = b.string("kind");
        if (k == "none") m.background.kind = synth::BackgroundKind::None;
        else if (k == "constant") m.background = {synth::BackgroundKind::Constant, b.number("c0"), 0, 0, 0};
        else if (k == "linear") m.background = {synth::BackgroundKind::Linear, b.number("c0"), b.number("c1"), 0, 0};
        else if (k == "rational") m.background = {synth::BackgroundKind::Rational, 0, 0, b.number("b0"), b.number("b1")};
        else throw ConfigError(b.child_path("kind"), "expected none, constant, linear or rational");
    }
    if (c.has("taper")) m.taper = {c.at("taper").number("start"), c.at("taper").positive("width")};
    m.validate();
    return m;
}

Json spectrum_truth(const synth::SynthSpectrum& s) {
    return {{"spike_indices", s.spike_indices}, {"spike_amplitudes", s.spike_amplitudes}, {"metadata", s.trace.metadata}};
}

void cmd_synth(Context& ctx, const std::string& kind) {
    const auto c = ctx.cfg();
    Json truth;
    if (kind == "spectrum") {
        const auto model = read_lineshape(c);
        const auto s = synth::generate_spectrum(model, read_grid(c, 936.0, 952.0, 0.02), read_noise(c, ctx.seed));
        ctx.write("spectrum.csv", io::write_spectrum_csv(s.trace));
        truth = spectrum_truth(s);
        truth["clean"] = s.clean;
    } else if (kind == "nv-basis") {
        const auto b = synth::nv_basis(read_grid(c, 500.0, 900.0, 0.1));
        ctx.write("basis_zero.csv", io::write_spectrum_csv(b.basis_zero));
        ctx.write("basis_minus.csv", io::write_spectrum_csv(b.basis_minus));
        truth = {{"normalize_window", {b.normalize_window.lo, b.normalize_window.hi}}};
    } else if (kind == "mixture") {
        const auto grid = read_grid(c, 500.0, 900.0, 0.1);
        const auto b = synth::nv_basis(grid);
        auto noise = read_noise(c, ctx.seed);
        // sigma relative to the mean basis level over the normalisation window
        if (c.has("sigma")) noise.gaussian_sigma = c.non_negative("sigma") / b.normalize_window.width();
        const double a = c.non_negative_or("a", 0.7), bw = c.non_negative_or("b", 0.3);
        const auto s = synth::generate_nv_mixture(b, a, bw, noise);
        ctx.write("mixture.csv", io::write_spectrum_csv(s.trace));
        truth = spectrum_truth(s);
        truth["a"] = a;
        truth["b"] = bw;
    } else if (kind == "arrivals") {
        const auto sched = read_schedule(c.has("schedule") ? c.at("schedule") : ConfigView(Json{{"delta", 100e-6}, {"period", 0.2}}, "schedule"));
        RatesConfig rc;
        if (c.has("rates") || c.has("effective")) rc = read_rates(c, sched.period);
        else rc.rates = {1.8 / sched.period, 0.0, 0.0, 0.2 / sched.period};
        const double periods = c.number_or("periods", 5.0);
        const double brightness = c.non_negative_or("brightness", 2e4); // counts/s per unit NV- fraction
        const double background = c.non_negative_or("background_rate", 0.0);
        const auto spp = c.uint_or("samples_per_period", 2000);
        // rate curve knots: uniform samples plus both edges of every pulse
        std::vector<double> knots;
        const auto np = static_cast<std::size_t>(std::ceil(periods));
        for (std::size_t k = 0; k < np; ++k) {
            const double t0 = static_cast<double>(k) * sched.period;
            knots.push_back(t0);
            knots.push_back(t0 + sched.delta);
            for (std::uint64_t i = 1; i < spp; ++i) {
                const double t = t0 + sched.period * static_cast<double>(i) / static_cast<double>(spp);
                if (t > t0 + sched.delta) knots.push_back(t);
            }
        }
        knots.push_back(static_cast<double>(np) * sched.period);
        std::sort(knots.begin(), knots.end());
        knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
        const auto init = kinetics::quasi_equilibrium(rc.rates, sched);
        const auto tr = kinetics::simulate_time_trace(rc.rates, sched, init, knots);
        synth::RateCurve curve{knots, {}};
        for (const auto& p : tr) curve.rate.push_back(background + brightness * p.n_minus);
        const auto a = synth::generate_arrivals({curve, periods * sched.period, ctx.seed});
        const std::string fmt = c.string_or("format", "csv");
        if (fmt == "csv") ctx.write("arrivals.csv", io::write_arrivals_csv(a.times));
        else if (fmt == "binary") ctx.write("arrivals.f64", io::write_arrivals_binary(a.times));
        else throw ConfigError("format", "expected csv or binary");
        truth = {{"schedule", {{"delta", sched.delta}, {"period", sched.period}}},
                 {"rates", rates_json(rc.rates)},
                 {"window_s", periods * sched.period},
                 {"expected_count", a.expected_count},
                 {"count", a.times.size()},
                 {"brightness", brightness},
                 {"background_rate", background}};
    } else if (kind == "decay") {
        synth::DecayTruth t;
        t.a0 = c.number_or("a0", 1.0);
        const auto amps = c.has("amplitudes") ? c.numbers("amplitudes") : std::vector<double>{0.3, 0.3, 0.2};
        const auto taus = c.has("taus") ? c.numbers("taus") : std::vector<double>{1e-3, 1e-2, 1e-1};
        if (amps.size() != taus.size() || amps.empty() || amps.size() > 3) throw ConfigError("taus", "need 1-3 taus matching amplitudes");
        for (std::size_t j = 0; j < amps.size(); ++j) {
            t.a[j] = amps[j];
            t.tau[j] = taus[j];
        }
        const double window = c.number_or("window", 0.2);
        const auto bins = c.uint_or("bins", 1000);
        const double scale = c.number_or("counts_scale", 1e4);
        const auto h = synth::generate_decay_histogram(t, window, bins, scale, ctx.seed);
        ctx.write("histogram.csv", io::write_histogram_csv(h.t_centers, h.counts));
        truth = {{"a0", t.a0}, {"amplitudes", amps}, {"taus", taus}, {"counts_scale", scale}, {"window", window}, {"bins", bins}};
    } else if (kind == "rep-sweep") {
        const double A = c.number_or("A", 2e-4), B = c.number_or("B", 5e-2), C = c.number_or("C", 0.8);
        const auto rates = c.has("rates") ? c.numbers("rates") : std::vector<double>{0.05, 0.1, 0.2, 0.5, 1, 2, 3, 5};
        const double noise = c.non_negative_or("noise", 0.01);
        ctx.write("sweep.csv", io::write_sweep_csv(synth::generate_rep_sweep(A, B, C, rates, noise, ctx.seed)));
        truth = {{"A", A}, {"B", B}, {"C", C}, {"noise", noise}};
    } else if (kind == "power-sweep") {
        std::vector<double> coeffs;
        const std::string row = c.string_or("row", "300K");
        if (c.has("coefficients")) coeffs = c.numbers("coefficients");
        else if (row == "300K") coeffs = {0.0, 0.090, 0.0003, 0.009, 0.00003};
        else if (row == "12K") coeffs = {0.17, 0.0, 0.001, 0.006, 0.0003};
        else throw ConfigError("row", "expected 300K or 12K");
        if (coeffs.size() != 5) throw ConfigError("coefficients", "expected 5 values A..E");
        const auto powers = c.has("powers") ? c.numbers("powers")
                                            : std::vector<double>{1.5, 3, 5, 8, 12, 20, 30, 50, 80, 120, 200, 300, 500};
        const double noise = c.non_negative_or("noise", 0.02);
        ctx.write("sweep.csv", io::write_sweep_csv(synth::generate_power_sweep(coeffs, powers, noise, ctx.seed)));
        truth = {{"coefficients", coeffs}, {"noise", noise}};
    } else {
        throw ConfigError("synth", "unknown kind " + kind);
    }
    ctx.write("truth_" + kind + ".json", io::canonical_dump(truth) + "\n");
    ctx.finish("synth " + kind, "synth_" + kind, {{"kind", kind}, {"truth", truth}});
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nvcharge: NV charge-state kinetics, spectra and dosimetry"};
    app.fallthrough(); // --seed, --out-dir and --config may follow the subcommand
    app.require_subcommand(1);
    app.set_version_flag("--version", "nvcharge 1.0.0");

    std::optional<std::uint64_t> seed;
    std::string out_dir = "nvcharge_out";
    std::string config_path;
    app.add_option("--seed", seed, "RNG seed for fits and synthetic data (default 1, or config key \"seed\")");
    auto* od = app.add_option("--out-dir", out_dir, "output directory (default nvcharge_out)");
    app.add_option("--config", config_path, "JSON config; command-line flags override its keys")->check(CLI::ExistingFile);

    Overrides ov;
    std::string kind;
    std::function<void(Context&)> run;

    // simulate
    auto* sim = app.add_subcommand("simulate", "two-state kinetics under a pulse train (optionally the six-species model)");
    ov.number(sim, "--delta", "schedule.delta", "pump pulse length [s]");
    ov.number(sim, "--period", "schedule.period", "repetition period [s]");
    ov.number(sim, "--nu-plus", "rates.nu_plus", "NV- -> NV0 rate, pump on [1/s]");
    ov.number(sim, "--nu-minus", "rates.nu_minus", "NV0 -> NV- rate, pump on [1/s]");
    ov.number(sim, "--kappa-plus", "rates.kappa_plus", "NV- -> NV0 rate, pump off [1/s]");
    ov.number(sim, "--kappa-minus", "rates.kappa_minus", "NV0 -> NV- rate, pump off [1/s]");
    ov.text(sim, "--rate-units", "rate_units", "\"1/s\" (default) or \"1/period\"");
    ov.number(sim, "--t-end", "t_end", "simulated duration [s]");
    ov.integer(sim, "--samples-per-period", "samples_per_period", "output samples per period (default 200)");
    ov.number(sim, "--pump-on", "pump.on", "pulses start at this time [s]");
    ov.number(sim, "--pump-off", "pump.off", "no pulses from this time on [s]");
    ov.number(sim, "--avg-periods", "rolling_average.periods", "rolling-average window [periods] (default 1)");
    ov.text(sim, "--avg-edge", "rolling_average.edge", "valid (shortened output, default) or reflect");
    ov.flag(sim, "--svg", "svg", "also write trajectory.svg");
    sim->callback([&] { run = cmd_simulate; });

    // fit
    auto* fit = app.add_subcommand("fit", "fit measured or synthetic data");
    fit->add_option("kind", kind, "decompose | rep-sweep | power-sweep | voigt | triexp | intrinsic-ratio")
        ->required()
        ->check(CLI::IsMember({"decompose", "rep-sweep", "power-sweep", "voigt", "triexp", "intrinsic-ratio"}));
    ov.text(fit, "--input", "input", "data file (CSV)");
    ov.text(fit, "--basis-zero", "basis_zero", "NV0 basis spectrum (CSV)");
    ov.text(fit, "--basis-minus", "basis_minus", "NV- basis spectrum (CSV)");
    ov.text(fit, "--pure-zero", "pure_zero", "NV0-only spectrum for basis extraction (CSV)");
    ov.text(fit, "--total", "total", "mixed spectrum for basis extraction (CSV)");
    ov.text(fit, "--objective", "objective", "basis extraction objective: l1 (default) or l2");
    ov.number(fit, "--brightness", "brightness", "NV-/NV0 brightness factor (default 2.5)");
    ov.number(fit, "--offset", "offset", "dark offset subtracted before fitting [counts]");
    ov.flag(fit, "--despike", "despike", "despike spectra before fitting");
    ov.number(fit, "--delta", "delta", "pump pulse length for the repetition sweep [s]");
    ov.integer(fit, "--n-starts", "n_starts", "random restarts for sweep fits (default 8)");
    ov.numbers(fit, "--window", "window", "fit window lo,hi [nm]");
    ov.text(fit, "--background", "background", "voigt background: rational (default) or linear");
    ov.numbers(fit, "--centers", "centers", "peak centre guesses for the linear-background fit [nm]");
    ov.text(fit, "--arrivals", "arrivals", "photon arrival times (CSV t_s, or .f64 binary) [s]");
    ov.number(fit, "--arrival-window", "arrival_window", "binning window for arrivals [s]");
    ov.number(fit, "--fold-period", "fold_period", "fold arrivals modulo this period before binning [s]");
    ov.number(fit, "--fold-offset", "fold_offset", "reference time of the first pulse end for folding [s]");
    ov.integer(fit, "--bins", "bins", "histogram bins for arrivals (default 1000)");
    ov.integer(fit, "--components", "components", "decay components 1-3 (default: choose by BIC)");
    ov.text(fit, "--weighting", "weighting", "decay weighting: poisson (default) or uniform");
    ov.text(fit, "--reference", "reference", "reference spectrum for the intrinsic ratio (CSV)");
    ov.texts(fit, "--inputs", "inputs", "comma-separated spectra for the intrinsic ratio");
    ov.number(fit, "--spread-threshold", "spread_threshold", "relative spread flagged as inconsistent (default 0.05)");
    fit->callback([&] { run = [&](Context& c) { cmd_fit(c, kind); }; });

    // calc
    auto* calc = app.add_subcommand("calc", "photon dosimetry and optics");
    calc->add_option("kind", kind, "photon-energy | photons | snell | fresnel | stack | flux | ionization | exciton | boltzmann | dosimetry")
        ->required()
        ->check(CLI::IsMember({"photon-energy", "photons", "snell", "fresnel", "stack", "flux", "ionization", "exciton", "boltzmann", "dosimetry"}));
    ov.number(calc, "--wavelength", "wavelength_nm", "wavelength [nm] (default 224.8)");
    ov.number(calc, "--energy", "energy_uj", "pulse energy [uJ] (default 3)");
    ov.number(calc, "--pulse", "pulse_us", "pulse length [us] (default 100)");
    ov.number(calc, "--n1", "n1", "incident refractive index (default 1)");
    ov.number(calc, "--n2", "n2", "transmitted refractive index (default 1.55)");
    ov.number(calc, "--angle", "angle_deg", "incidence angle [deg] (default 50)");
    ov.text(calc, "--polarization", "polarization", "s | p | unpolarized (default)");
    ov.numbers(calc, "--indices", "indices", "refractive indices along the beam (default 1,1.55,1,2.717)");
    ov.number(calc, "--count", "count", "photons per pulse (flux; default from --energy)");
    ov.number(calc, "--transmission", "transmission", "optical transmission applied to the count (default 1)");
    ov.number(calc, "--diameter", "diameter_mm", "circular spot diameter [mm] (default 1)");
    ov.number(calc, "--major", "major_mm", "elliptical spot major axis [mm]");
    ov.number(calc, "--minor", "minor_mm", "elliptical spot minor axis [mm]");
    ov.number(calc, "--cross-section", "cross_section_a2", "ionization cross section [A^2] (default 0.1)");
    ov.number(calc, "--flux", "flux_a2", "photon flux [photons/A^2] (default 0.03)");
    ov.number(calc, "--alpha", "alpha_cm", "absorption coefficient [1/cm] (default 44)");
    ov.number(calc, "--areal", "areal_cm2", "photon areal density [1/cm^2] (default 3e14)");
    ov.number(calc, "--depth", "depth_um", "depth below the surface [um] (default 0)");
    ov.number(calc, "--splitting", "splitting_mev", "level splitting [meV] (default 6.8)");
    ov.number(calc, "--temperature", "temperature_k", "temperature [K] (default 10)");
    ov.number(calc, "--degeneracy", "degeneracy", "upper/lower degeneracy ratio (default 1)");
    calc->callback([&] { run = [&](Context& c) { cmd_calc(c, kind); }; });

    // synth
    auto* syn = app.add_subcommand("synth", "generate synthetic data with known truth");
    syn->add_option("kind", kind, "spectrum | nv-basis | mixture | arrivals | decay | rep-sweep | power-sweep")
        ->required()
        ->check(CLI::IsMember({"spectrum", "nv-basis", "mixture", "arrivals", "decay", "rep-sweep", "power-sweep"}));
    ov.number(syn, "--gaussian-sigma", "noise.gaussian_sigma", "additive Gaussian noise [counts]");
    ov.flag(syn, "--poisson", "noise.poisson", "Poisson counting noise");
    ov.number(syn, "--spike-rate", "noise.spike_rate", "mean cosmic-ray spikes per trace");
    ov.number(syn, "--spike-min", "noise.spike_min", "smallest spike amplitude [counts]");
    ov.number(syn, "--spike-max", "noise.spike_max", "largest spike amplitude [counts]");
    ov.number(syn, "--sigma", "sigma", "mixture noise relative to the mean basis level");
    ov.number(syn, "--a", "a", "mixture NV0 weight");
    ov.number(syn, "--b", "b", "mixture NV- weight");
    ov.number(syn, "--periods", "periods", "arrivals: number of periods");
    ov.number(syn, "--brightness", "brightness", "arrivals: count rate per unit NV- fraction [1/s]");
    ov.number(syn, "--background-rate", "background_rate", "arrivals: constant background [1/s]");
    ov.text(syn, "--format", "format", "arrivals output: csv (default) or binary");
    ov.numbers(syn, "--amplitudes", "amplitudes", "decay amplitudes");
    ov.numbers(syn, "--taus", "taus", "decay lifetimes [s]");
    ov.number(syn, "--window", "window", "decay window [s] (default 0.2)");
    ov.integer(syn, "--bins", "bins", "decay bins (default 1000)");
    ov.number(syn, "--counts-scale", "counts_scale", "decay counts per unit intensity (default 1e4)");
    ov.numbers(syn, "--rates", "rates", "rep-sweep repetition rates [Hz]");
    ov.numbers(syn, "--powers", "powers", "power-sweep powers [uW]");
    ov.numbers(syn, "--coefficients", "coefficients", "power-sweep coefficients A,B,C,D,E");
    ov.text(syn, "--row", "row", "power-sweep preset: 300K (default) or 12K");
    ov.number(syn, "--noise", "noise", "relative noise for sweeps");
    syn->callback([&] { run = [&](Context& c) { cmd_synth(c, kind); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        Context ctx;
        if (!config_path.empty()) {
            const std::string text = io::read_file(config_path);
            ctx.config = io::parse_json(text);
            if (!ctx.config.is_object()) throw ConfigError("<root>", "config must be a JSON object");
            ctx.inputs["config"] = {{"path", config_path}, {"hash", io::content_hash(text)}};
        }
        merge_into(ctx.config, ov.values);
        ctx.seed = seed ? *seed : ConfigView(ctx.config).uint_or("seed", 1);
        ctx.out_dir = out_dir;
        ctx.out_dir_given = od->count() > 0;
        std::error_code ec;
        fs::create_directories(ctx.out_dir, ec);
        if (ec) throw IoError("cannot create output directory " + ctx.out_dir.string() + ": " + ec.message());
        run(ctx);
        return kOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kParse;
    } catch (const ConvergenceError& e) {
        std::cerr << "convergence failure: " << e.what() << "\n";
        return kConvergence;
    } catch (const IntegrationError& e) {
        std::cerr << "integration failure: " << e.what() << "\n";
        return kConvergence;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return kDomain;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInternal;
    }
}
