#pragma once

// DUV dosimetry: photon counts, Fresnel losses through the window stack,
// spot flux, direct ionization probability and the exciton depth profile.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nvcharge/errors.hpp"

namespace nvcharge::optics {

inline constexpr double kPlanck = 6.62607015e-34;       // J s
inline constexpr double kLightSpeed = 299792458.0;      // m / s
inline constexpr double kBoltzmannEv = 8.617333262e-5;  // eV / K
inline constexpr double kElementaryCharge = 1.602176634e-19;
inline constexpr double kAngstrom2PerCm2 = 1e16;
inline constexpr double kAngstrom2PerMm2 = 1e14;

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

// hc / lambda [J], lambda in nm.
inline double photon_energy(double wavelength_nm) {
    if (!(wavelength_nm > 0.0)) throw DomainError("photon_energy: wavelength must be > 0");
    return kPlanck * kLightSpeed / (wavelength_nm * 1e-9);
}

struct PulseEnergetics {
    double pulse_energy = 0.0; // J
    double wavelength = 0.0;   // nm
    double pulse_length = 0.0; // s

    void validate() const {
        // Zero energy is allowed (no photons); the rest must be positive.
        if (!(pulse_energy >= 0.0)) throw DomainError("PulseEnergetics: pulse energy must be >= 0");
        if (!(wavelength > 0.0)) throw DomainError("PulseEnergetics: wavelength must be > 0");
        if (!(pulse_length > 0.0)) throw DomainError("PulseEnergetics: pulse length must be > 0");
    }
};

inline double photons_per_pulse(const PulseEnergetics& p) {
    p.validate();
    return p.pulse_energy / photon_energy(p.wavelength);
}

struct Refraction {
    bool total_internal_reflection = false;
    double theta_t_deg = 0.0; // meaningless under TIR
};

inline void check_indices(double n1, double n2, double theta_deg, const char* who) {
    if (!(n1 >= 1.0) || !(n2 >= 1.0)) throw DomainError(std::string(who) + ": refractive indices must be >= 1");
    if (!(theta_deg >= 0.0 && theta_deg < 90.0)) throw DomainError(std::string(who) + ": angle must lie in [0, 90) deg");
}

inline Refraction snell(double n1, double n2, double theta_i_deg) {
    check_indices(n1, n2, theta_i_deg, "snell");
    const double s = n1 * std::sin(deg2rad(theta_i_deg)) / n2;
    if (s > 1.0) return {true, 90.0};
    return {false, rad2deg(std::asin(s))};
}

enum class Polarization { S, P, Unpolarized };

struct InterfaceSpec {
    double n_incident = 1.0;
    double n_transmitted = 1.0;
    double incidence_angle = 0.0; // deg
    Polarization polarization = Polarization::Unpolarized;
};

// Power reflectance of a single non-absorbing interface; 1 under TIR.
inline double fresnel_reflectance(const InterfaceSpec& spec) {
    check_indices(spec.n_incident, spec.n_transmitted, spec.incidence_angle, "fresnel_reflectance");
    const double n1 = spec.n_incident, n2 = spec.n_transmitted;
    const Refraction r = snell(n1, n2, spec.incidence_angle);
    if (r.total_internal_reflection) return 1.0;
    const double ci = std::cos(deg2rad(spec.incidence_angle));
    const double ct = std::cos(deg2rad(r.theta_t_deg));
    const double rs = (n1 * ci - n2 * ct) / (n1 * ci + n2 * ct);
    const double rp = (n2 * ci - n1 * ct) / (n2 * ci + n1 * ct);
    switch (spec.polarization) {
    case Polarization::S:
        return rs * rs;
    case Polarization::P:
        return rp * rp;
    case Polarization::Unpolarized:
        break;
    }
    return 0.5 * (rs * rs + rp * rp);
}

struct StackResult {
    double transmission = 1.0;
    std::vector<double> reflectances;     // per interface
    std::vector<double> incidence_angles; // deg, after chaining
    std::optional<std::size_t> tir_at;    // index of the interface that totally reflects
    std::string diagnostic;
};

// Single-pass transmission prod (1 - R_i). With chain_angles the incidence
// angle of interface i > 0 is the refraction angle at interface i - 1, and
// consecutive media must match.
inline StackResult stack_transmission(std::span<const InterfaceSpec> interfaces, bool chain_angles = true) {
    StackResult out;
    double theta = interfaces.empty() ? 0.0 : interfaces.front().incidence_angle;
    for (std::size_t i = 0; i < interfaces.size(); ++i) {
        InterfaceSpec s = interfaces[i];
        if (chain_angles && i > 0) {
            if (s.n_incident != interfaces[i - 1].n_transmitted)
                throw DomainError("stack_transmission: interface " + std::to_string(i) +
                                  " does not start in the medium the previous one ends in");
            s.incidence_angle = theta;
        }
        out.incidence_angles.push_back(s.incidence_angle);
        const Refraction r = snell(s.n_incident, s.n_transmitted, s.incidence_angle);
        if (r.total_internal_reflection) {
            out.transmission = 0.0;
            out.reflectances.push_back(1.0);
            out.tir_at = i;
            out.diagnostic = "total internal reflection at interface " + std::to_string(i);
            return out;
        }
        const double R = fresnel_reflectance(s);
        out.reflectances.push_back(R);
        out.transmission *= 1.0 - R;
        theta = r.theta_t_deg;
    }
    return out;
}

struct BeamSpot {
    double major_axis = 0.0; // mm, full axis
    double minor_axis = 0.0; // mm

    static BeamSpot circle(double diameter_mm) { return {diameter_mm, diameter_mm}; }

    double area_mm2() const {
        if (!(major_axis > 0.0) || !(minor_axis > 0.0)) throw DomainError("BeamSpot: axes must be > 0");
        return std::numbers::pi * 0.25 * major_axis * minor_axis;
    }
};

struct Flux {
    double per_angstrom2 = 0.0;
    double per_cm2 = 0.0;
};

// Uniform (top-hat) spot.
inline Flux photon_flux(double count, const BeamSpot& spot) {
    const double area_a2 = spot.area_mm2() * kAngstrom2PerMm2;
    const double f = count / area_a2;
    return {f, f * kAngstrom2PerCm2};
}

struct IonizationProbability {
    double probability = 0.0;
    bool beyond_linear_regime = false; // sigma * I > 0.1
};

inline IonizationProbability ionization_probability(double cross_section_a2, double flux_per_a2) {
    if (!(cross_section_a2 >= 0.0) || !(flux_per_a2 >= 0.0))
        throw DomainError("ionization_probability: inputs must be >= 0");
    const double p = cross_section_a2 * flux_per_a2;
    return {p, p > 0.1};
}

struct AbsorptionSpec {
    double alpha = 0.0;                // cm^-1
    double photon_areal_density = 0.0; // cm^-2

    void validate() const {
        if (!(alpha >= 0.0) || !(photon_areal_density >= 0.0)) throw DomainError("AbsorptionSpec: values must be >= 0");
    }
    double surface_density() const { return alpha * photon_areal_density; }
};

// alpha I exp(-alpha z) [cm^-3], z in um.
inline double exciton_density(const AbsorptionSpec& spec, double depth_um) {
    spec.validate();
    if (!(depth_um >= 0.0)) throw DomainError("exciton_density: depth must be >= 0");
    return spec.surface_density() * std::exp(-spec.alpha * depth_um * 1e-4);
}

// Upper/lower level occupation ratio g exp(-dE / kT).
inline double boltzmann_population_ratio(double splitting_mev, double temperature_k, double degeneracy_ratio = 1.0) {
    if (!(temperature_k > 0.0)) throw DomainError("boltzmann_population_ratio: temperature must be > 0");
    if (!(degeneracy_ratio > 0.0)) throw DomainError("boltzmann_population_ratio: degeneracy ratio must be > 0");
    return degeneracy_ratio * std::exp(-splitting_mev * 1e-3 / (kBoltzmannEv * temperature_k));
}

} // namespace nvcharge::optics
