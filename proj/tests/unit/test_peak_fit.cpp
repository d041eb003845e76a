#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "nvcharge/peak_fit.hpp"
#include "nvcharge/synth.hpp"

using namespace nvcharge;
using namespace nvcharge::spectra;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

synth::LineshapeModel siv0(double area, double gamma = 0.15) {
    synth::LineshapeModel m;
    m.components = {{synth::Profile::Voigt, 946.0, 0.1, gamma, area}};
    m.background = {synth::BackgroundKind::Rational, 0, 0, 500.0, 930.0};
    return m;
}

const std::vector<double>& grid() {
    static const auto g = synth::uniform_grid(936.0, 952.0, 0.02);
    return g;
}

// 1% of the clean maximum in the window
synth::SynthSpectrum noisy(const synth::LineshapeModel& m, std::uint64_t seed, double rel = 0.01) {
    const auto clean = synth::generate_spectrum(m, grid(), {});
    double peak = 0.0;
    for (std::size_t i = 0; i < grid().size(); ++i)
        if (kSiV0Window.contains(grid()[i])) peak = std::max(peak, clean.clean[i]);
    synth::NoiseModel nz;
    nz.gaussian_sigma = rel * peak;
    nz.seed = seed;
    return synth::generate_spectrum(m, grid(), nz);
}

void check_within_3sigma(const FitResult& f, const std::vector<double>& truth) {
    for (std::size_t i = 0; i < truth.size(); ++i) {
        INFO(f.names[i] << " = " << f.values[i] << " +- " << f.std_errors[i] << ", truth " << truth[i]);
        CHECK(std::abs(f.values[i] - truth[i]) <= 3.0 * f.std_errors[i]);
    }
}

} // namespace

TEST_CASE("Voigt plus rational background round trip", "[peak_fit]") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto f = fit_voigt_background(noisy(siv0(20.0), seed).trace);
        CHECK(f.fit.converged);
        CHECK_FALSE(f.pole_constrained);
        check_within_3sigma(f.fit, {20.0, 946.0, 0.1, 0.15, 500.0, 930.0});
    }
}

TEST_CASE("Voigt fit reduces to a Gaussian fit", "[peak_fit]") {
    const auto s = synth::generate_spectrum(siv0(20.0, 0.0), grid(), {});
    const auto f = fit_voigt_background(s.trace);
    CHECK_THAT(f.sigma, WithinRel(0.1, 1e-6));
    CHECK_THAT(f.gamma, WithinAbs(0.0, 1e-6));
    CHECK_THAT(f.amplitude, WithinRel(20.0, 1e-6));
}

TEST_CASE("a 10% dimmer line gives an amplitude ratio of 0.90", "[peak_fit]") {
    // single pairs scatter by ~1.5% at this noise; the repeats average it down
    double sum = 0.0;
    const int repeats = 8;
    for (int k = 0; k < repeats; ++k) {
        const auto seed = static_cast<std::uint64_t>(4 + k);
        const auto a = fit_voigt_background(noisy(siv0(20.0), seed).trace);
        const auto b = fit_voigt_background(noisy(siv0(18.0), seed + 100).trace);
        sum += b.amplitude / a.amplitude;
    }
    CHECK_THAT(sum / repeats, WithinAbs(0.90, 0.01));
}

TEST_CASE("Voigt fit is deterministic", "[peak_fit]") {
    const auto s = noisy(siv0(20.0), 8).trace;
    CHECK(fit_voigt_background(s).fit.values == fit_voigt_background(s).fit.values);
}

TEST_CASE("background pole above the window is rejected", "[peak_fit]") {
    // 100 / (952 - lambda): a pole the constrained retry cannot move below the window
    synth::LineshapeModel m;
    m.background = {synth::BackgroundKind::Rational, 0, 0, -100.0, 952.0};
    m.components = {{synth::Profile::Voigt, 946.0, 0.1, 0.15, 20.0}};
    auto t = synth::generate_spectrum(m, synth::uniform_grid(936.0, 950.5, 0.02), {}).trace;
    CHECK_THROWS_AS(fit_voigt_background(t), ConvergenceError);
}

TEST_CASE("Voigt fit input checks", "[peak_fit]") {
    const auto s = synth::generate_spectrum(siv0(20.0), synth::uniform_grid(936.0, 952.0, 1.0), {});
    CHECK_THROWS_AS(fit_voigt_background(s.trace), DomainError);
    CHECK_THROWS_AS(fit_voigt_background(noisy(siv0(20.0), 1).trace, {960.0, 970.0}), DomainError);
}

TEST_CASE("ZPL integration", "[peak_fit]") {
    auto line = [](double area, double c0) {
        synth::LineshapeModel m;
        m.components = {{synth::Profile::Voigt, 737.0, 0.05, 0.04, area}};
        m.background = {synth::BackgroundKind::Linear, c0, 0.5, 0, 0};
        return m;
    };
    const auto g = synth::uniform_grid(735.0, 739.0, 0.01);
    SECTION("unit area") {
        const auto z = integrate_zpl(synth::generate_spectrum(line(1.0, 3.0), g, {}).trace, {735.5, 738.5});
        CHECK_THAT(z.area, WithinRel(1.0, 1e-6));
        CHECK_THAT(z.peaks[0].sigma, WithinRel(0.05, 1e-5));
    }
    SECTION("area 7.3 with noise") {
        synth::NoiseModel nz;
        nz.gaussian_sigma = 0.5;
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            nz.seed = seed;
            const auto z = integrate_zpl(synth::generate_spectrum(line(7.3, 3.0), g, nz).trace, {735.5, 738.5});
            INFO("area " << z.area << " +- " << z.fit.error("area"));
            CHECK(std::abs(z.area - 7.3) <= 3.0 * z.fit.error("area"));
        }
    }
    SECTION("two lines 50 GHz apart fitted jointly") {
        // 50 GHz at 737 nm is about 0.09 nm
        const double gap = 737.0 * 737.0 * 50e9 / 299792458e9;
        synth::LineshapeModel m;
        m.components = {{synth::Profile::Voigt, 737.0, 0.015, 0.01, 4.0},
                        {synth::Profile::Voigt, 737.0 + gap, 0.015, 0.01, 2.5}};
        m.background = {synth::BackgroundKind::Linear, 5.0, 0.0, 0, 0};
        synth::NoiseModel nz;
        nz.gaussian_sigma = 0.5;
        nz.seed = 3;
        const auto fine = synth::uniform_grid(736.5, 737.6, 0.002);
        ZplOptions o;
        o.center_guesses = {737.0, 737.0 + gap};
        const auto z = integrate_zpl(synth::generate_spectrum(m, fine, nz).trace, {736.6, 737.5}, o);
        REQUIRE(z.peaks.size() == 2);
        CHECK_THAT(z.peaks[0].area, WithinRel(4.0, 0.05));
        CHECK_THAT(z.peaks[1].area, WithinRel(2.5, 0.05));
    }
    SECTION("center guess outside the window") {
        ZplOptions o;
        o.center_guesses = {750.0};
        CHECK_THROWS_AS(integrate_zpl(synth::generate_spectrum(line(1.0, 3.0), g, {}).trace, {735.5, 738.5}, o), DomainError);
    }
}
