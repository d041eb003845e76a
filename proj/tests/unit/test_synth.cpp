#include <catch_amalgamated.hpp>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "nvcharge/decomposition.hpp"
#include "nvcharge/kinetics.hpp"
#include "nvcharge/rng.hpp"
#include "nvcharge/synth.hpp"

using namespace nvcharge;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

synth::LineshapeModel three_lines() {
    synth::LineshapeModel m;
    m.components = {{synth::Profile::Gaussian, 700.0, 5.0, 0.0, 300.0},
                    {synth::Profile::Lorentzian, 720.0, 0.0, 2.0, 100.0},
                    {synth::Profile::Voigt, 740.0, 1.0, 1.5, 200.0}};
    m.background = {synth::BackgroundKind::Rational, 0, 0, 400.0, 650.0};
    return m;
}

double p_value(double chi2, double dof) { return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), chi2)); }

} // namespace

TEST_CASE("noiseless spectrum is the analytic curve", "[synth]") {
    const auto g = synth::uniform_grid(680.0, 760.0, 0.25);
    const auto s = synth::generate_spectrum(three_lines(), g, {});
    REQUIRE(s.trace.size() == g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g[i];
        const double g0 = 300.0 * std::exp(-0.5 * std::pow((x - 700.0) / 5.0, 2)) / (5.0 * std::sqrt(2.0 * std::numbers::pi));
        const double l0 = 100.0 * 2.0 / (std::numbers::pi * ((x - 720.0) * (x - 720.0) + 4.0));
        const double v0 = 200.0 * spectra::voigt(x - 740.0, 1.0, 1.5);
        CHECK_THAT(s.trace.counts[i], WithinRel(g0 + l0 + v0 + 400.0 / (x - 650.0), 1e-12));
    }
    CHECK(s.trace.counts == s.clean);
}

TEST_CASE("the mean of many noisy traces converges to the clean curve", "[synth]") {
    const auto g = synth::uniform_grid(690.0, 710.0, 0.5);
    const auto clean = synth::generate_spectrum(three_lines(), g, {}).clean;
    const double sigma = 4.0;
    const int n = 10000;
    std::vector<double> sum(g.size(), 0.0);
    synth::NoiseModel nz;
    nz.gaussian_sigma = sigma;
    for (int k = 0; k < n; ++k) {
        nz.seed = static_cast<std::uint64_t>(k + 1);
        const auto s = synth::generate_spectrum(three_lines(), g, nz);
        for (std::size_t i = 0; i < g.size(); ++i) sum[i] += s.trace.counts[i];
    }
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(sum[i] / n - clean[i]) <= 3.0 * sigma / std::sqrt(double(n)));
}

TEST_CASE("Poisson noise has the right mean and variance", "[synth]") {
    synth::LineshapeModel flat;
    flat.background = {synth::BackgroundKind::Constant, 25.0, 0, 0, 0};
    synth::NoiseModel nz;
    nz.poisson = true;
    nz.seed = 5;
    const auto s = synth::generate_spectrum(flat, synth::uniform_grid(0.0, 19999.0, 1.0), nz);
    const double n = static_cast<double>(s.trace.size());
    const double mean = std::accumulate(s.trace.counts.begin(), s.trace.counts.end(), 0.0) / n;
    double var = 0.0;
    for (double c : s.trace.counts) {
        CHECK(c == std::floor(c));
        var += (c - mean) * (c - mean);
    }
    var /= n - 1.0;
    CHECK(std::abs(mean - 25.0) <= 3.0 * std::sqrt(25.0 / n));
    CHECK_THAT(var, WithinRel(25.0, 0.05));
}

TEST_CASE("spikes land at the recorded indices", "[synth]") {
    synth::NoiseModel nz;
    nz.spike_rate = 7;
    nz.exact_spike_count = true;
    nz.spike_min = 100;
    nz.spike_max = 200;
    nz.seed = 3;
    const auto s = synth::generate_spectrum(three_lines(), synth::uniform_grid(680.0, 760.0, 0.25), nz);
    REQUIRE(s.spike_indices.size() == 7);
    std::vector<char> mark(s.trace.size(), 0);
    for (std::size_t k = 0; k < 7; ++k) {
        const auto i = s.spike_indices[k];
        mark[i] = 1;
        CHECK_THAT(s.trace.counts[i] - s.clean[i], WithinAbs(s.spike_amplitudes[k], 1e-9));
        CHECK(s.spike_amplitudes[k] >= 100.0);
        CHECK(s.spike_amplitudes[k] <= 200.0);
    }
    for (std::size_t i = 0; i < s.trace.size(); ++i)
        if (!mark[i]) CHECK(s.trace.counts[i] == s.clean[i]);
    CHECK(std::is_sorted(s.spike_indices.begin(), s.spike_indices.end()));
    CHECK_FALSE(s.trace.metadata.at("truth.spike_indices").empty());
}

TEST_CASE("generation is bit-identical under a seed", "[synth]") {
    synth::NoiseModel nz;
    nz.gaussian_sigma = 1.0;
    nz.poisson = true;
    nz.spike_rate = 2;
    nz.spike_max = 50;
    nz.seed = 77;
    const auto g = synth::uniform_grid(680.0, 760.0, 0.25);
    const auto a = synth::generate_spectrum(three_lines(), g, nz), b = synth::generate_spectrum(three_lines(), g, nz);
    CHECK(a.trace.counts == b.trace.counts);
    nz.seed = 78;
    CHECK(synth::generate_spectrum(three_lines(), g, nz).trace.counts != a.trace.counts);
}

TEST_CASE("spectrum generator input checks", "[synth]") {
    auto m = three_lines();
    m.background.b1 = 700.0;
    CHECK_THROWS_AS(synth::generate_spectrum(m, synth::uniform_grid(680.0, 760.0, 1.0), {}), DomainError);
    auto neg = three_lines();
    neg.components[0].area = -1.0;
    CHECK_THROWS_AS(synth::generate_spectrum(neg, synth::uniform_grid(680.0, 760.0, 1.0), {}), DomainError);
    CHECK_THROWS_AS(synth::generate_spectrum(three_lines(), {700.0, 699.0}, {}), DomainError);
    synth::NoiseModel bad;
    bad.gaussian_sigma = -1.0;
    CHECK_THROWS_AS(synth::generate_spectrum(three_lines(), synth::uniform_grid(680.0, 760.0, 1.0), bad), DomainError);
}

TEST_CASE("NV mixtures", "[synth]") {
    const auto basis = synth::nv_basis(synth::nv_default_grid());
    const auto pure = synth::generate_nv_mixture(basis, 1.0, 0.0, {});
    CHECK(pure.trace.counts == basis.basis_zero.counts);
    CHECK(pure.trace.metadata.at("truth.a") == "1");
    CHECK(pure.trace.metadata.at("truth.b") == "0");
    CHECK_THROWS_AS(synth::generate_nv_mixture(basis, -0.1, 0.5, {}), DomainError);

    // b = 1e-3 at sigma = 1e-2 of the mean basis level
    synth::NoiseModel nz;
    nz.gaussian_sigma = 1e-2 / spectra::kNormalizeWindow.width();
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        nz.seed = seed;
        const auto s = synth::generate_nv_mixture(basis, 1.0 - 1e-3, 1e-3, nz);
        CHECK(std::abs(spectra::decompose(s.trace, basis).b - 1e-3) <= 1e-3);
    }
}

TEST_CASE("arrival streams", "[synth]") {
    SECTION("constant rate") {
        const double r = 2e4, w = 0.5;
        const auto a = synth::generate_arrivals({{{0.0}, {r}}, w, 4});
        CHECK(std::abs(static_cast<double>(a.times.size()) - r * w) <= 3.0 * std::sqrt(r * w));
        CHECK(a.expected_count == Catch::Approx(r * w));
        CHECK(std::is_sorted(a.times.begin(), a.times.end()));
        CHECK(a.times.back() < w);
    }
    SECTION("zero rate") { CHECK(synth::generate_arrivals({{{0.0, 1.0}, {0.0, 0.0}}, 1.0, 1}).times.empty()); }
    SECTION("chi-square gate over seeds") {
        const synth::RateCurve curve{{0.0, 0.2, 0.5, 1.0}, {1e3, 8e3, 2e3, 4e3}};
        const std::size_t bins = 50;
        int passed = 0;
        for (std::uint64_t seed = 1; seed <= 40; ++seed) {
            const auto a = synth::generate_arrivals({curve, 1.0, seed});
            std::vector<double> c(bins, 0.0);
            for (double t : a.times) c[std::min(bins - 1, static_cast<std::size_t>(t * bins))] += 1.0;
            double chi2 = 0.0;
            for (std::size_t k = 0; k < bins; ++k) {
                const double e = curve.integral(double(k) / bins, double(k + 1) / bins);
                chi2 += (c[k] - e) * (c[k] - e) / e;
            }
            if (p_value(chi2, bins) > 0.01) ++passed;
        }
        CHECK(passed >= 38);
    }
    SECTION("rate following a bleach/recovery trajectory") {
        // bleach/recovery rates in periods; PL taken proportional to the NV- population
        const kinetics::RateSet rates{1.8, 0.0, 0.0, 0.2};
        std::vector<double> t;
        for (int i = 0; i <= 10000; ++i) t.push_back(0.01 * i);
        const auto tr = kinetics::simulate_time_trace(rates, {0.1, 1.0}, {1.0, 0.0}, t, {10.0, 60.0});
        synth::RateCurve curve{t, {}};
        for (const auto& p : tr) curve.rate.push_back(2000.0 * p.n_minus);
        const auto a = synth::generate_arrivals({curve, 100.0, 9});
        std::vector<double> c(100, 0.0);
        for (double x : a.times) c[static_cast<std::size_t>(x)] += 1.0;
        double chi2 = 0.0;
        for (std::size_t k = 0; k < 100; ++k) {
            const double e = curve.integral(double(k), double(k + 1));
            chi2 += (c[k] - e) * (c[k] - e) / e;
        }
        CHECK(p_value(chi2, 100) > 0.001);
        auto mean = [&](std::size_t lo, std::size_t hi) { return std::accumulate(c.begin() + lo, c.begin() + hi, 0.0) / double(hi - lo); };
        CHECK(mean(50, 60) < 0.8 * mean(0, 10)); // bleached while the pump runs
        CHECK(mean(90, 100) > mean(55, 60));      // and recovering afterwards
    }
}

TEST_CASE("decay histograms", "[synth]") {
    synth::DecayTruth t;
    t.a = {0.3, 0.3, 0.2};
    t.tau = {1e-3, 1e-2, 1e-1};
    const auto exact = synth::generate_decay_histogram(t, 0.2, 1000, std::numeric_limits<double>::infinity(), 1);
    for (std::size_t i = 0; i < exact.counts.size(); ++i) {
        const double x = exact.t_centers[i];
        CHECK(exact.counts[i] ==
              Catch::Approx(1.0 - 0.3 * std::exp(-x / 1e-3) - 0.3 * std::exp(-x / 1e-2) - 0.2 * std::exp(-x / 1e-1)).epsilon(1e-14));
    }
    const auto noisy = synth::generate_decay_histogram(t, 0.2, 1000, 1e4, 2);
    double chi2 = 0.0;
    for (std::size_t i = 0; i < noisy.counts.size(); ++i) {
        CHECK(noisy.counts[i] == std::floor(noisy.counts[i]));
        chi2 += std::pow(noisy.counts[i] - noisy.expected[i], 2) / noisy.expected[i];
    }
    CHECK(p_value(chi2, 1000) > 0.001);
    CHECK(noisy.truth.tau == t.tau);
    CHECK(synth::generate_decay_histogram(t, 0.2, 1000, 1e4, 2).counts == noisy.counts);
    CHECK_THROWS_AS(synth::generate_decay_histogram(t, 0.2, 1000, 0.0, 2), DomainError);
}

TEST_CASE("sweep tables", "[synth]") {
    const std::vector<double> rates{0.1, 1.0, 10.0};
    const auto clean = synth::generate_rep_sweep(1e-3, 0.1, 0.5, rates, 0.0, 1);
    for (const auto& p : clean) {
        CHECK(p.y == kinetics::repetition_model(p.x, 1e-3, 0.1, 0.5));
        CHECK(std::isnan(p.y_err));
    }
    const auto noisy = synth::generate_rep_sweep(1e-3, 0.1, 0.5, rates, 0.02, 1);
    for (const auto& p : noisy) CHECK(p.y_err == Catch::Approx(0.02 * std::abs(kinetics::repetition_model(p.x, 1e-3, 0.1, 0.5))));
    const std::vector<double> row{0.17, 0.0, 0.001, 0.006, 0.0003};
    const auto ps = synth::generate_power_sweep(row, {0.0, 10.0}, 0.0, 1);
    CHECK(ps[0].y == 0.17);
    CHECK_THROWS_AS(synth::generate_power_sweep(std::vector<double>{1, 2}, {1.0}, 0.0, 1), DomainError);
    CHECK_THROWS_AS(synth::generate_rep_sweep(1, 1, 1, {0.0}, 0.0, 1), DomainError);
}

TEST_CASE("counter-based generator", "[synth]") {
    rng::CounterRng a(123), b(123), c(124);
    std::vector<double> xa, xb, xc;
    for (int i = 0; i < 5; ++i) {
        xa.push_back(a.uniform());
        xb.push_back(b.uniform());
        xc.push_back(c.uniform());
    }
    CHECK(xa == xb);
    CHECK(xa != xc);
    rng::CounterRng g(9);
    const int n = 200000;
    double s = 0.0, ss = 0.0, ps = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = g.normal();
        s += z;
        ss += z * z;
        ps += static_cast<double>(g.poisson(3.5));
    }
    CHECK(std::abs(s / n) <= 4.0 / std::sqrt(double(n)));
    CHECK_THAT(ss / n, WithinAbs(1.0, 0.01));
    CHECK(std::abs(ps / n - 3.5) <= 4.0 * std::sqrt(3.5 / n));
    // large means go through the rejection sampler
    double big = 0.0;
    for (int i = 0; i < 20000; ++i) big += static_cast<double>(g.poisson(1e4));
    CHECK(std::abs(big / 20000 - 1e4) <= 4.0 * std::sqrt(1e4 / 20000));
}
