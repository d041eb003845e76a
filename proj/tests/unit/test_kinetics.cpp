#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "nvcharge/kinetics.hpp"
#include "oracles.hpp"

using namespace nvcharge;
using namespace nvcharge::kinetics;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// pump-raises-NV- and bleach/recovery parameter sets with T = 1
const PulseSchedule kSched{0.1, 1.0};
const RateSet kPumpRaises{0.0, 2.0, 0.75, 0.0};
const RateSet kBleach{1.8, 0.0, 0.0, 0.2};

RateSet random_rates(std::mt19937_64& g, double lo = 1e-2, double hi = 1e2) {
    return {oracle::log_uniform(g, lo, hi), oracle::log_uniform(g, lo, hi), oracle::log_uniform(g, lo, hi),
            oracle::log_uniform(g, lo, hi)};
}

PulseSchedule random_schedule(std::mt19937_64& g) {
    const double period = oracle::log_uniform(g, 1e-2, 1.0);
    std::uniform_real_distribution<double> f(0.01, 0.9);
    return {f(g) * period, period};
}

std::vector<double> grid(double t_end, double dt) {
    std::vector<double> t;
    const auto n = static_cast<std::size_t>(std::llround(t_end / dt));
    for (std::size_t i = 0; i <= n; ++i) t.push_back(static_cast<double>(i) * dt);
    return t;
}

} // namespace

TEST_CASE("propagator at dt = 0 is the identity", "[kinetics]") {
    const auto p = propagator(1.0, 2.0, 0.0);
    CHECK(p.m00 == 1.0);
    CHECK(p.m01 == 0.0);
    CHECK(p.m10 == 0.0);
    CHECK(p.m11 == 1.0);
    const auto z = propagator(0.0, 0.0, 5.0);
    CHECK(z.m00 == 1.0);
    CHECK(z.m11 == 1.0);
}

TEST_CASE("propagator long-time limit is the steady state", "[kinetics]") {
    for (double dt : {1e3, std::numeric_limits<double>::infinity()}) {
        const auto p = propagator(1.0, 2.0, dt);
        CHECK_THAT(p.m00, WithinAbs(2.0 / 3.0, 1e-15));
        CHECK_THAT(p.m01, WithinAbs(2.0 / 3.0, 1e-15));
        CHECK_THAT(p.m10, WithinAbs(1.0 / 3.0, 1e-15));
        CHECK_THAT(p.m11, WithinAbs(1.0 / 3.0, 1e-15));
    }
}

TEST_CASE("propagator matches adaptive ODE integration", "[kinetics]") {
    const auto ref = oracle::two_state_ode(0.7, 1.3, 0.37, {1.0, 0.0});
    const auto got = propagator(0.7, 1.3, 0.37).apply({1.0, 0.0});
    CHECK(oracle::rel_err(got.n_minus, ref[0]) <= 1e-9);
    CHECK(oracle::rel_err(got.n_zero, ref[1]) <= 1e-9);

    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const double a = oracle::log_uniform(g, 1e-3, 1e2), b = oracle::log_uniform(g, 1e-3, 1e2);
        const double dt = oracle::log_uniform(g, 1e-4, 1.0);
        const double x = u(g);
        const auto r = oracle::two_state_ode(a, b, dt, {x, 1.0 - x});
        const auto p = propagator(a, b, dt).apply({x, 1.0 - x});
        INFO("a=" << a << " b=" << b << " dt=" << dt);
        CHECK(std::max(std::abs(p.n_minus - r[0]), std::abs(p.n_zero - r[1])) <= 1e-9 * std::max(std::abs(r[0]), std::abs(r[1])));
    }
}

TEST_CASE("propagator agrees with the matrix exponential", "[kinetics]") {
    std::mt19937_64 g(12);
    for (int i = 0; i < 200; ++i) {
        const double a = oracle::log_uniform(g, 1e-3, 1e2), b = oracle::log_uniform(g, 1e-3, 1e2);
        const double dt = oracle::log_uniform(g, 1e-4, 2.0);
        const Eigen::Matrix2d ref = oracle::expm_generator(a, b, dt);
        CHECK((propagator(a, b, dt).matrix() - ref).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("propagator is column-stochastic with entries in [0, 1]", "[kinetics]") {
    std::mt19937_64 g(13);
    for (int i = 0; i < 2000; ++i) {
        const auto p = propagator(oracle::log_uniform(g, 1e-6, 1e6), oracle::log_uniform(g, 1e-6, 1e6), oracle::log_uniform(g, 1e-8, 1e3));
        CHECK(p.m00 + p.m10 == 1.0);
        CHECK(p.m01 + p.m11 == 1.0);
        for (double m : {p.m00, p.m01, p.m10, p.m11}) {
            CHECK(m >= 0.0);
            CHECK(m <= 1.0);
        }
    }
}

TEST_CASE("propagator semigroup property", "[kinetics]") {
    std::mt19937_64 g(14);
    for (int i = 0; i < 500; ++i) {
        const double a = oracle::log_uniform(g, 1e-3, 1e2), b = oracle::log_uniform(g, 1e-3, 1e2);
        const double s = oracle::log_uniform(g, 1e-4, 1.0), t = oracle::log_uniform(g, 1e-4, 1.0);
        const auto lhs = propagator(a, b, s + t).matrix();
        const auto rhs = (propagator(a, b, s) * propagator(a, b, t)).matrix();
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("propagator rejects negative input", "[kinetics]") {
    CHECK_THROWS_AS(propagator(-1.0, 1.0, 1.0), DomainError);
    CHECK_THROWS_AS(propagator(1.0, -1.0, 1.0), DomainError);
    CHECK_THROWS_AS(propagator(1.0, 1.0, -1.0), DomainError);
}

TEST_CASE("full-period operator", "[kinetics]") {
    SECTION("uniform rates reduce to one propagator") {
        const RateSet r{0.4, 1.1, 0.4, 1.1};
        const PulseSchedule s{0.5, 1.0};
        CHECK((full_period_operator(r, s).matrix() - propagator(0.4, 1.1, 1.0).matrix()).cwiseAbs().maxCoeff() <= 1e-15);
    }
    SECTION("order is off-window after on-window") {
        std::mt19937_64 g(21);
        for (int i = 0; i < 50; ++i) {
            const auto r = random_rates(g);
            const auto s = random_schedule(g);
            const auto ref = oracle::period_matrix(r.nu_plus, r.nu_minus, r.kappa_plus, r.kappa_minus, s.delta, s.period);
            CHECK((full_period_operator(r, s).matrix() - ref).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
    SECTION("columns sum to one") {
        std::mt19937_64 g(22);
        for (int i = 0; i < 500; ++i) {
            const auto p = full_period_operator(random_rates(g, 1e-4, 1e4), random_schedule(g));
            CHECK(std::abs(p.m00 + p.m10 - 1.0) <= 1e-14);
            CHECK(std::abs(p.m01 + p.m11 - 1.0) <= 1e-14);
        }
    }
    SECTION("invalid schedule") {
        CHECK_THROWS_AS(full_period_operator(kPumpRaises, {1.0, 1.0}), DomainError);
        CHECK_THROWS_AS(full_period_operator(kPumpRaises, {0.0, 1.0}), DomainError);
    }
}

TEST_CASE("quasi-equilibrium", "[kinetics]") {
    SECTION("no raising rate leaves NV- absorbing") {
        const auto n = quasi_equilibrium({0.0, 3.0, 0.0, 0.5}, kSched);
        CHECK(n.n_minus == 1.0);
        CHECK(n.n_zero == 0.0);
    }
    SECTION("closed form against an independent eigenvector") {
        std::mt19937_64 g(31);
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const auto r = random_rates(g);
            const auto s = random_schedule(g);
            const auto v = oracle::unit_eigenvector(oracle::period_matrix(r.nu_plus, r.nu_minus, r.kappa_plus, r.kappa_minus, s.delta, s.period));
            const auto c = quasi_equilibrium_closed_form(r, s);
            worst = std::max({worst, std::abs(c.n_minus - v(0)), std::abs(c.n_zero - v(1))});
            const auto e = quasi_equilibrium_eigen(r, s);
            CHECK(std::abs(c.n_minus - e.n_minus) <= 1e-9);
        }
        CHECK(worst <= 1e-9);
    }
    SECTION("fixed point of the period map") {
        std::mt19937_64 g(32);
        for (int i = 0; i < 200; ++i) {
            const auto r = random_rates(g);
            const auto s = random_schedule(g);
            const auto n = quasi_equilibrium(r, s);
            const auto m = full_period_operator(r, s).apply(n);
            CHECK(std::hypot(m.n_minus - n.n_minus, m.n_zero - n.n_zero) <= 1e-10);
            CHECK(n.n_minus >= 0.0);
            CHECK(n.n_zero >= 0.0);
            CHECK_THAT(n.total(), WithinAbs(1.0, 1e-15));
        }
    }
    SECTION("pump-raises set: asymptote of a long simulation") {
        const auto n = quasi_equilibrium(kPumpRaises, kSched);
        const auto after = post_pulse_state(kPumpRaises, kSched);
        const std::vector<double> t{50.0, 50.1};
        const auto tr = simulate_time_trace(kPumpRaises, kSched, {0.0, 1.0}, t);
        CHECK(std::abs(tr[0].n_minus - n.n_minus) <= 1e-8);
        CHECK(std::abs(tr[1].n_minus - after.n_minus) <= 1e-8);
        // the pump raises NV- in this parameter set
        CHECK(after.n_minus > n.n_minus);
    }
    SECTION("all-zero rates") {
        CHECK_THROWS_AS(quasi_equilibrium({}, kSched), DomainError);
    }
}

TEST_CASE("average ratio, exact form", "[kinetics]") {
    SECTION("pump indistinguishable from probe") {
        const RateSet r{0.6, 1.5, 0.6, 1.5};
        CHECK_THAT(average_ratio_exact(r, kSched), WithinRel(1.5 / 0.6, 1e-12));
    }
    SECTION("equals the extrema average built from an independent N*") {
        std::mt19937_64 g(41);
        for (int i = 0; i < 200; ++i) {
            const auto r = random_rates(g);
            const auto s = random_schedule(g);
            const Eigen::Vector2d n = oracle::unit_eigenvector(oracle::period_matrix(r.nu_plus, r.nu_minus, r.kappa_plus, r.kappa_minus, s.delta, s.period));
            const Eigen::Vector2d a = oracle::expm_generator(r.nu_plus, r.nu_minus, s.delta) * n;
            const double ref = (n(0) + a(0)) / (n(1) + a(1));
            CHECK(oracle::rel_err(average_ratio_exact(r, s), ref) <= 1e-9);
        }
    }
    SECTION("small-rate regime matches the linearized form") {
        const EffectiveRates eff{0.004, 0.006, 0.05, 0.02};
        const auto r = effective_to_window_rates(eff);
        const double exact = average_ratio_exact(r, kSched), lin = average_ratio_linearized(eff, kSched);
        const double bound = std::max(r.nu() * kSched.delta, r.kappa() * kSched.period);
        CHECK(oracle::rel_err(lin, exact) <= bound);
    }
    SECTION("pump-raises ratio against the time-averaged simulation") {
        // trapezoid average of one quasi-equilibrium period, fine grid
        const auto n = quasi_equilibrium(kPumpRaises, kSched);
        const auto t = grid(1.0, 1e-5);
        const auto tr = simulate_time_trace(kPumpRaises, kSched, n, t);
        double sm = 0.0, sz = 0.0;
        for (std::size_t i = 1; i < tr.size(); ++i) {
            sm += 0.5 * (tr[i].n_minus + tr[i - 1].n_minus);
            sz += 0.5 * (tr[i].n_zero + tr[i - 1].n_zero);
        }
        const double integral = average_ratio_integral(kPumpRaises, kSched);
        CHECK(oracle::rel_err(integral, sm / sz) <= 1e-8);
        const double exact = average_ratio_exact(kPumpRaises, kSched);
        CHECK(std::isfinite(exact));
        CHECK(oracle::rel_err(exact, integral) <= 0.1);
    }
    SECTION("NV0 vanishing") {
        CHECK_THROWS_AS(average_ratio_exact({0.0, 3.0, 0.0, 0.5}, kSched), DomainError);
    }
}

TEST_CASE("average ratio, linearized form", "[kinetics]") {
    CHECK_THAT(average_ratio_linearized({0.5, 1.5, 0.0, 0.0}, kSched), WithinRel(3.0, 1e-15));
    CHECK(average_ratio_linearized({1.0, 1.0, 1e9, 0.0}, {1e-4, 0.2}) < 1e-4);
    CHECK_THAT(average_ratio_linearized({1.0, 1.0, 1e4, 0.0}, {1e-4, 0.2}), WithinRel(0.2 / 1.2, 1e-12));
    CHECK_THROWS_AS(average_ratio_linearized({0.0, 1.0, 0.0, 1.0}, kSched), DomainError);
}

TEST_CASE("effective to window rates", "[kinetics]") {
    const auto a = effective_to_window_rates({0.3, 0.7, 0.0, 0.0});
    CHECK(a.nu_plus == a.kappa_plus);
    CHECK(a.nu_minus == a.kappa_minus);
    const auto b = effective_to_window_rates({1.0, 2.0, 100.0, 0.0});
    CHECK(b.nu_plus == 101.0);
    CHECK(b.nu_minus == 2.0);
    CHECK(b.kappa_plus == 1.0);
    CHECK(b.kappa_minus == 2.0);
}

TEST_CASE("time trace", "[kinetics]") {
    SECTION("starting at N* the trace is T-periodic") {
        const auto n = quasi_equilibrium(kPumpRaises, kSched);
        std::vector<double> t;
        for (int i = 0; i <= 400; ++i) t.push_back(0.01 * i);
        const auto tr = simulate_time_trace(kPumpRaises, kSched, n, t);
        for (std::size_t i = 0; i + 100 < tr.size(); ++i) CHECK(std::abs(tr[i].n_minus - tr[i + 100].n_minus) <= 1e-12);
    }
    SECTION("populations are conserved") {
        const auto tr = simulate_time_trace(kBleach, kSched, {0.3, 0.7}, grid(30.0, 0.013));
        for (const auto& p : tr) CHECK(std::abs(p.total() - 1.0) <= 1e-13);
    }
    SECTION("distance to the orbit contracts by the second eigenvalue") {
        std::mt19937_64 g(51);
        for (int i = 0; i < 20; ++i) {
            const auto r = random_rates(g, 1e-2, 3.0);
            const PulseSchedule s{0.2, 1.0};
            const auto n = quasi_equilibrium(r, s);
            std::vector<double> t{0.0, 1.0, 2.0, 3.0};
            const auto tr = simulate_time_trace(r, s, {1.0, 0.0}, t);
            const double lam = std::exp(-r.nu() * s.delta - r.kappa() * (s.period - s.delta));
            CHECK_THAT(second_eigenvalue(r, s), WithinRel(lam, 1e-14));
            const double d0 = tr[0].n_minus - n.n_minus, d1 = tr[1].n_minus - n.n_minus, d2 = tr[2].n_minus - n.n_minus;
            if (std::abs(d1) > 1e-6) CHECK_THAT(d1 / d0, WithinRel(lam, 1e-6));
            if (std::abs(d2) > 1e-6) CHECK_THAT(d2 / d1, WithinRel(lam, 1e-6));
        }
    }
    SECTION("bleach and recovery under a pump window") {
        const double dt = 0.01;
        const auto t = grid(100.0, dt);
        const auto tr = simulate_time_trace(kBleach, kSched, {1.0, 0.0}, t, {10.0, 60.0});
        std::vector<double> nm;
        for (const auto& p : tr) nm.push_back(p.n_minus);
        // nothing happens before the pump starts
        CHECK(tr[static_cast<std::size_t>(9.99 / dt)].n_minus == 1.0);
        const auto ra = rolling_period_average(nm, dt, 1.0);
        double lowest = 1.0;
        for (std::size_t i = 1; i < ra.values.size(); ++i) {
            const double t_end = t[i + ra.offset];
            if (t_end > 10.0 && t_end <= 60.0) CHECK(ra.values[i] <= ra.values[i - 1] + 1e-12);
            if (t_end > 60.0 + 1.0) CHECK(ra.values[i] >= ra.values[i - 1] - 1e-12);
            lowest = std::min(lowest, ra.values[i]);
        }
        CHECK(lowest < 0.7);
        CHECK(ra.values.back() > 0.99);
    }
    SECTION("unsorted grid") {
        const std::vector<double> t{0.0, 0.5, 0.4};
        CHECK_THROWS_AS(simulate_time_trace(kPumpRaises, kSched, {1.0, 0.0}, t), DomainError);
    }
}

TEST_CASE("rolling period average", "[kinetics]") {
    SECTION("constant in, constant out") {
        const std::vector<double> c(500, 0.37);
        for (auto pol : {EdgePolicy::valid, EdgePolicy::reflect}) {
            const auto r = rolling_period_average(c, 0.01, 1.0, pol);
            for (double v : r.values) CHECK_THAT(v, WithinAbs(0.37, 1e-15));
        }
        CHECK(rolling_period_average(c, 0.01, 1.0, EdgePolicy::valid).values.size() == 401);
        CHECK(rolling_period_average(c, 0.01, 1.0, EdgePolicy::reflect).values.size() == 500);
    }
    SECTION("periodic trace averages to the period mean") {
        const double dt = 0.01;
        const auto n = quasi_equilibrium(kPumpRaises, kSched);
        const auto tr = simulate_time_trace(kPumpRaises, kSched, n, grid(5.0, dt));
        std::vector<double> nm;
        for (const auto& p : tr) nm.push_back(p.n_minus);
        const double mean = std::accumulate(nm.begin(), nm.begin() + 100, 0.0) / 100.0;
        for (double v : rolling_period_average(nm, dt, 1.0).values) CHECK_THAT(v, WithinAbs(mean, 1e-12));
    }
    SECTION("window longer than the trace") {
        const std::vector<double> c(50, 1.0);
        CHECK_THROWS_AS(rolling_period_average(c, 0.01, 1.0), DomainError);
    }
}
