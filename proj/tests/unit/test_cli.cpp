#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "nvcharge/io/csv.hpp"
#include "nvcharge/io/files.hpp"
#include "nvcharge/io/json.hpp"
#include "nvcharge/synth.hpp"

using namespace nvcharge;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

const fs::path& work() {
    static const fs::path w = [] {
        fs::path p(NVCHARGE_WORK_DIR);
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return w;
}

Run cli(const std::string& args) {
    const auto o = work() / "stdout.txt", e = work() / "stderr.txt";
    const std::string cmd = std::string(NVCHARGE_CLI) + " " + args + " > " + o.string() + " 2> " + e.string();
    const int st = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    r.out = io::read_file(o);
    r.err = io::read_file(e);
    return r;
}

std::string out_dir(const std::string& name) { return (work() / name).string(); }
std::string config(const std::string& name) { return std::string(NVCHARGE_CONFIG_DIR) + "/" + name; }

std::string put(const std::string& name, const std::string& text) {
    const auto p = work() / name;
    io::write_file_atomic(p, text);
    return p.string();
}

io::Json report(const std::string& dir, const std::string& name) { return io::parse_json(io::read_file(fs::path(dir) / name)); }

} // namespace

TEST_CASE("help text lists subcommands and units", "[cli]") {
    const auto top = cli("--help");
    CHECK(top.code == 0);
    for (const char* s : {"simulate", "fit", "calc", "synth", "--seed", "--out-dir", "--config"}) CHECK(top.out.find(s) != std::string::npos);
    const auto calc = cli("calc --help");
    CHECK(calc.code == 0);
    for (const char* u : {"[nm]", "[uJ]", "[us]", "[mm]", "[deg]", "[1/cm]", "[K]", "[meV]"}) CHECK(calc.out.find(u) != std::string::npos);
    CHECK(cli("").code == 2);
    CHECK(cli("calc not-a-kind").code == 2);
    CHECK(cli("--version").code == 0);
}

TEST_CASE("calc dosimetry with the default inputs", "[cli]") {
    const auto r = cli("calc dosimetry");
    REQUIRE(r.code == 0);
    const auto j = io::parse_json(r.out.substr(r.out.find('{')));
    const auto& res = j.at("result");
    CHECK(res.at("stack_transmission").get<double>() == Catch::Approx(0.67).margin(0.01));
    const double flux = res.at("flux_per_a2").get<double>();
    CHECK(flux >= 0.025);
    CHECK(flux < 0.035);
    CHECK(res.at("ionization_probability").get<double>() == Catch::Approx(3e-3).epsilon(0.1));
    CHECK(r.out.find("transmission") != std::string::npos);
}

TEST_CASE("calc reports total internal reflection", "[cli]") {
    const auto r = cli("calc snell --n1 2.717 --n2 1 --angle 50");
    CHECK(r.code == 0);
    CHECK(r.out.find("total internal reflection") != std::string::npos);
    const auto s = cli("calc stack --indices 2.717,1 --angle 60");
    CHECK(s.code == 0);
    CHECK(s.out.find("total internal reflection") != std::string::npos);
}

TEST_CASE("exit codes", "[cli]") {
    SECTION("missing input file: I/O") {
        const auto r = cli("fit rep-sweep --input " + (work() / "nope.csv").string() + " --delta 1e-4");
        CHECK(r.code == 5);
    }
    SECTION("missing config field: config error naming the field") {
        const auto cfg = put("no_schedule.json", R"({"rates": {"nu_plus": 1}})");
        const auto r = cli("simulate --config " + cfg + " --out-dir " + out_dir("x"));
        CHECK(r.code == 2);
        CHECK(r.err.find("schedule") != std::string::npos);
        const auto d = cli("fit rep-sweep --input " + put("s.csv", "x,y\n1,1\n2,1\n3,1\n"));
        CHECK(d.code == 2);
        CHECK(d.err.find("delta") != std::string::npos);
    }
    SECTION("malformed CSV: parse error with the line") {
        const auto in = put("bad.csv", "x,y\n0.1,0.5\n0.2,oops\n");
        const auto r = cli("fit rep-sweep --delta 1e-4 --input " + in);
        CHECK(r.code == 3);
        CHECK(r.err.find("line 3") != std::string::npos);
        CHECK(r.err.find("bad.csv") != std::string::npos);
        const auto j = cli("simulate --config " + put("bad.json", "{\n \"schedule\": {,\n}"));
        CHECK(j.code == 3);
    }
    SECTION("fit that cannot converge") {
        // background pole above the window: rejected after the constrained retry
        synth::LineshapeModel m;
        m.background = {synth::BackgroundKind::Rational, 0, 0, -100.0, 952.0};
        m.components = {{synth::Profile::Voigt, 946.0, 0.1, 0.15, 20.0}};
        const auto in = put("pole.csv", io::write_spectrum_csv(synth::generate_spectrum(m, synth::uniform_grid(936.0, 950.5, 0.02), {}).trace));
        const auto r = cli("fit voigt --input " + in + " --out-dir " + out_dir("pole"));
        CHECK(r.code == 4);
    }
    SECTION("domain violation") {
        const auto in = put("two.csv", "x,y\n1,1\n2,1.1\n");
        CHECK(cli("fit rep-sweep --delta 1e-4 --input " + in).code == 6);
        CHECK(cli("calc photons --wavelength -3").code == 6);
    }
    SECTION("nonexistent config file") { CHECK(cli("simulate --config " + (work() / "none.json").string()).code == 2); }
}

TEST_CASE("simulate with the pump-raises config", "[cli]") {
    const auto dir = out_dir("s7");
    const auto r = cli("simulate --config " + config("pump_raises.json") + " --out-dir " + dir);
    REQUIRE(r.code == 0);
    for (const char* f : {"trajectory.csv", "rolling_average.csv", "simulate_report.json"}) CHECK(fs::exists(fs::path(dir) / f));
    const auto j = report(dir, "simulate_report.json");
    const auto& q = j.at("result").at("quasi_equilibrium");
    CHECK(q.contains("average_ratio_exact"));
    CHECK(q.contains("n_star"));
    CHECK(q.contains("post_pulse"));
    CHECK(j.at("provenance").at("inputs").at("config").at("hash").get<std::string>().rfind("fnv1a64:", 0) == 0);
    CHECK(j.at("report_hash").get<std::string>().size() > 8);
    // flags override config keys
    const auto o = cli("simulate --config " + config("pump_raises.json") + " --t-end 3 --out-dir " + out_dir("s7b"));
    REQUIRE(o.code == 0);
    CHECK(report(out_dir("s7b"), "simulate_report.json").at("result").at("samples").get<int>() == 3 * 200 + 1);
}

TEST_CASE("fit decompose recovers a synthetic mixture", "[cli]") {
    const auto dir = out_dir("mix");
    REQUIRE(cli("synth mixture --a 0.6 --b 0.4 --sigma 1e-3 --seed 4 --out-dir " + dir).code == 0);
    const auto r = cli("fit decompose --input " + dir + "/mixture.csv --out-dir " + dir);
    REQUIRE(r.code == 0);
    const auto d = report(dir, "fit_decompose.json").at("result").at("decomposition");
    CHECK(d.at("a").get<double>() == Catch::Approx(0.6).margin(2e-3));
    CHECK(d.at("b").get<double>() == Catch::Approx(0.4).margin(2e-3));
}

TEST_CASE("fit power-sweep on the 12 K row", "[cli]") {
    const auto dir = out_dir("pw");
    REQUIRE(cli("synth power-sweep --row 12K --noise 0.02 --seed 2 --out-dir " + dir).code == 0);
    REQUIRE(cli("fit power-sweep --input " + dir + "/sweep.csv --out-dir " + dir).code == 0);
    const auto p = report(dir, "fit_power-sweep.json").at("result").at("parameters");
    const std::vector<std::pair<const char*, double>> truth{{"A", 0.17}, {"B", 0.0}, {"C", 0.001}, {"D", 0.006}, {"E", 0.0003}};
    for (const auto& [k, v] : truth) {
        INFO(k);
        CHECK(std::abs(p.at(k).at("value").get<double>() - v) <= 3.0 * p.at(k).at("error").get<double>());
    }
}

TEST_CASE("synth outputs are stable under a seed", "[cli]") {
    auto hash_of = [](const std::string& args) {
        const auto r = cli(args);
        REQUIRE(r.code == 0);
        return io::parse_json(r.out).at("report_hash").get<std::string>();
    };
    const auto a = hash_of("synth spectrum --seed 5 --out-dir " + out_dir("h1"));
    const auto b = hash_of("synth spectrum --seed 5 --out-dir " + out_dir("h2"));
    const auto c = hash_of("synth spectrum --seed 6 --out-dir " + out_dir("h3"));
    CHECK(a == b);
    CHECK(a != c);
    CHECK(io::read_file(out_dir("h1") + "/spectrum.csv") == io::read_file(out_dir("h2") + "/spectrum.csv"));
    CHECK(fs::exists(out_dir("h1") + "/truth_spectrum.json"));
}

TEST_CASE("arrival fixture bins align with pulse edges", "[cli]") {
    // 5 Hz, 100 us pulses that bleach NV- strongly; recovery at 20/s
    const auto cfg = put("arr.json", R"({"schedule": {"delta": 1e-4, "period": 0.2},
        "rates": {"nu_plus": 5e3, "kappa_minus": 20.0}, "periods": 100, "brightness": 2e5})");
    const auto dir = out_dir("arr");
    REQUIRE(cli("synth arrivals --config " + cfg + " --seed 3 --out-dir " + dir).code == 0);
    const auto t = io::parse_arrivals_csv(io::read_file(dir + "/arrivals.csv"));
    // fold at the period with bins one pulse long: bin 0 is exactly the pulse
    const double period = 0.2, delta = 1e-4;
    const auto nb = static_cast<std::size_t>(std::llround(period / delta));
    REQUIRE(std::abs(nb * delta - period) <= 1e-12);
    std::vector<double> c(nb, 0.0);
    for (double x : t) c[std::min(nb - 1, static_cast<std::size_t>(std::fmod(x, period) / delta))] += 1.0;
    const double before = c[nb - 2] + c[nb - 1], after = c[1] + c[2];
    INFO("before " << before << " after " << after << " pulse " << c[0]);
    // one pulse removes a fraction 1 - exp(-nu delta) of NV-, all of it inside bin 0
    CHECK_THAT(after / before, Catch::Matchers::WithinAbs(std::exp(-0.5), 0.04));
    CHECK(c[0] < 0.5 * before);
    CHECK(c[0] > 0.5 * after);
    const auto truth = report(dir, "truth_arrivals.json");
    CHECK(truth.at("window_s").get<double>() == Catch::Approx(20.0));
}

TEST_CASE("fit triexp on a synthetic histogram", "[cli]") {
    const auto dir = out_dir("tri");
    REQUIRE(cli("synth decay --seed 1 --out-dir " + dir).code == 0);
    const auto r = cli("fit triexp --input " + dir + "/histogram.csv --out-dir " + dir);
    REQUIRE(r.code == 0);
    const auto res = report(dir, "fit_triexp.json").at("result");
    CHECK(res.at("n_active").get<int>() == 3);
}
