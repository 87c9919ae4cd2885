#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sofof/config.hpp"
#include "support.hpp"

using namespace sofof;
using namespace sofof::config;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string calibrated_text() { return slurp(testing::source_path("configs/calibrated.yaml")); }

std::string replace(std::string s, const std::string& from, const std::string& to)
{
    const auto pos = s.find(from);
    REQUIRE_MESSAGE(pos != std::string::npos, from);
    return s.replace(pos, from.size(), to);
}

ConfigError parse_error(const std::string& text)
{
    try {
        parse_scenario(text);
    } catch (const ConfigError& e) {
        return e;
    }
    FAIL("expected ConfigError");
    return ConfigError("", 0, "");
}

struct Cli {
    int code{0};
    std::string out;
    std::string err;
};

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / "sofof_cli_test";
    fs::create_directories(dir);
    return dir / name;
}

Cli cli(const std::string& args, const std::string& env = "")
{
    const auto out = scratch("stdout.txt");
    const auto err = scratch("stderr.txt");
    const std::string cmd = env + " '" + std::string(SOFOF_CLI) + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return Cli{WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path write(const std::string& name, const std::string& text)
{
    const auto p = scratch(name);
    std::ofstream(p, std::ios::binary) << text;
    return p;
}

/// Calibrated scenario shortened to `duration` ms and started next to the area.
fs::path short_config(TimeMs duration)
{
    auto text = replace(calibrated_text(), "duration: 300000", "duration: " + std::to_string(duration));
    text = replace(text, "spawn_offset_m: 1000", "spawn_offset_m: 2400");
    return write("short_" + std::to_string(duration) + ".yaml", text);
}

}  // namespace

TEST_CASE("shipped configs load")
{
    const auto cal = testing::load_config("calibrated.yaml");
    CHECK(cal.seed == 7);
    CHECK(cal.duration == 300000);
    CHECK(cal.tick == 10);
    CHECK(cal.provider.station == StationId{100});
    CHECK(cal.provider.known_map_ids.contains("ulm-lehr"));
    REQUIRE(cal.vehicles.size() == 1);
    CHECK(cal.vehicles[0].route.size() == 4);
    CHECK(cal.vehicles[0].requester.qos.at(ServiceId("tpl")).dt_max == 100);
    CHECK(cal.latency.base_mean == 10.54);
    CHECK(cal.cpu.sofof_sr == 0.96);
    CHECK(cal.published_ratio == 0.0793);
    const auto ideal = testing::load_config("ideal.yaml");
    CHECK(ideal.latency.base_std == 0.0);
}

TEST_CASE("missing, unknown and mistyped keys")
{
    const auto text = calibrated_text();
    auto e = parse_error(replace(text, "provider:\n", "provider_x:\n"));
    CHECK(std::string(e.what()).find("provider") != std::string::npos);

    const auto no_provider = text.substr(0, text.find("provider:")) + text.substr(text.find("routes:"));
    e = parse_error(no_provider);
    CHECK(e.key() == "provider");

    e = parse_error(replace(text, "  t_min: 10\n", "  t_min: 10\n  t_mni: 3\n"));
    CHECK(e.key() == "provider.t_mni");
    CHECK(e.line() > 1);
    CHECK(std::string(e.what()).find("line " + std::to_string(e.line())) != std::string::npos);

    e = parse_error(replace(text, "tick: 10", "tick: ten"));
    CHECK(e.key() == "tick");
    CHECK(e.line() == 4);

    e = parse_error(replace(text, "route: loop", "route: circle"));
    CHECK(e.key().find("route") != std::string::npos);

    e = parse_error(replace(text, "dt_max: 100", "dt_max: 100, dt_mx: 3"));
    CHECK(e.key().find("dt_mx") != std::string::npos);

    e = parse_error("seed: [1");
    CHECK(e.line() >= 1);
    e = parse_error("");
    CHECK(std::string(e.what()).find("empty") != std::string::npos);
}

TEST_CASE("validation errors surface as ConfigError or ValidationError")
{
    const auto text = calibrated_text();
    CHECK_THROWS(parse_scenario(replace(text, "duration: 300000", "duration: 0")));
    CHECK_THROWS(parse_scenario(replace(text, "r_off: 300", "r_off: -1")));
    CHECK_THROWS(parse_scenario(replace(text, "TPLd: 8.5", "TPLd: 30")));
}

TEST_CASE("inline routes, optional sections and record flags")
{
    auto text = replace(calibrated_text(), "route: loop", "route: [[0, 0], [500, 0], [500, 100]]");
    text = replace(text, "  t_min: 10\n", "  t_min: 10\n  max_active_sessions: 3\n  record_decisions: false\n");
    const auto cfg = parse_scenario(text);
    CHECK(cfg.vehicles[0].route.size() == 3);
    CHECK(cfg.provider.max_active_sessions == 3u);
    CHECK_FALSE(cfg.provider.record_decisions);
}

TEST_CASE("route csv")
{
    CHECK(parse_route_csv("x,y\n0,0\n10,0\n").size() == 2);
    CHECK(parse_route_csv("1.5,2\n").front() == geo::Point2{1.5, 2});
    try {
        parse_route_csv("x,y\n0,0\n1;1\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse_route_csv("x,y\n"), ConfigError);
    CHECK_THROWS_AS(load_route_csv("/nonexistent/route.csv"), ConfigError);
}

TEST_CASE("cli run, seeds and determinism")
{
    const auto cfg = short_config(20000);
    const auto a = scratch("run_a");
    const auto b = scratch("run_b");
    fs::remove_all(a);
    fs::remove_all(b);
    auto r = cli("run '" + cfg.string() + "' -o '" + a.string() + "' --seed 5");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(a / "report.json"));
    CHECK(fs::exists(a / "episodes.csv"));
    CHECK(fs::exists(a / "latency.csv"));
    r = cli("run '" + cfg.string() + "' -o '" + b.string() + "'", "SOFOF_SEED=5");
    REQUIRE(r.code == 0);
    for (const char* f : {"report.json", "episodes.csv", "latency.csv"}) {
        CHECK(slurp(a / f) == slurp(b / f));
    }
    CHECK(slurp(a / "report.json").find("\"seed\": 5") != std::string::npos);
    // --seed beats SOFOF_SEED.
    r = cli("run '" + cfg.string() + "' -o '" + b.string() + "' --seed 5", "SOFOF_SEED=6");
    CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
    CHECK(cli("run '" + cfg.string() + "' -o '" + b.string() + "' --seed x").code == 2);
}

TEST_CASE("cli config and output errors")
{
    const auto text = calibrated_text();
    const auto no_provider = write("no_provider.yaml", text.substr(0, text.find("provider:")) + text.substr(text.find("routes:")));
    auto r = cli("run '" + no_provider.string() + "' -o '" + scratch("x").string() + "'");
    CHECK(r.code == 2);
    CHECK(r.err.find("provider") != std::string::npos);

    CHECK(cli("run /nonexistent.yaml").code == 2);
    CHECK(cli("bogus").code == 2);

    const auto blocker = write("blocker", "x");
    r = cli("run '" + short_config(1000).string() + "' -o '" + (blocker / "sub").string() + "'");
    CHECK(r.code == 3);
}

TEST_CASE("cli sweep")
{
    const auto cfg = short_config(10000);
    const auto dir = scratch("sweep");
    auto r = cli("sweep '" + cfg.string() + "' -o '" + dir.string() + "' --dt-max 10,50,100,150 --n 1,2");
    REQUIRE(r.code == 0);
    const auto csv = slurp(dir / "sweep.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
    CHECK(r.out == csv);
    CHECK(cli("sweep '" + cfg.string() + "' -o '" + dir.string() + "' --dt-max ''").code == 2);
    CHECK(cli("sweep '" + cfg.string() + "' -o '" + dir.string() + "' --n 0").code == 2);
    CHECK(cli("sweep '" + cfg.string() + "' -o '" + dir.string() + "' --dt-max 10,,20").code == 2);
}

TEST_CASE("cli decide")
{
    const auto cfg = testing::source_path("configs/calibrated.yaml");
    const auto area_route = write("area_route.csv", "x,y\n10,50\n20,50\n30,50\n40,50\n50,50\n60,50\n70,50\n80,50\n90,50\n");
    auto r = cli("decide '" + cfg + "' --route '" + area_route.string() + "' --codm --t-min 5");
    CHECK(r.code == 0);
    CHECK(r.out == "accept time_in_area=8.000\n");
    r = cli("decide '" + cfg + "' --route '" + area_route.string() + "' --codm --t-min 10");
    CHECK(r.out == "decline time_in_area=8.000\n");
    r = cli("decide '" + cfg + "' --route '" + area_route.string() + "' --codm --t-min 5 --map-id elsewhere");
    CHECK(r.out == "decline time_in_area=8.000\n");

    const auto path = write("path.csv", "10,0\n20,0\n30,0\n40,0\n50,0\n60,0\n70,0\n80,0\n90,0\n100,0\n");
    const std::string lodm = "decide '" + cfg + "' --route '" + path.string() + "' --lodm --pos-last 0,0 --pos-sp 0,0 --r-off 300";
    r = cli(lodm + " --d-min 200");
    CHECK(r.code == 0);
    CHECK(r.out == "decline d_passed=100.000\n");
    r = cli(lodm + " --d-min 50");
    CHECK(r.out == "accept d_passed=60.000\n");

    const auto bad = write("bad.csv", "x,y\n1,2\nthree,4\n");
    r = cli("decide '" + cfg + "' --route '" + bad.string() + "' --codm");
    CHECK(r.code == 2);
    CHECK(r.err.find("line 3") != std::string::npos);
    CHECK(cli("decide '" + cfg + "' --route '" + path.string() + "'").code == 2);
    CHECK(cli("decide '" + cfg + "' --route '" + path.string() + "' --codm --lodm").code == 2);
    CHECK(cli("decide '" + cfg + "' --route '" + path.string() + "' --lodm --pos-sp 1").code == 2);
}

TEST_CASE("cli report")
{
    const auto empty = scratch("empty_dir");
    fs::remove_all(empty);
    fs::create_directories(empty);
    CHECK(cli("report '" + empty.string() + "'").code == 2);

    const auto ideal_text = replace(slurp(testing::source_path("configs/ideal.yaml")), "duration: 300000", "duration: 120000");
    const auto ideal = write("ideal_short.yaml", replace(ideal_text, "spawn_offset_m: 1000", "spawn_offset_m: 2400"));
    const auto dir = scratch("ideal_out");
    REQUIRE(cli("run '" + ideal.string() + "' -o '" + dir.string() + "'").code == 0);
    auto r = cli("report '" + dir.string() + "'");
    CHECK(r.code == 0);
    CHECK(r.out.find("verdict: offloading pays") != std::string::npos);
    CHECK(r.out.find("episodes=1") != std::string::npos);

    auto far = replace(calibrated_text(), "duration: 300000", "duration: 5000");
    const auto far_cfg = write("far.yaml", far);
    const auto far_dir = scratch("far_out");
    REQUIRE(cli("run '" + far_cfg.string() + "' -o '" + far_dir.string() + "'").code == 0);
    r = cli("report '" + far_dir.string() + "'");
    CHECK(r.out.find("t_off=0.000 s, episodes=0") != std::string::npos);
    CHECK(r.out.find("verdict: offloading does not pay") != std::string::npos);
    CHECK(r.out.find("note:") != std::string::npos);

    write("empty_dir/report.json", "{\"seed\": 1");
    CHECK(cli("report '" + empty.string() + "'").code == 2);
}
