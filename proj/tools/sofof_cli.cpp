#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sofof/config.hpp"
#include "sofof/geo.hpp"
#include "sofof/scenario.hpp"

namespace fs = std::filesystem;
using namespace sofof;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kOutputError = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::optional<std::uint64_t> parse_u64(const std::string& s)
{
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        return std::nullopt;
    }
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::vector<std::uint64_t> parse_list(const std::string& flag, const std::string& text)
{
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto v = parse_u64(item);
        if (!v || *v == 0) {
            throw UsageError(flag + ": expected positive integers, got '" + item + "'");
        }
        out.push_back(*v);
    }
    if (out.empty()) {
        throw UsageError(flag + ": empty value list");
    }
    return out;
}

geo::Point2 parse_point(const std::string& flag, const std::string& text)
{
    const auto comma = text.find(',');
    try {
        if (comma == std::string::npos) {
            throw std::invalid_argument(text);
        }
        std::size_t used = 0;
        const double x = std::stod(text.substr(0, comma), &used);
        if (used != comma) {
            throw std::invalid_argument(text);
        }
        const std::string rest = text.substr(comma + 1);
        const double y = std::stod(rest, &used);
        if (used != rest.size()) {
            throw std::invalid_argument(text);
        }
        return {x, y};
    } catch (const std::exception&) {
        throw UsageError(flag + ": expected x,y, got '" + text + "'");
    }
}

/// --seed wins over SOFOF_SEED, which wins over the config file.
void apply_seed(scenario::ScenarioConfig& cfg, const std::string& seed_flag)
{
    if (!seed_flag.empty()) {
        const auto v = parse_u64(seed_flag);
        if (!v) {
            throw UsageError("--seed: expected an unsigned integer");
        }
        cfg.seed = *v;
        return;
    }
    if (const char* env = std::getenv("SOFOF_SEED"); env && *env) {
        const auto v = parse_u64(env);
        if (!v) {
            throw UsageError("SOFOF_SEED: expected an unsigned integer");
        }
        cfg.seed = *v;
    }
}

int cmd_run(const std::string& config_path, const std::string& out_dir, const std::string& seed)
{
    auto cfg = config::load_scenario(config_path);
    apply_seed(cfg, seed);
    const auto report = scenario::run(cfg);
    scenario::write_outputs(report, out_dir);
    std::cout << "wrote " << (fs::path(out_dir) / "report.json").string() << '\n';
    return kOk;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, const std::string& seed,
              const std::string& dt_list, const std::string& n_list, std::size_t replications)
{
    const auto dts = parse_list("--dt-max", dt_list);
    const auto ns = parse_list("--n", n_list);
    auto cfg = config::load_scenario(config_path);
    apply_seed(cfg, seed);
    if (replications > 0) {
        cfg.sweep_replications = replications;
    }
    std::vector<TimeMs> dt_values(dts.begin(), dts.end());
    std::vector<std::size_t> n_values(ns.begin(), ns.end());
    const auto cells = scenario::sweep(cfg, dt_values, n_values);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    const fs::path path = fs::path(out_dir) / "sweep.csv";
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (ec || !f) {
        throw scenario::OutputError("cannot write " + path.string());
    }
    f << scenario::sweep_csv(cells);
    if (!f.flush()) {
        throw scenario::OutputError("failed writing " + path.string());
    }
    std::cout << scenario::sweep_csv(cells);
    return kOk;
}

struct DecideArgs {
    std::string route;
    bool codm{false};
    bool lodm{false};
    std::optional<double> t_min;
    std::optional<double> speed;
    std::string map_id;
    std::optional<double> r_off;
    std::optional<double> d_min;
    std::string pos_last;
    std::string pos_sp;
    bool skip_to_radius{false};
};

int cmd_decide(const std::string& config_path, const DecideArgs& a)
{
    if (a.codm == a.lodm) {
        throw UsageError("decide: pass exactly one of --codm or --lodm");
    }
    const auto cfg = config::load_scenario(config_path);
    const auto route = config::load_route_csv(a.route);
    const auto& vehicle = cfg.vehicles.front();
    char buf[128];
    if (a.codm) {
        const double v = a.speed.value_or(vehicle.speed_mps);
        const double t_min = a.t_min.value_or(cfg.provider.t_min);
        const std::string map = a.map_id.empty() ? vehicle.requester.map_id : a.map_id;
        const bool known = cfg.provider.known_map_ids.contains(map);
        const double t = geo::time_in_area(route, cfg.provider.offloading_area, v);
        const bool accept = geo::codm_accept(route, cfg.provider.offloading_area, known, v, t_min);
        std::snprintf(buf, sizeof buf, "%s time_in_area=%.3f", accept ? "accept" : "decline", t);
    } else {
        const double r_off = a.r_off.value_or(vehicle.requester.r_off);
        const double d_min = a.d_min.value_or(vehicle.requester.d_min);
        const geo::Point2 sp = a.pos_sp.empty() ? cfg.provider.connection_point : parse_point("--pos-sp", a.pos_sp);
        const geo::Point2 last = a.pos_last.empty() ? route.front() : parse_point("--pos-last", a.pos_last);
        geo::LodmOptions opts;
        opts.skip_to_first_in_radius = a.skip_to_radius || vehicle.requester.lodm.skip_to_first_in_radius;
        const auto res = geo::lodm_evaluate(route, last, r_off, sp, d_min, opts);
        std::snprintf(buf, sizeof buf, "%s d_passed=%.3f", res.accept ? "accept" : "decline", res.d_passed);
    }
    std::cout << buf << '\n';
    return kOk;
}

int cmd_report(const std::string& out_dir)
{
    const fs::path path = fs::path(out_dir) / "report.json";
    std::ifstream f(path);
    if (!f) {
        throw UsageError("no report.json in " + out_dir);
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
    try {
        const auto& g = doc.at("global");
        char buf[256];
        std::cout << "seed " << doc.at("seed").get<std::uint64_t>() << ", duration "
                  << doc.at("duration_s").get<double>() << " s\n";
        for (const auto& v : doc.at("vehicles")) {
            std::snprintf(buf, sizeof buf, "vehicle %u: t_off=%.3f s, episodes=%zu, fallbacks=%llu",
                          v.at("station").get<unsigned>(), v.at("t_off_total_s").get<double>(),
                          v.at("episodes").size(),
                          static_cast<unsigned long long>(v.at("fallback_count").get<std::uint64_t>()));
            std::cout << buf;
            const auto& viol = v.at("violations");
            if (viol.empty()) {
                std::cout << ", violations: none";
            } else {
                std::cout << ", violations:";
                for (auto it = viol.begin(); it != viol.end(); ++it) {
                    std::cout << ' ' << it.key() << '=' << it.value().get<std::uint64_t>();
                }
            }
            std::cout << '\n';
        }
        std::snprintf(buf, sizeof buf, "break-even ratio: %.4f", g.at("break_even_ratio").get<double>());
        std::cout << buf;
        if (g.contains("published_ratio")) {
            std::snprintf(buf, sizeof buf, " (published %.4f)", g.at("published_ratio").get<double>());
            std::cout << buf;
        }
        std::cout << '\n';
        if (g.contains("break_even_note")) {
            std::cout << "note: " << g.at("break_even_note").get<std::string>() << '\n';
        }
        std::snprintf(buf, sizeof buf, "t_d/t_total: %.4f", g.at("t_d_ratio").get<double>());
        std::cout << buf << '\n';
        std::cout << "verdict: " << g.at("verdict").get<std::string>() << '\n';
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Service-oriented function offloading simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::string seed;

    auto* run = app.add_subcommand("run", "Run one scenario and write report.json and CSVs");
    run->add_option("config", config_path, "Scenario YAML file")->required();
    run->add_option("-o,--output", out_dir, "Output directory");
    run->add_option("--seed", seed, "Seed override (falls back to SOFOF_SEED)");

    std::string dt_list = "10,25,50,100,150";
    std::string n_list = "1,2,4";
    auto* sw = app.add_subcommand("sweep", "Mean offloading duration over dt_max x vehicle count");
    sw->add_option("config", config_path, "Scenario YAML file")->required();
    sw->add_option("-o,--output", out_dir, "Output directory");
    sw->add_option("--seed", seed, "Seed override (falls back to SOFOF_SEED)");
    sw->add_option("--dt-max", dt_list, "Comma-separated inter-arrival bounds in ms");
    sw->add_option("--n", n_list, "Comma-separated vehicle counts");
    std::size_t replications = 0;
    sw->add_option("--replications", replications, "Seeds pooled per cell (default: from config)");

    DecideArgs da;
    double t_min = 0;
    double speed = 0;
    double r_off = 0;
    double d_min = 0;
    auto* de = app.add_subcommand("decide", "Evaluate one offloading decision on a route CSV");
    de->add_option("config", config_path, "Scenario YAML file")->required();
    de->add_option("--route", da.route, "CSV of x,y waypoints")->required();
    auto* codm = de->add_flag("--codm", da.codm, "Provider-side decision (time in area)");
    auto* lodm = de->add_flag("--lodm", da.lodm, "Requester-side decision (distance within radius)");
    codm->excludes(lodm);
    auto* o_tmin = de->add_option("--t-min", t_min, "Minimum time in area [s]");
    auto* o_speed = de->add_option("--speed", speed, "Assumed speed [m/s]");
    de->add_option("--map-id", da.map_id, "Map identifier of the route");
    auto* o_roff = de->add_option("--r-off", r_off, "Offloading radius [m]");
    auto* o_dmin = de->add_option("--d-min", d_min, "Minimum distance [m]");
    de->add_option("--pos-last", da.pos_last, "Requester position x,y (default: first waypoint)");
    de->add_option("--pos-sp", da.pos_sp, "Provider position x,y (default: connection point)");
    de->add_flag("--skip-to-radius", da.skip_to_radius, "Start at the first waypoint inside the radius");

    auto* rep = app.add_subcommand("report", "Summarize a report.json");
    rep->add_option("dir", out_dir, "Directory containing report.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (*run) {
            return cmd_run(config_path, out_dir, seed);
        }
        if (*sw) {
            return cmd_sweep(config_path, out_dir, seed, dt_list, n_list, replications);
        }
        if (*de) {
            if (*o_tmin) da.t_min = t_min;
            if (*o_speed) da.speed = speed;
            if (*o_roff) da.r_off = r_off;
            if (*o_dmin) da.d_min = d_min;
            return cmd_decide(config_path, da);
        }
        if (*rep) {
            return cmd_report(out_dir);
        }
    } catch (const config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const scenario::OutputError& e) {
        std::cerr << "output error: " << e.what() << '\n';
        return kOutputError;
    } catch (const ValidationError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return kConfigError;
}
