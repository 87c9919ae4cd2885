#include "sofof/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace sofof::config {

ConfigError::ConfigError(std::string key, int line, const std::string& what)
    : std::runtime_error((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) +
                         (key.empty() ? std::string() : "'" + key + "': ") + what),
      key_(std::move(key)),
      line_(line)
{
}

namespace {

int line_of(const YAML::Node& node) { return node.Mark().line >= 0 ? node.Mark().line + 1 : 0; }

/// A mapping node whose keys are consumed one by one; leftovers are unknown.
class Section {
public:
    Section(YAML::Node node, std::string path, int parent_line)
        : node_(std::move(node)), path_(std::move(path)), line_(parent_line)
    {
        if (!node_.IsMap()) {
            throw ConfigError(path_, node_.IsDefined() ? line_of(node_) : line_, "expected a mapping");
        }
        line_ = line_of(node_);
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    int line() const noexcept { return line_; }
    const std::string& path() const noexcept { return path_; }

    bool has(const std::string& key) const
    {
        const YAML::Node& cn = node_;
        return static_cast<bool>(cn[key]);
    }

    std::vector<std::string> raw_keys() const
    {
        std::vector<std::string> keys;
        for (const auto& kv : node_) {
            keys.push_back(kv.first.as<std::string>());
        }
        return keys;
    }

    YAML::Node raw(const std::string& key)
    {
        used_.insert(key);
        const YAML::Node& cn = node_;
        return cn[key];
    }

    YAML::Node require_node(const std::string& key)
    {
        YAML::Node n = raw(key);
        if (!n) {
            throw ConfigError(key_path(key), line_, "missing required key");
        }
        return n;
    }

    template <typename T>
    T get(const std::string& key, T fallback)
    {
        YAML::Node n = raw(key);
        if (!n) {
            return fallback;
        }
        return convert<T>(n, key_path(key));
    }

    template <typename T>
    T require(const std::string& key)
    {
        return convert<T>(require_node(key), key_path(key));
    }

    Section child(const std::string& key) { return Section(require_node(key), key_path(key), line_); }

    void finish() const
    {
        for (const auto& kv : node_) {
            const auto name = kv.first.as<std::string>();
            if (!used_.contains(name)) {
                throw ConfigError(key_path(name), line_of(kv.first), "unknown key");
            }
        }
    }

    template <typename T>
    static T convert(const YAML::Node& n, const std::string& path)
    {
        if (!n.IsScalar()) {
            throw ConfigError(path, line_of(n), "expected a scalar value");
        }
        try {
            return n.as<T>();
        } catch (const YAML::BadConversion&) {
            throw ConfigError(path, line_of(n), "invalid value '" + n.Scalar() + "'");
        }
    }

private:
    YAML::Node node_;
    std::string path_;
    int line_;
    std::set<std::string> used_;
};

geo::Point2 parse_point(const YAML::Node& n, const std::string& path)
{
    if (!n.IsSequence() || n.size() != 2) {
        throw ConfigError(path, line_of(n), "expected a point [x, y]");
    }
    return {Section::convert<double>(n[0], path), Section::convert<double>(n[1], path)};
}

std::vector<geo::Point2> parse_points(const YAML::Node& n, const std::string& path)
{
    if (!n.IsSequence()) {
        throw ConfigError(path, line_of(n), "expected a list of points");
    }
    std::vector<geo::Point2> pts;
    for (std::size_t i = 0; i < n.size(); ++i) {
        pts.push_back(parse_point(n[i], path + "[" + std::to_string(i) + "]"));
    }
    return pts;
}

template <typename F>
auto checked(const std::string& path, int line, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const ValidationError& e) {
        throw ConfigError(path, line, e.what());
    }
}

ServiceId parse_service_id(const YAML::Node& n, const std::string& path)
{
    const auto name = Section::convert<std::string>(n, path);
    return checked(path, line_of(n), [&] { return ServiceId(name); });
}

svc::ServiceSpec parse_service(Section s)
{
    svc::ServiceSpec spec;
    spec.id = parse_service_id(s.require_node("id"), s.key_path("id"));
    spec.period = s.get<TimeMs>("period", spec.period);
    spec.cpu_cost_active = s.get<double>("cpu_cost_active", spec.cpu_cost_active);
    spec.cpu_cost_deactivated = s.get<double>("cpu_cost_deactivated", spec.cpu_cost_deactivated);
    s.finish();
    checked(s.path(), s.line(), [&] { spec.validate(); });
    return spec;
}

std::vector<svc::ServiceSpec> parse_services(const YAML::Node& n, const std::string& path, int line)
{
    if (!n.IsSequence()) {
        throw ConfigError(path, line_of(n), "expected a list of services");
    }
    std::vector<svc::ServiceSpec> out;
    for (std::size_t i = 0; i < n.size(); ++i) {
        out.push_back(parse_service(Section(n[i], path + "[" + std::to_string(i) + "]", line)));
    }
    return out;
}

provider::ProviderConfig parse_provider(Section s)
{
    provider::ProviderConfig p;
    p.station = StationId{s.require<std::uint32_t>("station")};
    p.connection_point = parse_point(s.require_node("connection_point"), s.key_path("connection_point"));
    {
        const auto node = s.require_node("offloading_area");
        auto pts = parse_points(node, s.key_path("offloading_area"));
        p.offloading_area = checked(s.key_path("offloading_area"), line_of(node),
                                    [&] { return geo::Polygon(std::move(pts)); });
    }
    if (const auto maps = s.raw("known_map_ids")) {
        if (!maps.IsSequence()) {
            throw ConfigError(s.key_path("known_map_ids"), line_of(maps), "expected a list of strings");
        }
        for (const auto& m : maps) {
            p.known_map_ids.insert(Section::convert<std::string>(m, s.key_path("known_map_ids")));
        }
    }
    p.services = parse_services(s.require_node("services"), s.key_path("services"), s.line());
    p.t_min = s.get<double>("t_min", p.t_min);
    p.cam_stale_after = s.get<TimeMs>("cam_stale_after", p.cam_stale_after);
    p.offer_repeat_interval = s.get<TimeMs>("offer_repeat_interval", p.offer_repeat_interval);
    if (s.has("max_active_sessions")) {
        p.max_active_sessions = s.require<std::size_t>("max_active_sessions");
    }
    p.planner_horizon = s.get<TimeMs>("planner_horizon", p.planner_horizon);
    p.planner_step = s.get<TimeMs>("planner_step", p.planner_step);
    p.record_decisions = s.get<bool>("record_decisions", p.record_decisions);
    s.finish();
    checked(s.path(), s.line(), [&] { p.validate(); });
    return p;
}

requester::RequesterConfig parse_requester(Section s)
{
    requester::RequesterConfig r;
    r.station = StationId{s.require<std::uint32_t>("station")};
    r.r_off = s.get<double>("r_off", r.r_off);
    r.d_min = s.get<double>("d_min", r.d_min);
    r.request_timeout = s.get<TimeMs>("request_timeout", r.request_timeout);
    r.map_id = s.get<std::string>("map_id", r.map_id);
    r.clock_skew = s.get<TimeMs>("clock_skew", r.clock_skew);
    r.lodm.skip_to_first_in_radius = s.get<bool>("lodm_skip_to_first_in_radius", false);
    r.planner_horizon = s.get<TimeMs>("planner_horizon", r.planner_horizon);
    r.planner_step = s.get<TimeMs>("planner_step", r.planner_step);
    r.local_services = parse_services(s.require_node("local_services"), s.key_path("local_services"), s.line());
    {
        Section q = s.child("qos");
        for (const auto& kv : q.raw_keys()) {
            const auto path = q.key_path(kv);
            Section entry(q.raw(kv), path, q.line());
            requester::QosProfile profile;
            profile.l_max = entry.get<TimeMs>("l_max", profile.l_max);
            profile.dt_max = entry.get<TimeMs>("dt_max", profile.dt_max);
            entry.finish();
            const ServiceId id = checked(path, entry.line(), [&] { return ServiceId(kv); });
            r.qos[id] = profile;
        }
    }
    s.finish();
    checked(s.path(), s.line(), [&] { r.validate(); });
    return r;
}

scenario::VehicleConfig parse_vehicle(Section s, const std::map<std::string, geo::Route>& routes)
{
    scenario::VehicleConfig v;
    v.requester = parse_requester(s.child("requester"));
    {
        const auto node = s.require_node("route");
        const auto path = s.key_path("route");
        if (node.IsScalar()) {
            const auto name = node.Scalar();
            const auto it = routes.find(name);
            if (it == routes.end()) {
                throw ConfigError(path, line_of(node), "unknown route '" + name + "'");
            }
            v.route = it->second;
        } else {
            auto pts = parse_points(node, path);
            v.route = checked(path, line_of(node), [&] { return geo::Route(std::move(pts)); });
        }
    }
    v.spawn_offset_m = s.get<double>("spawn_offset_m", v.spawn_offset_m);
    v.speed_mps = s.get<double>("speed_mps", v.speed_mps);
    v.cam_period = s.get<TimeMs>("cam_period_ms", v.cam_period);
    v.cpm_period = s.get<TimeMs>("cpm_period_ms", v.cpm_period);
    s.finish();
    checked(s.path(), s.line(), [&] { v.validate(); });
    return v;
}

void parse_latency(Section s, scenario::ScenarioConfig& cfg)
{
    auto& m = cfg.latency;
    m.base_mean = s.get<double>("base_mean", m.base_mean);
    m.base_std = s.get<double>("base_std", m.base_std);
    m.per_session_mean = s.get<double>("per_session_mean", m.per_session_mean);
    m.per_session_std = s.get<double>("per_session_std", m.per_session_std);
    m.drop_prob = s.get<double>("drop_prob", m.drop_prob);
    m.shift = s.get<double>("shift", m.shift);
    cfg.per_link_fifo = s.get<bool>("per_link_fifo", cfg.per_link_fifo);
    s.finish();
    checked(s.path(), s.line(), [&] { m.validate(); });
}

void parse_cpu(Section s, scenario::ScenarioConfig& cfg)
{
    auto& c = cfg.cpu;
    c.tpl_active = s.get<double>("TPLa", c.tpl_active);
    c.tpl_deactivated = s.get<double>("TPLd", c.tpl_deactivated);
    c.sofof_sr = s.get<double>("SOFOF_SR", c.sofof_sr);
    if (s.has("published_ratio")) {
        cfg.published_ratio = s.require<double>("published_ratio");
    }
    s.finish();
    checked(s.path(), s.line(), [&] { c.validate(); });
}

}  // namespace

scenario::ScenarioConfig parse_scenario(const std::string& text)
{
    YAML::Node doc;
    try {
        doc = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("", e.mark.line + 1, "malformed document: " + e.msg);
    }
    if (!doc.IsDefined() || doc.IsNull()) {
        throw ConfigError("", 1, "empty document");
    }
    Section top(doc, "", 1);
    scenario::ScenarioConfig cfg;
    cfg.seed = top.get<std::uint64_t>("seed", cfg.seed);
    cfg.duration = top.get<TimeMs>("duration", cfg.duration);
    cfg.tick = top.get<TimeMs>("tick", cfg.tick);
    cfg.lookahead_m = top.get<double>("lookahead_m", cfg.lookahead_m);
    cfg.route_resolution_m = top.get<double>("route_resolution_m", cfg.route_resolution_m);
    cfg.spawn_spacing_m = top.get<double>("spawn_spacing_m", cfg.spawn_spacing_m);
    cfg.wire_roundtrip = top.get<bool>("wire_roundtrip", cfg.wire_roundtrip);
    cfg.sweep_replications = top.get<std::size_t>("sweep_replications", cfg.sweep_replications);
    cfg.provider = parse_provider(top.child("provider"));

    std::map<std::string, geo::Route> routes;
    if (const auto node = top.raw("routes")) {
        Section rs(node, "routes", top.line());
        for (const auto& name : rs.raw_keys()) {
            const auto rn = rs.raw(name);
            auto pts = parse_points(rn, rs.key_path(name));
            routes.emplace(name, checked(rs.key_path(name), line_of(rn),
                                         [&] { return geo::Route(std::move(pts)); }));
        }
    }

    const auto vehicles = top.require_node("vehicles");
    if (!vehicles.IsSequence() || vehicles.size() == 0) {
        throw ConfigError("vehicles", line_of(vehicles), "expected a non-empty list");
    }
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
        cfg.vehicles.push_back(
            parse_vehicle(Section(vehicles[i], "vehicles[" + std::to_string(i) + "]", top.line()), routes));
    }
    if (top.has("latency")) {
        parse_latency(top.child("latency"), cfg);
    }
    if (top.has("cpu_table")) {
        parse_cpu(top.child("cpu_table"), cfg);
    }
    top.finish();
    checked("", 0, [&] { cfg.validate(); });
    return cfg;
}

namespace {

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw ConfigError("", 0, "cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

bool parse_double(std::string_view s, double& out)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return !s.empty() && res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

}  // namespace

scenario::ScenarioConfig load_scenario(const std::filesystem::path& path)
{
    return parse_scenario(read_file(path));
}

geo::Route parse_route_csv(const std::string& text)
{
    std::vector<geo::Point2> pts;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        const auto comma = line.find(',');
        double x = 0.0;
        double y = 0.0;
        const bool ok = comma != std::string::npos &&
                        line.find(',', comma + 1) == std::string::npos &&
                        parse_double(std::string_view(line).substr(0, comma), x) &&
                        parse_double(std::string_view(line).substr(comma + 1), y);
        if (!ok) {
            if (pts.empty() && lineno == 1 && line == "x,y") {
                continue;
            }
            throw ConfigError("route", lineno, "expected 'x,y', got '" + line + "'");
        }
        pts.push_back({x, y});
    }
    if (pts.empty()) {
        throw ConfigError("route", 0, "no waypoints");
    }
    return checked("route", 0, [&] { return geo::Route(std::move(pts)); });
}

geo::Route load_route_csv(const std::filesystem::path& path) { return parse_route_csv(read_file(path)); }

}  // namespace sofof::config
