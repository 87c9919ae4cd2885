#include "sofof/messages.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "json.hpp"

namespace sofof::msg {
namespace {

using Json = nlohmann::ordered_json;

constexpr std::string_view kBroadcast = "broadcast";

bool valid_heading(double h) noexcept { return h >= 0.0 && h < 2.0 * std::numbers::pi; }

bool finite(geo::Point2 p) noexcept { return std::isfinite(p.x) && std::isfinite(p.y); }

// ---- invariant checks shared by encode and decode -------------------------

// Field path and message are only built when the condition fails.
#define CHECK_FIELD(ok, field, what)          \
    do {                                      \
        if (!(ok)) {                          \
            throw SchemaError((field), (what)); \
        }                                     \
    } while (false)

void check_services(const std::vector<ServiceId>& services, const std::string& field)
{
    CHECK_FIELD(!services.empty(), field, "must not be empty");
    for (const auto& s : services) {
        CHECK_FIELD(ServiceId::is_valid(s.str()), field, "invalid service id '" + s.str() + "'");
    }
}

void check_body(const VehicleState& cam, const std::string& p)
{
    CHECK_FIELD(finite(cam.position), p + ".position", "must be finite");
    CHECK_FIELD(std::isfinite(cam.speed) && cam.speed >= 0.0, p + ".speed", "must be finite and >= 0");
    CHECK_FIELD(valid_heading(cam.heading), p + ".heading", "must lie in [0, 2*pi)");
}

void check_body(const OfferBody& offer, const std::string& p)
{
    CHECK_FIELD(finite(offer.provider_position), p + ".provider_position", "must be finite");
    check_services(offer.services, p + ".services");
}

void check_body(const RequestBody& req, const std::string& p)
{
    check_services(req.services, p + ".services");
    for (const auto& w : req.planned_route.waypoints()) {
        CHECK_FIELD(finite(w), p + ".planned_route", "waypoints must be finite");
    }
    CHECK_FIELD(std::isfinite(req.current_speed) && req.current_speed >= 0.0, p + ".current_speed",
          "must be finite and >= 0");
}

void check_body(const CpmBody& cpm, const std::string& p)
{
    std::set<std::uint32_t> ids;
    for (const auto& t : cpm.tracks) {
        CHECK_FIELD(ids.insert(t.object_id).second, p + ".tracks",
              "duplicate object_id " + std::to_string(t.object_id));
        CHECK_FIELD(finite(t.position), p + ".tracks.position", "must be finite");
        CHECK_FIELD(std::isfinite(t.speed) && t.speed >= 0.0, p + ".tracks.speed",
              "must be finite and >= 0");
        CHECK_FIELD(valid_heading(t.heading), p + ".tracks.heading", "must lie in [0, 2*pi)");
    }
}

void check_body(const McmBody& mcm, const std::string& p)
{
    CHECK_FIELD(ServiceId::is_valid(mcm.service.str()), p + ".service", "invalid service id");
    CHECK_FIELD(!mcm.trajectory.empty(), p + ".trajectory", "must not be empty");
    for (std::size_t i = 0; i < mcm.trajectory.size(); ++i) {
        const auto& pt = mcm.trajectory[i];
        CHECK_FIELD(finite(pt.position), p + ".trajectory.position", "must be finite");
        CHECK_FIELD(std::isfinite(pt.speed) && pt.speed >= 0.0, p + ".trajectory.speed",
              "must be finite and >= 0");
        if (i > 0) {
            CHECK_FIELD(pt.t > mcm.trajectory[i - 1].t, p + ".trajectory.t",
                  "timestamps must be strictly increasing");
        }
    }
}

void check_body(const TerminationBody& term, const std::string& p)
{
    CHECK_FIELD(ServiceId::is_valid(term.service.str()), p + ".service", "invalid service id");
}

// ---- JSON writers ----------------------------------------------------------

Json write(geo::Point2 p) { return Json{{"x", p.x}, {"y", p.y}}; }

Json write(const std::vector<ServiceId>& services)
{
    Json out = Json::array();
    for (const auto& s : services) {
        out.push_back(s.str());
    }
    return out;
}

Json write_body(const VehicleState& cam)
{
    return Json{{"station", cam.station.value},
                {"timestamp", cam.timestamp},
                {"position", write(cam.position)},
                {"speed", cam.speed},
                {"heading", cam.heading}};
}

Json write_body(const OfferBody& offer)
{
    return Json{{"provider_position", write(offer.provider_position)},
                {"services", write(offer.services)},
                {"map_ids", offer.map_ids}};
}

Json write_body(const RequestBody& req)
{
    Json route = Json::array();
    for (const auto& w : req.planned_route.waypoints()) {
        route.push_back(write(w));
    }
    return Json{{"services", write(req.services)},
                {"planned_route", std::move(route)},
                {"map_id", req.map_id},
                {"current_speed", req.current_speed}};
}

Json write_body(const CpmBody& cpm)
{
    Json tracks = Json::array();
    for (const auto& t : cpm.tracks) {
        tracks.push_back(Json{{"object_id", t.object_id},
                              {"position", write(t.position)},
                              {"speed", t.speed},
                              {"heading", t.heading}});
    }
    return Json{{"tracks", std::move(tracks)}};
}

Json write_body(const McmBody& mcm)
{
    Json traj = Json::array();
    for (const auto& pt : mcm.trajectory) {
        traj.push_back(Json{{"t", pt.t}, {"position", write(pt.position)}, {"speed", pt.speed}});
    }
    return Json{{"service", mcm.service.str()},
                {"creation_time", mcm.creation_time},
                {"trajectory", std::move(traj)}};
}

Json write_body(const TerminationBody& term)
{
    return Json{{"service", term.service.str()}, {"reason", std::string(to_string(term.reason))}};
}

// ---- JSON readers ----------------------------------------------------------

/// View on one JSON object that tracks its dotted path and rejects unknown keys.
class ObjectReader {
public:
    ObjectReader(const Json& j, std::string path, std::initializer_list<std::string_view> keys)
        : j_(j), path_(std::move(path))
    {
        CHECK_FIELD(j_.is_object(), path_.empty() ? "<root>" : path_, "expected an object");
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            bool known = false;
            for (auto k : keys) {
                known = known || it.key() == k;
            }
            CHECK_FIELD(known, field(it.key()), "unknown key");
        }
        for (auto k : keys) {
            CHECK_FIELD(j_.contains(k), field(std::string(k)), "missing key");
        }
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const Json& at(const std::string& key) const { return j_.at(key); }

    std::int64_t integer(const std::string& key) const
    {
        const Json& v = j_.at(key);
        CHECK_FIELD(v.is_number_integer(), field(key), "expected an integer");
        if (v.is_number_unsigned()) {
            CHECK_FIELD(v.get<std::uint64_t>() <= static_cast<std::uint64_t>(INT64_MAX), field(key),
                  "integer out of range");
        }
        return v.get<std::int64_t>();
    }

    std::uint32_t u32(const std::string& key) const
    {
        const std::int64_t v = integer(key);
        CHECK_FIELD(v >= 0 && v <= static_cast<std::int64_t>(UINT32_MAX), field(key),
              "expected an unsigned 32-bit integer");
        return static_cast<std::uint32_t>(v);
    }

    double number(const std::string& key) const
    {
        const Json& v = j_.at(key);
        CHECK_FIELD(v.is_number(), field(key), "expected a number");
        return v.get<double>();
    }

    std::string string(const std::string& key) const
    {
        const Json& v = j_.at(key);
        CHECK_FIELD(v.is_string(), field(key), "expected a string");
        return v.get<std::string>();
    }

    const Json& array(const std::string& key) const
    {
        const Json& v = j_.at(key);
        CHECK_FIELD(v.is_array(), field(key), "expected an array");
        return v;
    }

private:
    const Json& j_;
    std::string path_;
};

geo::Point2 read_point(const Json& j, const std::string& path)
{
    ObjectReader r(j, path, {"x", "y"});
    return geo::Point2{r.number("x"), r.number("y")};
}

std::vector<ServiceId> read_services(const ObjectReader& r, const std::string& key)
{
    std::vector<ServiceId> out;
    for (const auto& item : r.array(key)) {
        CHECK_FIELD(item.is_string(), r.field(key), "expected strings");
        const auto name = item.get<std::string>();
        CHECK_FIELD(ServiceId::is_valid(name), r.field(key), "invalid service id '" + name + "'");
        out.emplace_back(name);
    }
    return out;
}

ServiceId read_service(const ObjectReader& r, const std::string& key)
{
    const auto name = r.string(key);
    CHECK_FIELD(ServiceId::is_valid(name), r.field(key), "invalid service id '" + name + "'");
    return ServiceId(name);
}

VehicleState read_cam(const Json& j, const std::string& p)
{
    ObjectReader r(j, p, {"station", "timestamp", "position", "speed", "heading"});
    return VehicleState{StationId{r.u32("station")}, r.integer("timestamp"),
                        read_point(r.at("position"), r.field("position")), r.number("speed"),
                        r.number("heading")};
}

OfferBody read_offer(const Json& j, const std::string& p)
{
    ObjectReader r(j, p, {"provider_position", "services", "map_ids"});
    OfferBody body;
    body.provider_position = read_point(r.at("provider_position"), r.field("provider_position"));
    body.services = read_services(r, "services");
    for (const auto& item : r.array("map_ids")) {
        CHECK_FIELD(item.is_string(), r.field("map_ids"), "expected strings");
        body.map_ids.push_back(item.get<std::string>());
    }
    return body;
}

RequestBody read_request(const Json& j, const std::string& p)
{
    ObjectReader r(j, p, {"services", "planned_route", "map_id", "current_speed"});
    RequestBody body;
    body.services = read_services(r, "services");
    std::vector<geo::Point2> waypoints;
    for (const auto& item : r.array("planned_route")) {
        waypoints.push_back(read_point(item, r.field("planned_route")));
    }
    CHECK_FIELD(!waypoints.empty(), r.field("planned_route"), "must not be empty");
    body.planned_route = geo::Route(std::move(waypoints));
    body.map_id = r.string("map_id");
    body.current_speed = r.number("current_speed");
    return body;
}

CpmBody read_cpm(const Json& j, const std::string& p)
{
    ObjectReader r(j, p, {"tracks"});
    CpmBody body;
    for (const auto& item : r.array("tracks")) {
        ObjectReader t(item, r.field("tracks"), {"object_id", "position", "speed", "heading"});
        body.tracks.push_back(Track{t.u32("object_id"),
                                    read_point(t.at("position"), t.field("position")),
                                    t.number("speed"), t.number("heading")});
    }
    return body;
}

McmBody read_mcm(const Json& j, const std::string& p)
{
    ObjectReader r(j, p, {"service", "creation_time", "trajectory"});
    McmBody body;
    body.service = read_service(r, "service");
    body.creation_time = r.integer("creation_time");
    for (const auto& item : r.array("trajectory")) {
        ObjectReader t(item, r.field("trajectory"), {"t", "position", "speed"});
        body.trajectory.push_back(TrajectoryPoint{
            t.integer("t"), read_point(t.at("position"), t.field("position")), t.number("speed")});
    }
    return body;
}

TerminationBody read_termination(const Json& j, const std::string& p)
{
    ObjectReader r(j, p, {"service", "reason"});
    TerminationBody body;
    body.service = read_service(r, "service");
    const auto reason = termination_reason_from(r.string("reason"));
    CHECK_FIELD(reason.has_value(), r.field("reason"), "unknown termination reason");
    body.reason = *reason;
    return body;
}

std::optional<MessageKind> kind_from(std::string_view name) noexcept
{
    for (auto k : {MessageKind::Cam, MessageKind::Offer, MessageKind::Request, MessageKind::Cpm,
                   MessageKind::Mcm, MessageKind::Termination}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(TerminationReason reason) noexcept
{
    switch (reason) {
        case TerminationReason::QosLatency: return "QosLatency";
        case TerminationReason::QosInterArrival: return "QosInterArrival";
        case TerminationReason::LeftArea: return "LeftArea";
        case TerminationReason::CamStale: return "CamStale";
        case TerminationReason::Shutdown: return "Shutdown";
    }
    return "Shutdown";
}

std::optional<TerminationReason> termination_reason_from(std::string_view name) noexcept
{
    for (auto r : {TerminationReason::QosLatency, TerminationReason::QosInterArrival,
                   TerminationReason::LeftArea, TerminationReason::CamStale,
                   TerminationReason::Shutdown}) {
        if (to_string(r) == name) {
            return r;
        }
    }
    return std::nullopt;
}

std::string_view to_string(MessageKind kind) noexcept
{
    switch (kind) {
        case MessageKind::Cam: return "Cam";
        case MessageKind::Offer: return "Offer";
        case MessageKind::Request: return "Request";
        case MessageKind::Cpm: return "Cpm";
        case MessageKind::Mcm: return "Mcm";
        case MessageKind::Termination: return "Termination";
    }
    return "Cam";
}

Envelope make_cam(TimeMs sent_at, const VehicleState& state)
{
    return Envelope{state.station, std::nullopt, sent_at, state};
}

Envelope make_unicast(StationId src, StationId dst, TimeMs sent_at, Payload payload)
{
    return Envelope{src, dst, sent_at, std::move(payload)};
}

void validate(const Envelope& env)
{
    const bool cam = env.kind() == MessageKind::Cam;
    CHECK_FIELD(cam == env.is_broadcast(), "dst",
          cam ? "Cam must be broadcast" : "only Cam may be broadcast");
    if (cam) {
        CHECK_FIELD(std::get<VehicleState>(env.payload).station == env.src, "payload.station",
              "must equal src");
    }
    std::visit([](const auto& body) { check_body(body, "payload"); }, env.payload);
}

std::string encode(const Envelope& env)
{
    validate(env);
    Json j;
    j["kind"] = std::string(to_string(env.kind()));
    j["src"] = env.src.value;
    if (env.dst) {
        j["dst"] = env.dst->value;
    } else {
        j["dst"] = std::string(kBroadcast);
    }
    j["sent_at"] = env.sent_at;
    j["payload"] = std::visit([](const auto& body) { return write_body(body); }, env.payload);
    std::string out = j.dump();
    out.push_back('\n');
    return out;
}

Envelope decode(std::string_view bytes)
{
    std::string_view body = bytes;
    if (!body.empty() && body.back() == '\n') {
        body.remove_suffix(1);
    }
    if (const auto nl = body.find('\n'); nl != std::string_view::npos) {
        throw ParseError("embedded newline breaks line framing", nl);
    }

    Json j;
    try {
        j = Json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what(), e.byte > 0 ? e.byte - 1 : 0);
    }

    ObjectReader r(j, "", {"kind", "src", "dst", "sent_at", "payload"});
    const auto kind = kind_from(r.string("kind"));
    CHECK_FIELD(kind.has_value(), "kind", "unknown message kind");

    Envelope env;
    env.src = StationId{r.u32("src")};
    const Json& dst = r.at("dst");
    if (dst.is_string()) {
        CHECK_FIELD(dst.get<std::string>() == kBroadcast, "dst", "expected a station id or \"broadcast\"");
    } else {
        env.dst = StationId{r.u32("dst")};
    }
    env.sent_at = r.integer("sent_at");

    const Json& p = r.at("payload");
    switch (*kind) {
        case MessageKind::Cam: env.payload = read_cam(p, "payload"); break;
        case MessageKind::Offer: env.payload = read_offer(p, "payload"); break;
        case MessageKind::Request: env.payload = read_request(p, "payload"); break;
        case MessageKind::Cpm: env.payload = read_cpm(p, "payload"); break;
        case MessageKind::Mcm: env.payload = read_mcm(p, "payload"); break;
        case MessageKind::Termination: env.payload = read_termination(p, "payload"); break;
    }
    validate(env);
    return env;
}

}  // namespace sofof::msg
