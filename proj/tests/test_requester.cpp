#include <random>

#include "doctest.h"
#include "sofof/requester.hpp"
#include "support.hpp"

using namespace sofof;
using namespace sofof::requester;
using sofof::testing::line_route;

namespace {

const ServiceId kTpl("tpl");
const StationId kSp{100};

RequesterConfig base_config(TimeMs local_period = 100)
{
    RequesterConfig c;
    c.station = StationId{1};
    c.r_off = 300;
    c.d_min = 50;
    c.qos = {{kTpl, QosProfile{50, 100}}};
    c.local_services = {svc::ServiceSpec{kTpl, local_period, 19.5, 8.5}};
    c.request_timeout = 2000;
    c.planned_route = line_route(0, 100, 10);
    c.map_id = "ulm";
    return c;
}

msg::OfferBody offer(geo::Point2 sp = {50, 0}) { return msg::OfferBody{sp, {kTpl}, {"ulm"}}; }

msg::McmBody mcm(TimeMs created) { return msg::McmBody{kTpl, created, {{created + 100, {1, 0}, 10}}}; }

struct Recorder {
    std::vector<std::pair<TimeMs, OutputSource>> outputs;
    TrajectorySink sink()
    {
        return [this](TimeMs at, const ServiceId&, OutputSource src, const auto&) { outputs.emplace_back(at, src); };
    }
    std::size_t count(OutputSource s) const
    {
        std::size_t n = 0;
        for (const auto& o : outputs) n += o.second == s;
        return n;
    }
};

/// Requester that has requested at t = 0 and received first data at t = 20.
Requester remote_requester(Recorder* rec = nullptr)
{
    Requester r(base_config());
    if (rec) r.set_trajectory_sink(rec->sink());
    r.update_ego(msg::VehicleState{StationId{1}, 0, {0, 0}, 10, 0});
    REQUIRE(r.on_offer(0, kSp, offer(), {0, 0}).size() == 1);
    REQUIRE(r.on_mcm(20, kSp, mcm(8)).empty());
    REQUIRE(r.state(kTpl).phase == Phase::Remote);
    return r;
}

std::size_t terminations(const std::vector<msg::Envelope>& out)
{
    std::size_t n = 0;
    for (const auto& e : out) n += e.kind() == msg::MessageKind::Termination;
    return n;
}

}  // namespace

TEST_CASE("qos_compliant examples")
{
    const QosProfile q{50, 100};
    CHECK(qos_compliant(49, 99, q));
    CHECK(qos_compliant(50, 100, q));
    CHECK_FALSE(qos_compliant(51, 10, q));
    CHECK_FALSE(qos_compliant(10, 101, q));
}

TEST_CASE("offer evaluation")
{
    Requester r(base_config());
    r.update_ego(msg::VehicleState{StationId{1}, 0, {0, 0}, 10, 0});
    const auto out = r.on_offer(0, kSp, offer(), {0, 0});
    REQUIRE(out.size() == 1);
    CHECK(out[0].kind() == msg::MessageKind::Request);
    CHECK(out[0].dst == kSp);
    const auto& req = std::get<msg::RequestBody>(out[0].payload);
    CHECK(req.services == std::vector<ServiceId>{kTpl});
    CHECK(req.map_id == "ulm");
    CHECK(req.current_speed == 10);
    CHECK(req.planned_route.front() == geo::Point2{0, 0});
    CHECK(req.planned_route.back() == geo::Point2{100, 0});
    CHECK(r.state(kTpl).phase == Phase::Requested);
    CHECK(r.state(kTpl).requested_at == 0);

    Requester far(base_config());
    CHECK(far.on_offer(0, kSp, offer({1000, 0}), {0, 0}).empty());
    CHECK(far.state(kTpl).phase == Phase::Idle);

    Requester other(base_config());
    CHECK(other.on_offer(0, kSp, msg::OfferBody{{50, 0}, {ServiceId("radar")}, {}}, {0, 0}).empty());
}

TEST_CASE("remaining route starts at the current position")
{
    Requester r(base_config());
    const auto rest = r.remaining_route({35, 2});
    CHECK(rest.front() == geo::Point2{35, 2});
    CHECK(rest[1] == geo::Point2{40, 0});
    CHECK(rest.back() == geo::Point2{100, 0});
}

TEST_CASE("first MCM hands over to the remote service")
{
    Recorder rec;
    auto r = remote_requester(&rec);
    CHECK(r.state(kTpl).last_rx == 20);
    REQUIRE(r.state(kTpl).latency_log.size() == 1);
    CHECK(r.state(kTpl).latency_log[0].latency_ms == 12);
    CHECK(r.episodes().size() == 1);
    CHECK(r.available(20));
    CHECK(rec.count(OutputSource::Remote) == 1);
    r.tick(90);
    CHECK(rec.count(OutputSource::Local) == 0);
    CHECK(r.on_offer(100, kSp, offer(), {0, 0}).empty());
}

TEST_CASE("latency violation")
{
    auto r = remote_requester();
    const auto out = r.on_mcm(100, kSp, mcm(40));
    REQUIRE(out.size() == 1);
    const auto& t = std::get<msg::TerminationBody>(out[0].payload);
    CHECK(t.reason == msg::TerminationReason::QosLatency);
    CHECK(out[0].dst == kSp);
    CHECK(r.state(kTpl).phase == Phase::Fallback);
    CHECK(r.episodes().front().end == 100);
    CHECK(r.counters().violations.at(msg::TerminationReason::QosLatency) == 1);
}

TEST_CASE("inter-arrival violation on arrival")
{
    auto r = remote_requester();
    const auto out = r.on_mcm(170, kSp, mcm(160));
    REQUIRE(out.size() == 1);
    CHECK(std::get<msg::TerminationBody>(out[0].payload).reason == msg::TerminationReason::QosInterArrival);
    CHECK(r.state(kTpl).phase == Phase::Fallback);
}

TEST_CASE("first MCM already too late opens and closes an episode")
{
    Requester r(base_config());
    r.on_offer(0, kSp, offer(), {0, 0});
    const auto out = r.on_mcm(100, kSp, mcm(20));
    CHECK(terminations(out) == 1);
    REQUIRE(r.episodes().size() == 1);
    CHECK(r.episodes()[0].start == 100);
    CHECK(r.episodes()[0].end == 100);
}

TEST_CASE("MCMs in Idle or Fallback, or from another provider, are discarded")
{
    Requester idle(base_config());
    CHECK(idle.on_mcm(10, kSp, mcm(5)).empty());
    CHECK(idle.state(kTpl).phase == Phase::Idle);

    auto r = remote_requester();
    CHECK(r.on_mcm(30, StationId{200}, mcm(25)).empty());
    CHECK(r.counters().mcm_discarded == 1);
    r.on_mcm(200, kSp, mcm(100));
    REQUIRE(r.state(kTpl).phase == Phase::Fallback);
    CHECK(r.on_mcm(210, kSp, mcm(205)).empty());
    CHECK(r.state(kTpl).phase == Phase::Fallback);
    CHECK(r.counters().mcm_discarded == 2);
}

TEST_CASE("request timeout reverts to Idle")
{
    Requester r(base_config());
    r.on_offer(0, kSp, offer(), {0, 0});
    r.tick(2000);
    CHECK(r.state(kTpl).phase == Phase::Requested);
    r.tick(2001);
    CHECK(r.state(kTpl).phase == Phase::Idle);
    CHECK(r.counters().request_timeouts == 1);
    r.on_offer(2100, kSp, offer(), {0, 0});
    r.tick(4000);
    CHECK(r.state(kTpl).phase == Phase::Requested);
}

TEST_CASE("watchdog falls back exactly once")
{
    Recorder rec;
    auto r = remote_requester(&rec);
    CHECK(r.tick(120).empty());
    const auto out = r.tick(121);
    CHECK(terminations(out) == 1);
    CHECK(r.state(kTpl).phase == Phase::Fallback);
    CHECK_FALSE(r.state(kTpl).last_rx.has_value());
    std::size_t more = 0;
    for (TimeMs t = 130; t < 3000; t += 10) more += terminations(r.tick(t));
    CHECK(more == 0);
    CHECK(r.counters().fallbacks == 1);
    // The local planner resumes at once.
    CHECK(rec.outputs.back().second == OutputSource::Local);
    CHECK(rec.count(OutputSource::Local) > 0);
    CHECK(rec.outputs[1] == std::make_pair(TimeMs{121}, OutputSource::Local));
}

TEST_CASE("no request after fallback until a fresh offer")
{
    auto r = remote_requester();
    r.tick(200);
    REQUIRE(r.state(kTpl).phase == Phase::Fallback);
    for (TimeMs t = 210; t < 1000; t += 10) {
        for (const auto& e : r.tick(t)) CHECK(e.kind() != msg::MessageKind::Request);
    }
    const auto out = r.on_offer(1000, kSp, offer(), {0, 0});
    REQUIRE(out.size() == 1);
    CHECK(out[0].kind() == msg::MessageKind::Request);
}

TEST_CASE("local planner runs at its period")
{
    Recorder rec;
    Requester r(base_config(100), 0);
    r.set_trajectory_sink(rec.sink());
    for (TimeMs t = 0; t <= 1000; t += 10) r.tick(t);
    CHECK(rec.count(OutputSource::Local) == 10);
    CHECK(r.counters().local_outputs == 10);
}

TEST_CASE("latency log only holds compliant samples and gaps stay bounded")
{
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<TimeMs> latency(0, 60);
    std::uniform_int_distribution<TimeMs> gap(10, 130);
    for (int trial = 0; trial < 50; ++trial) {
        Recorder rec;
        Requester r(base_config(50));
        r.set_trajectory_sink(rec.sink());
        TimeMs next_mcm = 0;
        TimeMs next_offer = 0;
        std::size_t fallbacks = 0;
        std::size_t terms = 0;
        for (TimeMs t = 0; t <= 20000; t += 10) {
            if (t >= next_offer) {
                r.on_offer(t, kSp, offer(), {0, 0});
                next_offer += 1000;
            }
            if (t >= next_mcm) {
                terms += terminations(r.on_mcm(t, kSp, mcm(t - latency(rng))));
                next_mcm = t + gap(rng);
            }
            terms += terminations(r.tick(t));
            CHECK(r.available(t));
            fallbacks = r.counters().fallbacks;
        }
        CHECK(terms == fallbacks);
        for (const auto& s : r.state(kTpl).latency_log) CHECK(s.latency_ms <= 50);
        CHECK(r.output_gap_max() <= 100 + 50);
    }
}

TEST_CASE("clock skew shifts measured latency")
{
    auto c = base_config();
    c.clock_skew = 5;
    Requester r(c);
    r.on_offer(0, kSp, offer(), {0, 0});
    r.on_mcm(20, kSp, mcm(8));
    CHECK(r.state(kTpl).latency_log[0].latency_ms == 17);
}

TEST_CASE("config validation")
{
    auto c = base_config();
    c.r_off = 0;
    CHECK_THROWS_AS(Requester{c}, ValidationError);
    c = base_config();
    c.request_timeout = 0;
    CHECK_THROWS_AS(Requester{c}, ValidationError);
    c = base_config();
    c.local_services.clear();
    CHECK_THROWS_AS(Requester{c}, ValidationError);
    c = base_config();
    c.qos[kTpl] = QosProfile{0, 100};
    CHECK_THROWS_AS(Requester{c}, ValidationError);
}
