#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "sofof/netsim.hpp"

using namespace sofof;
using namespace sofof::net;

namespace {

msg::Envelope term(std::uint32_t src, std::uint32_t dst, TimeMs at)
{
    return msg::make_unicast(StationId{src}, StationId{dst}, at,
                             msg::TerminationBody{ServiceId("tpl"), msg::TerminationReason::Shutdown});
}

LatencyModel deterministic(double mean)
{
    LatencyModel m;
    m.base_mean = mean;
    m.base_std = 0;
    m.per_session_mean = 0;
    m.per_session_std = 0;
    return m;
}

}  // namespace

TEST_CASE("degenerate model delivers at now + base_mean")
{
    Network net(deterministic(10.0), 1);
    CHECK(net.submit(100, term(1, 2, 100), 1) == 110);
    CHECK(net.submit(100, term(1, 2, 100), 5) == 110);
    const auto out = net.step(110);
    REQUIRE(out.size() == 2);
    CHECK(out[0].deliver_at == 110);
    CHECK(out[0].receiver == StationId{2});
}

TEST_CASE("congestion terms grow with active sessions beyond the first")
{
    LatencyModel m;
    CHECK(m.mean_for(0) == m.base_mean);
    CHECK(m.mean_for(1) == m.base_mean);
    CHECK(m.mean_for(4) == doctest::Approx(10.54 + 3 * 2.0));
    CHECK(m.std_for(4) == doctest::Approx(9.83 + 3 * 3.0));
}

TEST_CASE("sampled moments match the calibration")
{
    LatencyModel m;
    std::mt19937_64 rng(12345);
    const int n = 100000;
    double sum = 0;
    double sq = 0;
    double lo = INFINITY;
    for (int i = 0; i < n; ++i) {
        const double x = sample_latency(m, 1, rng);
        sum += x;
        sq += x * x;
        lo = std::min(lo, x);
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    CHECK(std::abs(mean - 10.54) <= 0.3);
    CHECK(std::abs(sd - 9.83) <= 0.5);
    CHECK(lo >= kMinLatencyMs);
}

TEST_CASE("lognormal moment matching")
{
    const auto p = match_lognormal(10.54, 9.83);
    const double s2 = std::log(1 + (9.83 * 9.83) / (10.54 * 10.54));
    CHECK(p.sigma == doctest::Approx(std::sqrt(s2)).epsilon(1e-14));
    CHECK(p.mu == doctest::Approx(std::log(10.54) - s2 / 2).epsilon(1e-14));
    CHECK(std::exp(p.mu + p.sigma * p.sigma / 2) == doctest::Approx(10.54).epsilon(1e-12));
    CHECK_THROWS_AS(match_lognormal(0, 1), DomainError);
}

TEST_CASE("rounding is half-up")
{
    CHECK(round_latency(2.5) == 3);
    CHECK(round_latency(2.4999) == 2);
    CHECK(round_latency(0.1) == 0);
    CHECK(round_latency(10.54) == 11);
}

TEST_CASE("certain loss schedules nothing")
{
    LatencyModel m;
    m.drop_prob = 1.0;
    Network net(m, 3);
    for (int i = 0; i < 100; ++i) {
        CHECK_FALSE(net.submit(i, term(1, 2, i), 1).has_value());
    }
    CHECK(net.empty());
    CHECK(net.stats().dropped == 100);
}

TEST_CASE("step boundaries and tie order")
{
    Network empty(deterministic(5.0), 1);
    CHECK(empty.step(1000).empty());

    Network net(deterministic(5.0), 1);
    const auto a = term(1, 2, 0);
    const auto b = term(3, 2, 0);
    net.submit(0, a, 1);
    net.submit(0, b, 1);
    net.submit(1, term(1, 2, 1), 1);
    CHECK(net.step(4).empty());
    const auto out = net.step(5);
    REQUIRE(out.size() == 2);
    CHECK(out[0].env == a);
    CHECK(out[1].env == b);
    CHECK(net.next_delivery() == 6);
}

TEST_CASE("broadcast fans out to attached stations except the sender")
{
    Network net(deterministic(5.0), 1);
    for (std::uint32_t s : {1u, 2u, 3u}) net.attach(StationId{s});
    net.submit(0, msg::make_cam(0, msg::VehicleState{StationId{1}, 0, {0, 0}, 0, 0}), 1);
    const auto out = net.step(100);
    REQUIRE(out.size() == 2);
    CHECK(out[0].receiver == StationId{2});
    CHECK(out[1].receiver == StationId{3});
}

TEST_CASE("identical seeds and submissions give identical traces")
{
    auto trace = [](std::uint64_t seed) {
        Network net(LatencyModel{}, seed);
        std::vector<std::pair<TimeMs, std::string>> out;
        for (TimeMs t = 0; t < 2000; t += 10) {
            net.submit(t, term(1, 2, t), 2);
            net.submit(t, term(2, 1, t), 2);
            for (auto& d : net.step(t)) out.emplace_back(d.deliver_at, msg::encode(d.env));
        }
        for (auto& d : net.step(1 << 20)) out.emplace_back(d.deliver_at, msg::encode(d.env));
        return out;
    };
    CHECK(trace(9) == trace(9));
    CHECK(trace(9) != trace(10));
}

TEST_CASE("draws on one link do not depend on traffic elsewhere")
{
    Network quiet(LatencyModel{}, 5);
    Network busy(LatencyModel{}, 5);
    for (TimeMs t = 0; t < 500; t += 10) {
        busy.submit(t, term(3, 4, t), 1);
        CHECK(quiet.submit(t, term(1, 2, t), 1) == busy.submit(t, term(1, 2, t), 1));
    }
}

TEST_CASE("per-link FIFO keeps deliveries in send order")
{
    Network net(LatencyModel{}, 17, true);
    std::map<std::uint32_t, TimeMs> last_sent;
    bool crossed_without_fifo = false;
    Network plain(LatencyModel{}, 17, false);
    for (TimeMs t = 0; t < 5000; t += 1) {
        net.submit(t, term(1 + t % 3, 9, t), 4);
        plain.submit(t, term(1 + t % 3, 9, t), 4);
    }
    for (const auto& d : net.step(1 << 20)) {
        auto& prev = last_sent[d.env.src.value];
        CHECK(d.env.sent_at >= prev);
        prev = d.env.sent_at;
    }
    std::map<std::uint32_t, TimeMs> plain_last;
    for (const auto& d : plain.step(1 << 20)) {
        auto& prev = plain_last[d.env.src.value];
        crossed_without_fifo = crossed_without_fifo || d.env.sent_at < prev;
        prev = std::max(prev, d.env.sent_at);
    }
    CHECK(crossed_without_fifo);
}

TEST_CASE("fault hook overrides latency or drops")
{
    Network net(deterministic(5.0), 1);
    net.set_fault_hook([](TimeMs now, const msg::Envelope&, StationId) -> std::optional<FaultAction> {
        if (now == 10) return FaultAction{true, std::nullopt};
        if (now == 20) return FaultAction{false, 51.0};
        return std::nullopt;
    });
    CHECK_FALSE(net.submit(10, term(1, 2, 10), 1).has_value());
    CHECK(net.submit(20, term(1, 2, 20), 1) == 71);
    CHECK(net.submit(30, term(1, 2, 30), 1) == 35);
}

TEST_CASE("invalid models are rejected")
{
    LatencyModel m;
    m.base_mean = 0;
    CHECK_THROWS_AS(Network(m, 1), ValidationError);
    m = LatencyModel{};
    m.drop_prob = 1.5;
    CHECK_THROWS_AS(Network(m, 1), ValidationError);
    m = LatencyModel{};
    m.base_std = -1;
    CHECK_THROWS_AS(Network(m, 1), ValidationError);
}
