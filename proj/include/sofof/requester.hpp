#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sofof/geo.hpp"
#include "sofof/messages.hpp"
#include "sofof/services.hpp"
#include "sofof/types.hpp"

/// Service-requester runtime: evaluates offers, requests services, hands
/// over from the local to the remote instance on first data and falls back
/// when the remote stream violates its QoS profile.
namespace sofof::requester {

struct QosProfile {
    TimeMs l_max{50};
    TimeMs dt_max{100};

    void validate() const;

    friend bool operator==(const QosProfile&, const QosProfile&) = default;
};

/// latency <= l_max and gap <= dt_max, both bounds inclusive.
bool qos_compliant(TimeMs latency, TimeMs gap, const QosProfile& qos) noexcept;

struct RequesterConfig {
    StationId station;
    double r_off{300.0};
    double d_min{50.0};
    /// One entry per offloadable service; each needs a matching local spec.
    std::map<ServiceId, QosProfile> qos;
    std::vector<svc::ServiceSpec> local_services;
    TimeMs request_timeout{2000};
    geo::Route planned_route{{geo::Point2{}}};
    std::string map_id;
    /// Constant offset added to the local clock when computing latencies.
    TimeMs clock_skew{0};
    geo::LodmOptions lodm;
    TimeMs planner_horizon{3000};
    TimeMs planner_step{100};

    void validate() const;
};

enum class Phase { Idle, Requested, Remote, Fallback };

std::string_view to_string(Phase phase) noexcept;

struct LatencySample {
    TimeMs rx_time{0};
    TimeMs latency_ms{0};
};

struct OffloadState {
    ServiceId service;
    Phase phase{Phase::Idle};
    std::optional<TimeMs> last_rx;
    std::vector<LatencySample> latency_log;
    TimeMs requested_at{0};
    std::optional<StationId> provider;
};

/// Interval during which a service ran remotely. `end` is unset while open.
struct Episode {
    ServiceId service;
    StationId provider;
    TimeMs start{0};
    std::optional<TimeMs> end;
    std::optional<msg::TerminationReason> reason;
};

enum class OutputSource { Local, Remote };

using TrajectorySink = std::function<void(TimeMs at, const ServiceId& service, OutputSource source,
                                          const std::vector<msg::TrajectoryPoint>& trajectory)>;

struct RequesterCounters {
    std::uint64_t requests_sent{0};
    std::uint64_t request_timeouts{0};
    std::uint64_t mcm_received{0};
    std::uint64_t mcm_discarded{0};
    std::uint64_t local_outputs{0};
    std::uint64_t fallbacks{0};
    std::map<msg::TerminationReason, std::uint64_t> violations;
};

class Requester {
public:
    /// Local services start active at `start`.
    explicit Requester(RequesterConfig config, TimeMs start = 0);

    void update_ego(const msg::VehicleState& ego);
    const msg::VehicleState& ego() const noexcept { return ego_; }
    void set_planned_route(geo::Route route);
    void set_trajectory_sink(TrajectorySink sink) { sink_ = std::move(sink); }

    std::vector<msg::Envelope> on_offer(TimeMs now, StationId offer_src, const msg::OfferBody& body,
                                        geo::Point2 current_pos);
    /// Uses the position of the latest ego state.
    std::vector<msg::Envelope> on_offer(TimeMs now, StationId offer_src, const msg::OfferBody& body);

    std::vector<msg::Envelope> on_mcm(TimeMs now, StationId src, const msg::McmBody& body);

    /// Request timeouts, the inter-arrival watchdog and the local planner.
    std::vector<msg::Envelope> tick(TimeMs now);

    std::vector<msg::Envelope> handle(TimeMs now, const msg::Envelope& env);

    /// Route from the current position onwards, as handed to the LODM and
    /// sent with requests.
    geo::Route remaining_route(geo::Point2 current_pos) const;

    /// Every service is either served locally or remotely within its
    /// inter-arrival bound.
    bool available(TimeMs now) const;

    const RequesterConfig& config() const noexcept { return config_; }
    const OffloadState& state(const ServiceId& service) const;
    const std::map<ServiceId, OffloadState>& states() const noexcept { return states_; }
    const std::vector<Episode>& episodes() const noexcept { return episodes_; }
    const RequesterCounters& counters() const noexcept { return counters_; }

    /// Time during which at least one service was Remote, up to `now`.
    TimeMs remote_time(TimeMs now) const noexcept;
    /// Largest gap between consecutive downstream outputs of one service,
    /// counted from construction.
    TimeMs output_gap_max() const noexcept { return gap_max_; }
    double local_cpu_usage(TimeMs now) const { return host_.cpu_usage(now); }

private:
    void expire_requests(TimeMs now);
    msg::Envelope fall_back(TimeMs now, OffloadState& st, msg::TerminationReason reason);
    void run_local(TimeMs now, const ServiceId& service);
    void emit(TimeMs at, const ServiceId& service, OutputSource source,
              const std::vector<msg::TrajectoryPoint>& trajectory);
    void set_remote(TimeMs now, bool entering);
    const svc::ServiceSpec& local_spec(const ServiceId& service) const;

    RequesterConfig config_;
    msg::VehicleState ego_;
    svc::ServiceHost host_;
    std::map<ServiceId, OffloadState> states_;
    std::vector<Episode> episodes_;
    std::map<ServiceId, std::size_t> open_episode_;
    std::map<ServiceId, TimeMs> last_output_;
    TimeMs gap_max_{0};
    std::size_t remote_count_{0};
    TimeMs remote_since_{0};
    TimeMs remote_accum_{0};
    TrajectorySink sink_;
    RequesterCounters counters_;
};

}  // namespace sofof::requester
