#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sofof/geo.hpp"
#include "sofof/messages.hpp"
#include "sofof/services.hpp"
#include "sofof/types.hpp"

/// Service-provider runtime: tracks CAVs through their CAMs, offers services,
/// gates requests through the centralized decision and runs the accepted
/// services per requester.
namespace sofof::provider {

struct ProviderConfig {
    StationId station;
    geo::Point2 connection_point;
    geo::Polygon offloading_area{{{0, 0}, {1, 0}, {0, 1}}};
    std::set<std::string> known_map_ids;
    std::vector<svc::ServiceSpec> services;
    double t_min{10.0};                  ///< seconds
    TimeMs cam_stale_after{2000};
    TimeMs offer_repeat_interval{1000};
    std::optional<std::size_t> max_active_sessions;
    TimeMs planner_horizon{3000};
    TimeMs planner_step{100};
    /// Keep every evaluated request for later replay.
    bool record_decisions{true};

    void validate() const;
};

enum class SessionState { Offered, Active, Terminated };

std::string_view to_string(SessionState state) noexcept;

struct SessionRecord {
    StationId requester;
    std::vector<ServiceId> services;
    SessionState state{SessionState::Offered};
    msg::VehicleState last_cam;
    TimeMs activated_at{0};
    std::optional<TimeMs> terminated_at;
    std::optional<msg::TerminationReason> terminated_reason;
};

/// One evaluated request, kept so decisions can be replayed.
struct DecisionRecord {
    TimeMs at{0};
    StationId requester;
    msg::RequestBody request;
    double speed_used{0.0};
    bool map_known{false};
    bool accepted{false};
};

struct ProviderCounters {
    std::uint64_t offers_sent{0};
    std::uint64_t requests_ignored{0};
    std::uint64_t requests_accepted{0};
    std::uint64_t requests_declined{0};
    std::uint64_t cpm_forwarded{0};
    std::uint64_t cpm_discarded{0};
    std::uint64_t mcm_sent{0};
    std::uint64_t cams_out_of_order{0};
};

struct RequestOutcome {
    bool accepted{false};
    std::vector<msg::Envelope> out;
};

class Provider {
public:
    explicit Provider(ProviderConfig config);

    std::vector<msg::Envelope> on_cam(TimeMs now, const msg::VehicleState& cam);

    /// `v_hint` is used when the request carries no speed.
    RequestOutcome on_request(TimeMs now, StationId src, const msg::RequestBody& body, double v_hint);
    /// Uses the speed of the latest CAM of `src` as hint.
    RequestOutcome on_request(TimeMs now, StationId src, const msg::RequestBody& body);

    void on_cpm(TimeMs now, StationId src, const msg::CpmBody& body);
    void on_termination(TimeMs now, StationId src, const msg::TerminationBody& body);

    /// CAM checks (staleness, area exit) and periodic service outputs.
    std::vector<msg::Envelope> tick(TimeMs now);

    /// Dispatches any envelope addressed to this provider.
    std::vector<msg::Envelope> handle(TimeMs now, const msg::Envelope& env);

    const ProviderConfig& config() const noexcept { return config_; }
    std::size_t active_session_count() const noexcept;
    /// Current (possibly terminated) record of `requester`, if any.
    const SessionRecord* session(StationId requester) const;
    /// Every record ever created, terminated ones included, in creation order.
    std::vector<SessionRecord> history() const;
    const std::vector<DecisionRecord>& decisions() const noexcept { return decisions_; }
    const ProviderCounters& counters() const noexcept { return counters_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }
    /// Environment model most recently forwarded to the session of `requester`.
    const std::vector<msg::Track>* environment(StationId requester) const;

private:
    struct Session {
        SessionRecord record;
        svc::ServiceHost host;
        std::vector<msg::Track> env;
        geo::Route route{{geo::Point2{}}};
        std::size_t history_index{0};
    };

    Session& open_session(StationId requester, const msg::VehicleState& cam);
    void terminate(Session& s, TimeMs now, std::optional<msg::TerminationReason> reason);
    void sync_history(const Session& s);
    msg::Envelope make_offer(TimeMs now, StationId dst) const;

    ProviderConfig config_;
    std::map<StationId, msg::VehicleState> last_cam_;
    std::map<StationId, TimeMs> last_offer_;
    std::map<StationId, Session> sessions_;
    std::vector<SessionRecord> history_;
    std::vector<DecisionRecord> decisions_;
    std::vector<std::string> warnings_;
    ProviderCounters counters_;
};

}  // namespace sofof::provider
