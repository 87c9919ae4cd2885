#include "sofof/provider.hpp"

#include <algorithm>

namespace sofof::provider {

void ProviderConfig::validate() const
{
    if (!(t_min > 0.0)) {
        throw ValidationError("provider.t_min must be > 0");
    }
    if (cam_stale_after <= 0) {
        throw ValidationError("provider.cam_stale_after must be > 0");
    }
    if (offer_repeat_interval < 0) {
        throw ValidationError("provider.offer_repeat_interval must be >= 0");
    }
    if (services.empty()) {
        throw ValidationError("provider.services must not be empty");
    }
    for (const auto& s : services) {
        s.validate();
    }
    if (planner_step <= 0 || planner_horizon < planner_step) {
        throw ValidationError("provider planner needs step > 0 and horizon >= step");
    }
}

std::string_view to_string(SessionState state) noexcept
{
    switch (state) {
        case SessionState::Offered: return "Offered";
        case SessionState::Active: return "Active";
        case SessionState::Terminated: return "Terminated";
    }
    return "Offered";
}

Provider::Provider(ProviderConfig config) : config_(std::move(config)) { config_.validate(); }

std::vector<msg::Envelope> Provider::on_cam(TimeMs now, const msg::VehicleState& cam)
{
    if (auto it = last_cam_.find(cam.station);
        it != last_cam_.end() && cam.timestamp < it->second.timestamp) {
        ++counters_.cams_out_of_order;
        return {};
    }
    last_cam_[cam.station] = cam;

    auto sit = sessions_.find(cam.station);
    if (sit != sessions_.end() && sit->second.record.state == SessionState::Active) {
        sit->second.record.last_cam = cam;
        return {};
    }

    const auto offered = last_offer_.find(cam.station);
    const bool due = offered == last_offer_.end() ||
                     now - offered->second >= config_.offer_repeat_interval;
    if (!due) {
        if (sit != sessions_.end()) {
            sit->second.record.last_cam = cam;
        }
        return {};
    }
    open_session(cam.station, cam).record.last_cam = cam;
    last_offer_[cam.station] = now;
    ++counters_.offers_sent;
    return {make_offer(now, cam.station)};
}

RequestOutcome Provider::on_request(TimeMs now, StationId src, const msg::RequestBody& body)
{
    const auto it = last_cam_.find(src);
    return on_request(now, src, body, it == last_cam_.end() ? 0.0 : it->second.speed);
}

RequestOutcome Provider::on_request(TimeMs now, StationId src, const msg::RequestBody& body,
                                    double v_hint)
{
    const auto cam = last_cam_.find(src);
    if (cam == last_cam_.end()) {
        warnings_.push_back("request from station " + std::to_string(src.value) +
                            " without prior CAM ignored");
        ++counters_.requests_ignored;
        return {};
    }

    std::vector<ServiceId> wanted;
    for (const auto& id : body.services) {
        const bool offered = std::any_of(config_.services.begin(), config_.services.end(),
                                         [&](const auto& spec) { return spec.id == id; });
        if (offered && std::find(wanted.begin(), wanted.end(), id) == wanted.end()) {
            wanted.push_back(id);
        }
    }

    auto sit = sessions_.find(src);
    const bool already_active = sit != sessions_.end() && sit->second.record.state == SessionState::Active;
    const double speed = body.current_speed > 0.0 ? body.current_speed : v_hint;
    const bool map_known = config_.known_map_ids.contains(body.map_id);

    bool accepted = false;
    if (config_.max_active_sessions && !already_active &&
        active_session_count() >= *config_.max_active_sessions) {
        accepted = false;
    } else if (wanted.empty()) {
        accepted = false;
    } else if (!(speed > 0.0)) {
        warnings_.push_back("request from station " + std::to_string(src.value) +
                            " declined: no usable speed for the travel-time estimate");
        accepted = false;
    } else {
        accepted = geo::codm_accept(body.planned_route, config_.offloading_area, map_known, speed,
                                    config_.t_min);
    }
    if (config_.record_decisions) {
        decisions_.push_back(DecisionRecord{now, src, body, speed, map_known, accepted});
    }

    if (!accepted) {
        ++counters_.requests_declined;
        if (sit != sessions_.end() && sit->second.record.state == SessionState::Offered) {
            terminate(sit->second, now, std::nullopt);
        }
        return {};
    }

    ++counters_.requests_accepted;
    Session& s = open_session(src, cam->second);
    if (s.record.state != SessionState::Active) {
        s.record.state = SessionState::Active;
        s.record.activated_at = now;
        s.record.last_cam = cam->second;
    }
    s.route = body.planned_route;
    for (const auto& id : wanted) {
        if (std::find(s.record.services.begin(), s.record.services.end(), id) ==
            s.record.services.end()) {
            s.record.services.push_back(id);
        }
        const auto spec = std::find_if(config_.services.begin(), config_.services.end(),
                                       [&](const auto& sp) { return sp.id == id; });
        s.host.activate(*spec, now);
    }
    sync_history(s);
    // Services are timer driven with their first output one period after
    // activation, so nothing is emitted here.
    return RequestOutcome{true, {}};
}

void Provider::on_cpm(TimeMs, StationId src, const msg::CpmBody& body)
{
    auto it = sessions_.find(src);
    if (it == sessions_.end() || it->second.record.state != SessionState::Active) {
        ++counters_.cpm_discarded;
        return;
    }
    it->second.env = body.tracks;
    ++counters_.cpm_forwarded;
}

void Provider::on_termination(TimeMs now, StationId src, const msg::TerminationBody& body)
{
    auto it = sessions_.find(src);
    if (it == sessions_.end() || it->second.record.state != SessionState::Active) {
        return;
    }
    Session& s = it->second;
    auto& services = s.record.services;
    const auto pos = std::find(services.begin(), services.end(), body.service);
    if (pos == services.end()) {
        return;
    }
    if (const auto handle = s.host.find(body.service)) {
        s.host.deactivate(*handle, now);
    }
    services.erase(pos);
    if (services.empty()) {
        terminate(s, now, body.reason);
    } else {
        sync_history(s);
    }
}

std::vector<msg::Envelope> Provider::tick(TimeMs now)
{
    std::vector<msg::Envelope> out;
    for (auto& [id, s] : sessions_) {
        if (s.record.state != SessionState::Active) {
            continue;
        }
        const auto& cam = s.record.last_cam;
        if (now - cam.timestamp > config_.cam_stale_after) {
            terminate(s, now, msg::TerminationReason::CamStale);
            continue;
        }
        if (!geo::point_in_polygon(cam.position, config_.offloading_area)) {
            terminate(s, now, msg::TerminationReason::LeftArea);
            continue;
        }

        const double s_cam = geo::project_onto_route(s.route, cam.position).arc_length;
        for (const auto& service : s.record.services) {
            const auto handle = s.host.find(service);
            if (!handle) {
                continue;
            }
            for (const TimeMs due : s.host.take_due(*handle, now)) {
                // Constant-velocity extrapolation of the latest CAM to the
                // output time.
                msg::VehicleState ego = cam;
                ego.timestamp = due;
                ego.position = geo::point_along(
                    s.route, s_cam + cam.speed * static_cast<double>(due - cam.timestamp) / 1000.0);
                auto trajectory = svc::plan(svc::PlannerInput{ego, s.env, s.route},
                                            config_.planner_horizon, config_.planner_step);
                out.push_back(msg::make_unicast(config_.station, id, now,
                                                msg::McmBody{service, due, std::move(trajectory)}));
                ++counters_.mcm_sent;
            }
        }
    }
    return out;
}

std::vector<msg::Envelope> Provider::handle(TimeMs now, const msg::Envelope& env)
{
    switch (env.kind()) {
        case msg::MessageKind::Cam:
            return on_cam(now, std::get<msg::VehicleState>(env.payload));
        case msg::MessageKind::Request:
            return on_request(now, env.src, std::get<msg::RequestBody>(env.payload)).out;
        case msg::MessageKind::Cpm:
            on_cpm(now, env.src, std::get<msg::CpmBody>(env.payload));
            return {};
        case msg::MessageKind::Termination:
            on_termination(now, env.src, std::get<msg::TerminationBody>(env.payload));
            return {};
        case msg::MessageKind::Offer:
        case msg::MessageKind::Mcm:
            return {};
    }
    return {};
}

std::size_t Provider::active_session_count() const noexcept
{
    return static_cast<std::size_t>(std::count_if(sessions_.begin(), sessions_.end(), [](const auto& kv) {
        return kv.second.record.state == SessionState::Active;
    }));
}

const SessionRecord* Provider::session(StationId requester) const
{
    const auto it = sessions_.find(requester);
    return it == sessions_.end() ? nullptr : &it->second.record;
}

std::vector<SessionRecord> Provider::history() const
{
    std::vector<SessionRecord> out = history_;
    for (const auto& [id, s] : sessions_) {
        out[s.history_index] = s.record;
    }
    return out;
}

const std::vector<msg::Track>* Provider::environment(StationId requester) const
{
    const auto it = sessions_.find(requester);
    return it == sessions_.end() ? nullptr : &it->second.env;
}

Provider::Session& Provider::open_session(StationId requester, const msg::VehicleState& cam)
{
    auto it = sessions_.find(requester);
    if (it != sessions_.end() && it->second.record.state != SessionState::Terminated) {
        return it->second;
    }
    Session fresh;
    fresh.record.requester = requester;
    fresh.record.last_cam = cam;
    fresh.history_index = history_.size();
    history_.push_back(fresh.record);
    if (it != sessions_.end()) {
        it->second = std::move(fresh);
        return it->second;
    }
    return sessions_.emplace(requester, std::move(fresh)).first->second;
}

void Provider::terminate(Session& s, TimeMs now, std::optional<msg::TerminationReason> reason)
{
    for (const auto& id : s.record.services) {
        if (const auto handle = s.host.find(id)) {
            s.host.deactivate(*handle, now);
        }
    }
    s.record.state = SessionState::Terminated;
    s.record.terminated_at = now;
    s.record.terminated_reason = reason;
    sync_history(s);
}

void Provider::sync_history(const Session& s) { history_[s.history_index] = s.record; }

msg::Envelope Provider::make_offer(TimeMs now, StationId dst) const
{
    msg::OfferBody body;
    body.provider_position = config_.connection_point;
    for (const auto& spec : config_.services) {
        body.services.push_back(spec.id);
    }
    body.map_ids.assign(config_.known_map_ids.begin(), config_.known_map_ids.end());
    return msg::make_unicast(config_.station, dst, now, std::move(body));
}

}  // namespace sofof::provider
