#include "sofof/requester.hpp"

#include <algorithm>

namespace sofof::requester {

void QosProfile::validate() const
{
    if (l_max <= 0 || dt_max <= 0) {
        throw ValidationError("qos: l_max and dt_max must be > 0");
    }
}

bool qos_compliant(TimeMs latency, TimeMs gap, const QosProfile& qos) noexcept
{
    return latency <= qos.l_max && gap <= qos.dt_max;
}

void RequesterConfig::validate() const
{
    if (!(r_off > 0.0)) {
        throw ValidationError("requester.r_off must be > 0");
    }
    if (!(d_min >= 0.0)) {
        throw ValidationError("requester.d_min must be >= 0");
    }
    if (request_timeout <= 0) {
        throw ValidationError("requester.request_timeout must be > 0");
    }
    if (planner_step <= 0 || planner_horizon < planner_step) {
        throw ValidationError("requester planner needs step > 0 and horizon >= step");
    }
    for (const auto& spec : local_services) {
        spec.validate();
    }
    for (const auto& [id, qos] : qos) {
        qos.validate();
        const bool has_local = std::any_of(local_services.begin(), local_services.end(),
                                           [&](const auto& s) { return s.id == id; });
        if (!has_local) {
            throw ValidationError("requester: service '" + id.str() + "' has no local fallback");
        }
    }
}

std::string_view to_string(Phase phase) noexcept
{
    switch (phase) {
        case Phase::Idle: return "Idle";
        case Phase::Requested: return "Requested";
        case Phase::Remote: return "Remote";
        case Phase::Fallback: return "Fallback";
    }
    return "Idle";
}

Requester::Requester(RequesterConfig config, TimeMs start) : config_(std::move(config))
{
    config_.validate();
    ego_.station = config_.station;
    ego_.timestamp = start;
    ego_.position = config_.planned_route.front();
    for (const auto& spec : config_.local_services) {
        host_.activate(spec, start);
        last_output_[spec.id] = start;
    }
    for (const auto& [id, qos] : config_.qos) {
        OffloadState st;
        st.service = id;
        states_.emplace(id, std::move(st));
    }
}

void Requester::update_ego(const msg::VehicleState& ego)
{
    ego_ = ego;
    ego_.station = config_.station;
}

void Requester::set_planned_route(geo::Route route) { config_.planned_route = std::move(route); }

geo::Route Requester::remaining_route(geo::Point2 current_pos) const
{
    const auto& route = config_.planned_route;
    const auto proj = geo::project_onto_route(route, current_pos);
    std::vector<geo::Point2> pts{current_pos};
    for (std::size_t i = proj.segment + 1; i < route.size(); ++i) {
        if (route[i] != pts.back()) {
            pts.push_back(route[i]);
        }
    }
    return geo::Route(std::move(pts));
}

std::vector<msg::Envelope> Requester::on_offer(TimeMs now, StationId offer_src,
                                               const msg::OfferBody& body)
{
    return on_offer(now, offer_src, body, ego_.position);
}

std::vector<msg::Envelope> Requester::on_offer(TimeMs now, StationId offer_src,
                                               const msg::OfferBody& body, geo::Point2 current_pos)
{
    expire_requests(now);

    std::vector<ServiceId> wanted;
    for (const auto& id : body.services) {
        const auto it = states_.find(id);
        if (it == states_.end()) {
            continue;
        }
        const Phase ph = it->second.phase;
        if ((ph == Phase::Idle || ph == Phase::Fallback) &&
            std::find(wanted.begin(), wanted.end(), id) == wanted.end()) {
            wanted.push_back(id);
        }
    }
    if (wanted.empty()) {
        return {};
    }

    const geo::Route path = remaining_route(current_pos);
    if (!geo::lodm_accept(path, current_pos, config_.r_off, body.provider_position, config_.d_min,
                          config_.lodm)) {
        return {};
    }

    for (const auto& id : wanted) {
        auto& st = states_.at(id);
        st.phase = Phase::Requested;
        st.requested_at = now;
        st.provider = offer_src;
        st.last_rx.reset();
    }
    ++counters_.requests_sent;
    msg::RequestBody req;
    req.services = std::move(wanted);
    req.planned_route = path;
    req.map_id = config_.map_id;
    req.current_speed = ego_.speed;
    return {msg::make_unicast(config_.station, offer_src, now, std::move(req))};
}

std::vector<msg::Envelope> Requester::on_mcm(TimeMs now, StationId src, const msg::McmBody& body)
{
    auto it = states_.find(body.service);
    if (it == states_.end() || it->second.phase == Phase::Idle ||
        it->second.phase == Phase::Fallback) {
        ++counters_.mcm_discarded;
        return {};
    }
    OffloadState& st = it->second;
    if (st.provider && *st.provider != src) {
        ++counters_.mcm_discarded;
        return {};
    }
    ++counters_.mcm_received;
    const QosProfile& qos = config_.qos.at(body.service);
    const TimeMs latency = now + config_.clock_skew - body.creation_time;

    if (st.phase == Phase::Requested) {
        // First data doubles as the acceptance notice.
        st.phase = Phase::Remote;
        if (const auto h = host_.find(body.service)) {
            host_.deactivate(*h, now);
        }
        open_episode_[body.service] = episodes_.size();
        episodes_.push_back(Episode{body.service, src, now, std::nullopt, std::nullopt});
        set_remote(now, true);
    }

    if (latency > qos.l_max) {
        return {fall_back(now, st, msg::TerminationReason::QosLatency)};
    }
    if (st.last_rx && now - *st.last_rx > qos.dt_max) {
        return {fall_back(now, st, msg::TerminationReason::QosInterArrival)};
    }

    st.latency_log.push_back(LatencySample{now, latency});
    st.last_rx = now;
    emit(now, body.service, OutputSource::Remote, body.trajectory);
    return {};
}

std::vector<msg::Envelope> Requester::tick(TimeMs now)
{
    std::vector<msg::Envelope> out;
    expire_requests(now);
    for (auto& [id, st] : states_) {
        if (st.phase == Phase::Remote && st.last_rx &&
            now - *st.last_rx > config_.qos.at(id).dt_max) {
            out.push_back(fall_back(now, st, msg::TerminationReason::QosInterArrival));
        }
    }
    for (const auto& spec : config_.local_services) {
        run_local(now, spec.id);
    }
    return out;
}

std::vector<msg::Envelope> Requester::handle(TimeMs now, const msg::Envelope& env)
{
    switch (env.kind()) {
        case msg::MessageKind::Offer:
            return on_offer(now, env.src, std::get<msg::OfferBody>(env.payload));
        case msg::MessageKind::Mcm:
            return on_mcm(now, env.src, std::get<msg::McmBody>(env.payload));
        default:
            return {};
    }
}

bool Requester::available(TimeMs now) const
{
    for (const auto& spec : config_.local_services) {
        const auto h = host_.find(spec.id);
        if (h && host_.is_active(*h)) {
            continue;
        }
        const auto it = states_.find(spec.id);
        if (it == states_.end() || it->second.phase != Phase::Remote || !it->second.last_rx) {
            return false;
        }
        if (now - *it->second.last_rx > config_.qos.at(spec.id).dt_max) {
            return false;
        }
    }
    return true;
}

const OffloadState& Requester::state(const ServiceId& service) const { return states_.at(service); }

TimeMs Requester::remote_time(TimeMs now) const noexcept
{
    return remote_accum_ + (remote_count_ > 0 ? now - remote_since_ : 0);
}

void Requester::expire_requests(TimeMs now)
{
    for (auto& [id, st] : states_) {
        if (st.phase == Phase::Requested && now - st.requested_at > config_.request_timeout) {
            st.phase = Phase::Idle;
            st.provider.reset();
            ++counters_.request_timeouts;
        }
    }
}

msg::Envelope Requester::fall_back(TimeMs now, OffloadState& st, msg::TerminationReason reason)
{
    const bool was_remote = st.phase == Phase::Remote;
    st.phase = Phase::Fallback;
    st.last_rx.reset();
    ++counters_.fallbacks;
    ++counters_.violations[reason];

    if (was_remote) {
        set_remote(now, false);
        if (const auto it = open_episode_.find(st.service); it != open_episode_.end()) {
            episodes_[it->second].end = now;
            episodes_[it->second].reason = reason;
            open_episode_.erase(it);
        }
        host_.activate(local_spec(st.service), now, true);
        run_local(now, st.service);
    }
    const StationId provider = st.provider.value_or(StationId{});
    return msg::make_unicast(config_.station, provider, now, msg::TerminationBody{st.service, reason});
}

void Requester::run_local(TimeMs now, const ServiceId& service)
{
    const auto h = host_.find(service);
    if (!h) {
        return;
    }
    for (const TimeMs due : host_.take_due(*h, now)) {
        msg::VehicleState ego = ego_;
        ego.timestamp = due;
        auto trajectory = svc::plan(svc::PlannerInput{ego, {}, config_.planned_route},
                                    config_.planner_horizon, config_.planner_step);
        ++counters_.local_outputs;
        emit(due, service, OutputSource::Local, trajectory);
    }
}

void Requester::emit(TimeMs at, const ServiceId& service, OutputSource source,
                     const std::vector<msg::TrajectoryPoint>& trajectory)
{
    auto& last = last_output_[service];
    gap_max_ = std::max(gap_max_, at - last);
    last = std::max(last, at);
    if (sink_) {
        sink_(at, service, source, trajectory);
    }
}

void Requester::set_remote(TimeMs now, bool entering)
{
    if (entering) {
        if (remote_count_++ == 0) {
            remote_since_ = now;
        }
    } else if (remote_count_ > 0 && --remote_count_ == 0) {
        remote_accum_ += now - remote_since_;
    }
}

const svc::ServiceSpec& Requester::local_spec(const ServiceId& service) const
{
    const auto it = std::find_if(config_.local_services.begin(), config_.local_services.end(),
                                 [&](const auto& s) { return s.id == service; });
    if (it == config_.local_services.end()) {
        throw ValidationError("no local spec for service '" + service.str() + "'");
    }
    return *it;
}

}  // namespace sofof::requester
