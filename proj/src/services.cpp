#include "sofof/services.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sofof::svc {
namespace {

constexpr double kRampDistance = 10.0;

}  // namespace

void ServiceSpec::validate() const
{
    if (period <= 0) {
        throw ValidationError("service '" + id.str() + "': period must be > 0");
    }
    if (!(cpu_cost_active >= 0.0) || !(cpu_cost_deactivated >= 0.0)) {
        throw ValidationError("service '" + id.str() + "': CPU costs must be >= 0");
    }
}

std::vector<msg::TrajectoryPoint> plan(const PlannerInput& input, TimeMs horizon, TimeMs step)
{
    if (step <= 0 || horizon < step) {
        throw DomainError("planner requires step > 0 and horizon >= step");
    }
    const auto& route = input.route;
    const double length = geo::route_length(route);
    const double s0 = geo::project_onto_route(route, input.ego.position).arc_length;
    const double v = input.ego.speed;

    std::vector<msg::TrajectoryPoint> out;
    const TimeMs count = horizon / step;
    out.reserve(static_cast<std::size_t>(count));
    for (TimeMs k = 1; k <= count; ++k) {
        const TimeMs dt = k * step;
        const double s = std::min(s0 + v * static_cast<double>(dt) / 1000.0, length);
        const double remaining = length - s;
        const double speed = remaining < kRampDistance ? v * remaining / kRampDistance : v;
        out.push_back(msg::TrajectoryPoint{input.ego.timestamp + dt, geo::point_along(route, s),
                                           speed});
    }
    return out;
}

ServiceHandle ServiceHost::activate(const ServiceSpec& spec, TimeMs now, bool immediate)
{
    spec.validate();
    auto existing = find(spec.id);
    if (!existing) {
        instances_.push_back(Instance{spec, false, 0, now, 0.0});
        existing = ServiceHandle{instances_.size() - 1};
    }
    Instance& inst = instances_[existing->slot];
    if (!inst.active) {
        settle_meter(inst, now);
        inst.active = true;
        inst.next_due = immediate ? now : now + inst.spec.period;
    }
    return *existing;
}

void ServiceHost::deactivate(ServiceHandle handle, TimeMs now)
{
    if (handle.slot >= instances_.size()) {
        return;
    }
    Instance& inst = instances_[handle.slot];
    if (inst.active) {
        settle_meter(inst, now);
        inst.active = false;
    }
}

std::optional<ServiceHandle> ServiceHost::find(const ServiceId& id) const
{
    for (std::size_t i = 0; i < instances_.size(); ++i) {
        if (instances_[i].spec.id == id) {
            return ServiceHandle{i};
        }
    }
    return std::nullopt;
}

bool ServiceHost::is_active(ServiceHandle handle) const
{
    return handle.slot < instances_.size() && instances_[handle.slot].active;
}

const ServiceSpec& ServiceHost::spec(ServiceHandle handle) const
{
    return instances_.at(handle.slot).spec;
}

std::vector<TimeMs> ServiceHost::take_due(ServiceHandle handle, TimeMs now)
{
    std::vector<TimeMs> due;
    if (!is_active(handle)) {
        return due;
    }
    Instance& inst = instances_[handle.slot];
    while (inst.next_due <= now) {
        due.push_back(inst.next_due);
        inst.next_due += inst.spec.period;
    }
    return due;
}

std::optional<TimeMs> ServiceHost::next_due(ServiceHandle handle) const
{
    if (!is_active(handle)) {
        return std::nullopt;
    }
    return instances_[handle.slot].next_due;
}

double ServiceHost::cpu_usage(TimeMs now) const
{
    double total = 0.0;
    for (const auto& inst : instances_) {
        const double cost = inst.active ? inst.spec.cpu_cost_active : inst.spec.cpu_cost_deactivated;
        const TimeMs open = std::max<TimeMs>(0, now - inst.meter_since);
        total += inst.meter_accum + cost * static_cast<double>(open);
    }
    return total / 1000.0;
}

void ServiceHost::settle_meter(Instance& inst, TimeMs now)
{
    const double cost = inst.active ? inst.spec.cpu_cost_active : inst.spec.cpu_cost_deactivated;
    if (now > inst.meter_since) {
        inst.meter_accum += cost * static_cast<double>(now - inst.meter_since);
        inst.meter_since = now;
    }
}

}  // namespace sofof::svc
